//! Tabular ingestion, seeded train/test split, z-score standardization and
//! per-feature input-uncertainty specifications.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::matrix::Matrix;
use crate::rng;
use crate::stats;

/// Raw table as read from disk, columns in the requested feature order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub feature_names: Vec<String>,
    pub rows: Matrix,
    pub labels: Vec<f64>,
}

impl RawTable {
    pub fn new(feature_names: Vec<String>, rows: Matrix, labels: Vec<f64>) -> Result<Self> {
        check_dim(rows.nrows(), labels.len())?;
        check_dim(feature_names.len(), rows.ncols())?;
        Ok(Self { feature_names, rows, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    fn select(&self, idx: &[usize]) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            rows: self.rows.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Reads a delimited file with a header row, keeping `feature_subset` (in that
/// order) as features and `label_name` as the regression target. An empty
/// subset selects every column except the label.
pub fn ingest(
    path: impl AsRef<Path>,
    feature_subset: &[String],
    label_name: &str,
    delimiter: u8,
) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    read_table(file, feature_subset, label_name, delimiter)
}

pub fn read_table<R: std::io::Read>(
    reader: R,
    feature_subset: &[String],
    label_name: &str,
    delimiter: u8,
) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let label_idx = find(label_name)?;
    let feature_names: Vec<String> = if feature_subset.is_empty() {
        headers.iter().filter(|h| *h != label_name).map(str::to_string).collect()
    } else {
        feature_subset.to_vec()
    };
    let feature_idx = feature_names.iter().map(|f| find(f)).collect::<Result<Vec<_>>>()?;

    let d = feature_idx.len();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let cell = |col: usize| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                row,
                column: headers[col].to_string(),
                value: raw.to_string(),
            })
        };
        for &c in &feature_idx {
            data.push(cell(c)?);
        }
        labels.push(cell(label_idx)?);
    }
    if labels.len() < 2 {
        return Err(Error::arg(format!("table has {} data rows, need at least 2", labels.len())));
    }
    let rows = Matrix::from_vec(labels.len(), d, data)?;
    RawTable::new(feature_names, rows, labels)
}

/// Seeded shuffle, then the first `ceil(N * (1 - test_fraction))` rows train.
pub fn split(raw: &RawTable, test_fraction: f64, seed: u64) -> Result<(RawTable, RawTable)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::arg(format!("test_fraction must lie in (0, 1), got {test_fraction}")));
    }
    let n = raw.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::seeded(seed));
    let n_train = ((n as f64) * (1.0 - test_fraction)).ceil() as usize;
    let n_train = n_train.min(n);
    Ok((raw.select(&idx[..n_train]), raw.select(&idx[n_train..])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl Scaler {
    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.means).zip(&self.sds).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn inverse_row(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.means).zip(&self.sds).map(|((v, m), s)| v * s + m).collect()
    }

    pub fn transform(&self, table: &RawTable) -> Result<StandardizedDataset> {
        check_dim(self.dim(), table.dim())?;
        let rows: Vec<Vec<f64>> = table.rows.rows().map(|r| self.transform_row(r)).collect();
        let features = if rows.is_empty() {
            Matrix::zeros(0, self.dim())
        } else {
            Matrix::from_rows(&rows)?
        };
        Ok(StandardizedDataset {
            features,
            labels: table.labels.clone(),
            scaler: self.clone(),
            feature_names: table.feature_names.clone(),
        })
    }

    pub fn inverse_transform(&self, data: &StandardizedDataset) -> Result<RawTable> {
        check_dim(self.dim(), data.dim())?;
        let mut rows = Matrix::zeros(data.len(), self.dim());
        for i in 0..data.len() {
            rows.row_mut(i).copy_from_slice(&self.inverse_row(data.features.row(i)));
        }
        RawTable::new(data.feature_names.clone(), rows, data.labels.clone())
    }
}

/// Z-scored features; labels stay on their original scale.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedDataset {
    pub features: Matrix,
    pub labels: Vec<f64>,
    pub scaler: Scaler,
    pub feature_names: Vec<String>,
}

impl StandardizedDataset {
    /// Wraps features that are already on the model scale, with an identity
    /// scaler.
    pub fn from_standardized(features: Matrix, labels: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        check_dim(features.nrows(), labels.len())?;
        check_dim(features.ncols(), feature_names.len())?;
        let d = features.ncols();
        let scaler = Scaler { means: vec![0.0; d], sds: vec![1.0; d], feature_names: feature_names.clone() };
        Ok(Self { features, labels, scaler, feature_names })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            scaler: self.scaler.clone(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Fits per-column mean and population sd on `train` and standardizes it.
pub fn fit_standardize(train: &RawTable) -> Result<(Scaler, StandardizedDataset)> {
    if train.len() < 2 {
        return Err(Error::arg("standardization needs at least 2 rows"));
    }
    let mut means = Vec::with_capacity(train.dim());
    let mut sds = Vec::with_capacity(train.dim());
    for (j, name) in train.feature_names.iter().enumerate() {
        let col = train.rows.column(j);
        let sd = stats::sd_population(&col);
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(Error::DegenerateFeature(name.clone()));
        }
        means.push(stats::mean(&col));
        sds.push(sd);
    }
    let scaler = Scaler { means, sds, feature_names: train.feature_names.clone() };
    let data = scaler.transform(train)?;
    Ok((scaler, data))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UncertaintyLevel {
    High,
    Medium,
    Low,
    None,
}

impl UncertaintyLevel {
    /// Noise sd as a multiple of the feature's training sd.
    pub fn sd_multiple(self) -> f64 {
        match self {
            UncertaintyLevel::High => 1.0,
            UncertaintyLevel::Medium => 0.5,
            UncertaintyLevel::Low => 0.3,
            UncertaintyLevel::None => 0.0,
        }
    }

    pub const ALL: [UncertaintyLevel; 4] =
        [UncertaintyLevel::High, UncertaintyLevel::Medium, UncertaintyLevel::Low, UncertaintyLevel::None];
}

impl fmt::Display for UncertaintyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UncertaintyLevel::High => "high",
            UncertaintyLevel::Medium => "medium",
            UncertaintyLevel::Low => "low",
            UncertaintyLevel::None => "none",
        })
    }
}

impl FromStr for UncertaintyLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "high" => Ok(UncertaintyLevel::High),
            "medium" => Ok(UncertaintyLevel::Medium),
            "low" => Ok(UncertaintyLevel::Low),
            "none" => Ok(UncertaintyLevel::None),
            other => Err(Error::arg(format!(
                "unknown uncertainty level `{other}` (expected high, medium, low or none)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDistribution {
    #[default]
    Gaussian,
}

/// Per-feature noise sd in standardized units. Zero marks a certain feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySpec {
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub distribution: NoiseDistribution,
}

impl UncertaintySpec {
    pub fn new(sigma: Vec<f64>) -> Result<Self> {
        if let Some(i) = sigma.iter().position(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::arg(format!("sigma[{i}] = {} must be finite and >= 0", sigma[i])));
        }
        Ok(Self { sigma, distribution: NoiseDistribution::Gaussian })
    }

    pub fn certain(dim: usize) -> Self {
        Self { sigma: vec![0.0; dim], distribution: NoiseDistribution::Gaussian }
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_certain(&self) -> bool {
        self.sigma.iter().all(|&s| s == 0.0)
    }

    pub fn uncertain_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.sigma.iter().enumerate().filter(|(_, s)| **s > 0.0).map(|(d, _)| d)
    }
}

pub fn make_uncertainty_spec(
    level: UncertaintyLevel,
    uncertain_features: &[String],
    dataset: &StandardizedDataset,
) -> Result<UncertaintySpec> {
    let mut sigma = vec![0.0; dataset.dim()];
    for name in uncertain_features {
        let d = dataset
            .feature_index(name)
            .ok_or_else(|| Error::arg(format!("unknown feature `{name}`")))?;
        // the training sd of a standardized feature is 1
        sigma[d] = level.sd_multiple();
    }
    UncertaintySpec::new(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    const CSV: &str = "a,b,c,y\n1,10,0.5,3\n3,20,0.1,4\n5,30,0.9,5\n7,40,0.2,6\n";

    #[test]
    fn ingest_reorders_columns() {
        let t = read_table(CSV.as_bytes(), &names(&["c", "a"]), "y", b',').unwrap();
        assert_eq!(t.feature_names, names(&["c", "a"]));
        assert_eq!(t.rows.row(1), &[0.1, 3.0]);
        assert_eq!(t.labels, vec![3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn ingest_all_but_label() {
        let t = read_table(CSV.as_bytes(), &[], "y", b',').unwrap();
        assert_eq!(t.dim(), 4 - 1);
        assert_eq!(t.feature_names, names(&["a", "b", "c"]));
    }

    #[test]
    fn ingest_semicolons() {
        let csv = "\"a\";\"y\"\n1;2\n3;4\n";
        let t = read_table(csv.as_bytes(), &names(&["a"]), "y", b';').unwrap();
        assert_eq!(t.rows.column(0), vec![1.0, 3.0]);
    }

    #[test]
    fn missing_column_is_named() {
        let err = read_table(CSV.as_bytes(), &names(&["alchol"]), "y", b',').unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "alchol"), "{err}");
    }

    #[test]
    fn non_numeric_cell_reports_row() {
        let csv = "a,y\n1,2\nx,3\n";
        match read_table(csv.as_bytes(), &names(&["a"]), "y", b',').unwrap_err() {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 1);
                assert_eq!(column, "a");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_cell_is_an_error() {
        let csv = "a,y\n1,2\n,3\n";
        assert!(matches!(
            read_table(csv.as_bytes(), &names(&["a"]), "y", b',').unwrap_err(),
            Error::Parse { .. }
        ));
    }

    fn table(n: usize) -> RawTable {
        let rows = Matrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        RawTable::new(names(&["x"]), rows, (0..n).map(|i| i as f64 * 2.0).collect()).unwrap()
    }

    #[test]
    fn split_sizes_and_union() {
        let t = table(4);
        let (a, b) = split(&t, 0.5, 1).unwrap();
        assert_eq!((a.len(), b.len()), (2, 2));
        let mut all: Vec<f64> = a.rows.column(0).into_iter().chain(b.rows.column(0)).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, vec![0.0, 1.0, 2.0, 3.0]);
        // labels travel with their rows
        for (r, l) in a.rows.rows().zip(&a.labels) {
            assert_eq!(r[0] * 2.0, *l);
        }
    }

    #[test]
    fn split_sizes_round_train_up() {
        let (a, b) = split(&table(1599), 0.2, 7).unwrap();
        assert_eq!((a.len(), b.len()), (1280, 319));
    }

    #[test]
    fn split_is_deterministic() {
        let t = table(50);
        assert_eq!(split(&t, 0.3, 9).unwrap(), split(&t, 0.3, 9).unwrap());
        assert_ne!(split(&t, 0.3, 9).unwrap().0, split(&t, 0.3, 10).unwrap().0);
    }

    #[test]
    fn split_rejects_bad_fraction() {
        for f in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(split(&table(4), f, 0), Err(Error::Argument(_))));
        }
    }

    #[test]
    fn standardize_two_values() {
        let rows = Matrix::from_vec(2, 1, vec![1.0, 3.0]).unwrap();
        let t = RawTable::new(names(&["x"]), rows, vec![0.0, 1.0]).unwrap();
        let (s, d) = fit_standardize(&t).unwrap();
        assert_eq!(s.means, vec![2.0]);
        assert_eq!(s.sds, vec![1.0]);
        assert_eq!(d.features.column(0), vec![-1.0, 1.0]);
        assert_eq!(d.labels, vec![0.0, 1.0]);
    }

    #[test]
    fn zero_variance_names_feature() {
        let rows = Matrix::from_vec(3, 2, vec![1.0, 5.0, 2.0, 5.0, 3.0, 5.0]).unwrap();
        let t = RawTable::new(names(&["ok", "flat"]), rows, vec![0.0; 3]).unwrap();
        assert!(matches!(fit_standardize(&t), Err(Error::DegenerateFeature(ref f)) if f == "flat"));
    }

    #[test]
    fn uncertainty_levels() {
        let t = read_table(CSV.as_bytes(), &names(&["a", "b", "c"]), "y", b',').unwrap();
        let (_, d) = fit_standardize(&t).unwrap();
        let s = make_uncertainty_spec(UncertaintyLevel::High, &names(&["a", "c"]), &d).unwrap();
        assert_eq!(s.sigma, vec![1.0, 0.0, 1.0]);
        let s = make_uncertainty_spec(UncertaintyLevel::Medium, &names(&["b"]), &d).unwrap();
        assert_eq!(s.sigma, vec![0.0, 0.5, 0.0]);
        let s = make_uncertainty_spec(UncertaintyLevel::Low, &names(&["b"]), &d).unwrap();
        assert_eq!(s.sigma, vec![0.0, 0.3, 0.0]);
        let s = make_uncertainty_spec(UncertaintyLevel::None, &[], &d).unwrap();
        assert!(s.is_certain());
        assert!(make_uncertainty_spec(UncertaintyLevel::High, &names(&["zz"]), &d).is_err());
    }

    #[test]
    fn level_parsing() {
        assert_eq!("HIGH".parse::<UncertaintyLevel>().unwrap(), UncertaintyLevel::High);
        assert!("extreme".parse::<UncertaintyLevel>().is_err());
    }

    #[test]
    fn scaler_json_keys() {
        let s = Scaler { means: vec![1.0], sds: vec![2.0], feature_names: names(&["x"]) };
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        assert_eq!(v["means"][0], 1.0);
        assert_eq!(v["sds"][0], 2.0);
        assert_eq!(v["feature_names"][0], "x");
    }
}
