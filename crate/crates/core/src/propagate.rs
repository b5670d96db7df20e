//! Monte-Carlo propagation of input noise into attributions.
//!
//! Hypothetical instances `x0 + eps` are drawn from the uncertainty spec and
//! an attribution is computed for each; the resulting per-feature samples are
//! summarized (mean, sd, empirical 90% interval, kernel density) for display.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::UncertaintySpec;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::explainer::LinearExplanation;
use crate::matrix::Matrix;
use crate::rng;
use crate::stats;

pub const DEFAULT_METRIC_SAMPLES: usize = 150;
pub const DEFAULT_DISPLAY_SAMPLES: usize = 1000;
pub const DEFAULT_GRID_SIZE: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct HypotheticalSet {
    pub center: Vec<f64>,
    pub samples: Matrix,
    pub spec: UncertaintySpec,
    pub seed: u64,
}

impl HypotheticalSet {
    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }
}

/// Sample `k` is drawn from its own stream `(seed, k)`; certain features are
/// copied from the center untouched.
pub fn sample_hypotheticals(center: &[f64], spec: &UncertaintySpec, n: usize, seed: u64) -> Result<HypotheticalSet> {
    check_dim(spec.dim(), center.len())?;
    check_finite("center", center)?;
    if n < 1 {
        return Err(Error::arg("need at least one hypothetical sample"));
    }
    let noise: Vec<(usize, Normal<f64>)> = spec
        .uncertain_features()
        .map(|d| (d, Normal::new(0.0, spec.sigma[d]).expect("sigma validated finite and > 0")))
        .collect();
    let mut samples = Matrix::zeros(n, center.len());
    for k in 0..n {
        let row = samples.row_mut(k);
        row.copy_from_slice(center);
        let mut r = rng::stream(seed, k as u64);
        for (d, dist) in &noise {
            row[*d] += dist.sample(&mut r);
        }
    }
    Ok(HypotheticalSet { center: center.to_vec(), samples, spec: spec.clone(), seed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl Density {
    /// Trapezoid integral of the density over its grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(g, f)| 0.5 * (g[1] - g[0]) * (f[0] + f[1]))
            .sum()
    }

    pub fn mode(&self) -> f64 {
        let i = self
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i);
        self.grid[i]
    }
}

/// Result of a density estimate: a smooth curve, or a single point when all
/// samples coincide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DensityEstimate {
    Smooth(Density),
    Point { value: f64 },
}

/// Gaussian KDE with Silverman's bandwidth `1.06 * sd * n^(-1/5)` (population
/// sd), evaluated on `grid_size` points spanning `[min - 3h, max + 3h]`.
pub fn kde_density(samples: &[f64], grid_size: usize) -> Result<DensityEstimate> {
    if samples.len() < 2 {
        return Err(Error::arg("density estimate needs at least 2 samples"));
    }
    if grid_size < 2 {
        return Err(Error::arg("grid_size must be >= 2"));
    }
    check_finite("samples", samples)?;
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let sd = stats::sd_population(samples);
    if lo == hi || !(sd > 0.0) {
        return Ok(DensityEstimate::Point { value: lo });
    }
    let n = samples.len() as f64;
    let h = 1.06 * sd * n.powf(-0.2);
    let (start, end) = (lo - 3.0 * h, hi + 3.0 * h);
    let step = (end - start) / (grid_size - 1) as f64;
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    let grid: Vec<f64> = (0..grid_size).map(|i| start + step * i as f64).collect();
    let density = grid
        .iter()
        .map(|&g| {
            samples.iter().map(|&s| (-0.5 * ((g - s) / h).powi(2)).exp()).sum::<f64>() * norm
        })
        .collect();
    Ok(DensityEstimate::Smooth(Density { grid, density, bandwidth: h }))
}

/// Location and spread of a scalar quantity over hypothetical instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub mean: f64,
    pub sd: f64,
    pub ci90_halfwidth: f64,
}

impl ScoreSummary {
    pub fn of(values: &[f64]) -> Self {
        Self { mean: stats::mean(values), sd: stats::sd_sample(values), ci90_halfwidth: stats::ci90_halfwidth(values) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionDistribution {
    /// `n x D`, row `k` is the attribution of hypothetical `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_feature_samples: Option<Matrix>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub ci90_halfwidth: Vec<f64>,
    pub density_grid: Vec<DensityEstimate>,
}

impl AttributionDistribution {
    pub fn from_samples(samples: Matrix, grid_size: usize) -> Result<Self> {
        let d = samples.ncols();
        let mut mean = Vec::with_capacity(d);
        let mut sd = Vec::with_capacity(d);
        let mut ci = Vec::with_capacity(d);
        let mut density_grid = Vec::with_capacity(d);
        for j in 0..d {
            let col = samples.column(j);
            mean.push(stats::mean(&col));
            sd.push(stats::sd_sample(&col));
            ci.push(stats::ci90_halfwidth(&col));
            density_grid.push(if col.len() >= 2 {
                kde_density(&col, grid_size)?
            } else {
                DensityEstimate::Point { value: col[0] }
            });
        }
        Ok(Self { per_feature_samples: Some(samples), mean, sd, ci90_halfwidth: ci, density_grid })
    }

    pub fn samples(&self) -> Option<&Matrix> {
        self.per_feature_samples.as_ref()
    }

    /// Row sums of the attribution samples.
    pub fn totals(&self) -> Option<Vec<f64>> {
        self.per_feature_samples.as_ref().map(|m| m.rows().map(|r| r.iter().sum()).collect())
    }

    /// Copy without the raw sample matrix.
    pub fn without_samples(&self) -> Self {
        Self { per_feature_samples: None, ..self.clone() }
    }
}

/// Computes `explain(sample_k)` for every hypothetical and summarizes.
pub fn attribution_distribution<F>(explain: F, hyp: &HypotheticalSet) -> Result<AttributionDistribution>
where
    F: Fn(usize, &[f64]) -> Result<Vec<f64>> + Sync,
{
    attribution_distribution_with_grid(explain, hyp, DEFAULT_GRID_SIZE)
}

pub fn attribution_distribution_with_grid<F>(
    explain: F,
    hyp: &HypotheticalSet,
    grid_size: usize,
) -> Result<AttributionDistribution>
where
    F: Fn(usize, &[f64]) -> Result<Vec<f64>> + Sync,
{
    let d = hyp.samples.ncols();
    let rows: Vec<Vec<f64>> = (0..hyp.len())
        .into_par_iter()
        .map(|k| {
            let a = explain(k, hyp.samples.row(k)).map_err(|e| Error::Propagation {
                sample: k,
                reason: e.to_string(),
            })?;
            if a.len() != d {
                return Err(Error::Propagation {
                    sample: k,
                    reason: format!("attribution has {} entries, expected {d}", a.len()),
                });
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::Propagation { sample: k, reason: "attribution is not finite".into() });
            }
            Ok(a)
        })
        .collect::<Result<_>>()?;
    AttributionDistribution::from_samples(Matrix::from_rows(&rows)?, grid_size)
}

/// Fixed-explanation propagation: one surrogate fitted at the center, its
/// attributions `w o (x0 + eps)` vary only through the inputs.
pub fn propagate_fixed(expl: &LinearExplanation, hyp: &HypotheticalSet) -> Result<AttributionDistribution> {
    check_dim(expl.dim(), hyp.samples.ncols())?;
    attribution_distribution(|_, x| expl.attributions(x), hyp)
}

/// Surrogate output over the hypotheticals, with the surrogate held fixed.
pub fn surrogate_values(expl: &LinearExplanation, hyp: &HypotheticalSet) -> Result<Vec<f64>> {
    hyp.samples.rows().map(|x| expl.value(x)).collect()
}
