//! Faithfulness of surrogates under input noise, improvement-probability
//! curves, explanation distances and the model/explanation sweep measures.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{StandardizedDataset, UncertaintySpec};
use crate::error::{check_dim, Error, Result};
use crate::explainer::{fit_regularized_lime, LimeConfig, LinearExplanation};
use crate::predictor::{integrated_gradients, MlpPredictor, Predictor};
use crate::propagate::{sample_hypotheticals, HypotheticalSet};
use crate::rng;
use crate::stats;

pub const LOG_DISTANCE_FLOOR: f64 = 1e-12;
pub const DEFAULT_BINS: usize = 10;

/// A local explanation that can be evaluated as a predictor of the score.
pub trait Surrogate: Sync {
    fn dim(&self) -> usize;

    fn value_at(&self, x: &[f64]) -> Result<f64>;
}

impl Surrogate for LinearExplanation {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn value_at(&self, x: &[f64]) -> Result<f64> {
        self.value(x)
    }
}

/// Integrated gradients read as a surrogate: `f(baseline) + sum_d IG_d(x)`,
/// recomputed at every point it is evaluated on.
pub struct IgSurrogate<'a> {
    model: &'a MlpPredictor,
    baseline_point: Vec<f64>,
    base_value: f64,
    steps: usize,
}

impl<'a> IgSurrogate<'a> {
    pub fn new(model: &'a MlpPredictor, baseline_point: Vec<f64>, steps: usize) -> Result<Self> {
        let base_value = model.predict(&baseline_point)?;
        if steps == 0 {
            return Err(Error::arg("IG steps must be > 0"));
        }
        Ok(Self { model, baseline_point, base_value, steps })
    }

    pub fn attributions(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(integrated_gradients(self.model, x, &self.baseline_point, self.steps)?.attributions)
    }
}

impl Surrogate for IgSurrogate<'_> {
    fn dim(&self) -> usize {
        self.model.input_dim()
    }

    fn value_at(&self, x: &[f64]) -> Result<f64> {
        Ok(self.base_value + self.attributions(x)?.iter().sum::<f64>())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    Lime,
    RegLime,
    IgNn,
    IgRegnn,
}

impl Technique {
    pub const ALL: [Technique; 4] = [Technique::Lime, Technique::RegLime, Technique::IgNn, Technique::IgRegnn];

    pub fn as_str(self) -> &'static str {
        match self {
            Technique::Lime => "lime",
            Technique::RegLime => "reg_lime",
            Technique::IgNn => "ig_nn",
            Technique::IgRegnn => "ig_regnn",
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessRecord {
    pub instance_id: usize,
    pub technique: Technique,
    pub f0: f64,
    pub expected_f: f64,
    #[serde(rename = "n")]
    pub n_samples: usize,
}

/// `(f(x0) - g(x0))^2`
pub fn point_faithfulness<P, S>(model: &P, surrogate: &S, x0: &[f64]) -> Result<f64>
where
    P: Predictor + ?Sized,
    S: Surrogate + ?Sized,
{
    check_dim(model.input_dim(), x0.len())?;
    check_dim(surrogate.dim(), x0.len())?;
    let diff = model.predict_point(x0) - surrogate.value_at(x0)?;
    Ok(diff * diff)
}

/// `F0` and the Monte-Carlo mean of `(f(x0) - g(x0 + eps))^2` over `hyp`.
///
/// The reference is always the predictor at the original instance.
pub fn faithfulness_on<P, S>(model: &P, surrogate: &S, hyp: &HypotheticalSet) -> Result<(f64, f64)>
where
    P: Predictor + ?Sized,
    S: Surrogate + ?Sized,
{
    let x0 = &hyp.center;
    check_dim(model.input_dim(), x0.len())?;
    let reference = model.predict_point(x0);
    if !reference.is_finite() {
        return Err(Error::Propagation { sample: 0, reason: "model output at the instance is not finite".into() });
    }
    let f0 = (reference - surrogate.value_at(x0)?).powi(2);
    let sq: Vec<f64> = (0..hyp.len())
        .into_par_iter()
        .map(|k| {
            let g = surrogate.value_at(hyp.samples.row(k))?;
            if !g.is_finite() {
                return Err(Error::Propagation { sample: k, reason: "surrogate output is not finite".into() });
            }
            Ok((reference - g).powi(2))
        })
        .collect::<Result<_>>()?;
    // accumulate around F0 so that noise-free inputs reproduce it exactly
    let excess = sq.iter().map(|v| v - f0).sum::<f64>() / sq.len() as f64;
    Ok((f0, f0 + excess))
}

/// Expected faithfulness distance with `n` fresh hypotheticals around `x0`.
#[allow(clippy::too_many_arguments)]
pub fn expected_faithfulness<P, S>(
    model: &P,
    surrogate: &S,
    x0: &[f64],
    spec: &UncertaintySpec,
    n: usize,
    seed: u64,
    instance_id: usize,
    technique: Technique,
) -> Result<FaithfulnessRecord>
where
    P: Predictor + ?Sized,
    S: Surrogate + ?Sized,
{
    if n < 2 {
        return Err(Error::arg("expected faithfulness needs n >= 2"));
    }
    let hyp = sample_hypotheticals(x0, spec, n, seed)?;
    let (f0, expected_f) = faithfulness_on(model, surrogate, &hyp)?;
    Ok(FaithfulnessRecord { instance_id, technique, f0, expected_f, n_samples: n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessCurve {
    /// `n_bins + 1` edges in baseline `F0`.
    pub bin_edges: Vec<f64>,
    /// Mean baseline `F0` per bin.
    pub bin_centers: Vec<f64>,
    pub prob_improved: Vec<f64>,
    pub standard_error: Vec<f64>,
    pub counts: Vec<usize>,
}

impl FaithfulnessCurve {
    /// Spearman correlation of bin center against improvement probability.
    pub fn trend(&self) -> f64 {
        stats::spearman(&self.bin_centers, &self.prob_improved)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bin,f0_low,f0_high,f0_center,prob_improved,standard_error,count")?;
        for i in 0..self.counts.len() {
            writeln!(
                w,
                "{i},{},{},{},{},{},{}",
                self.bin_edges[i],
                self.bin_edges[i + 1],
                self.bin_centers[i],
                self.prob_improved[i],
                self.standard_error[i],
                self.counts[i]
            )?;
        }
        Ok(())
    }
}

/// Bins instances by the baseline's `F0` into equal-count bins and reports,
/// per bin, how often the regularized technique's expected distance is
/// strictly below the baseline's point distance.
pub fn prob_improvement_curve(
    records_regularized: &[FaithfulnessRecord],
    records_baseline: &[FaithfulnessRecord],
    n_bins: usize,
) -> Result<FaithfulnessCurve> {
    if n_bins == 0 {
        return Err(Error::arg("n_bins must be > 0"));
    }
    let mut pairs = Vec::with_capacity(records_baseline.len());
    for b in records_baseline {
        let r = records_regularized
            .iter()
            .find(|r| r.instance_id == b.instance_id)
            .ok_or(Error::Pairing(b.instance_id))?;
        pairs.push((b.f0, r.expected_f < b.f0));
    }
    if let Some(r) = records_regularized
        .iter()
        .find(|r| !records_baseline.iter().any(|b| b.instance_id == r.instance_id))
    {
        return Err(Error::Pairing(r.instance_id));
    }
    if pairs.is_empty() {
        return Err(Error::arg("no records to bin"));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();
    let bins = n_bins.min(n);
    let mut curve = FaithfulnessCurve {
        bin_edges: Vec::with_capacity(bins + 1),
        bin_centers: Vec::with_capacity(bins),
        prob_improved: Vec::with_capacity(bins),
        standard_error: Vec::with_capacity(bins),
        counts: Vec::with_capacity(bins),
    };
    for b in 0..bins {
        let (lo, hi) = (b * n / bins, (b + 1) * n / bins);
        let chunk = &pairs[lo..hi];
        let count = chunk.len();
        let p = chunk.iter().filter(|(_, improved)| *improved).count() as f64 / count as f64;
        curve.bin_edges.push(chunk[0].0);
        curve.bin_centers.push(chunk.iter().map(|(f, _)| f).sum::<f64>() / count as f64);
        curve.prob_improved.push(p);
        curve.standard_error.push((p * (1.0 - p) / count as f64).sqrt());
        curve.counts.push(count);
    }
    curve.bin_edges.push(pairs[n - 1].0);
    Ok(curve)
}

/// Euclidean distance between attribution vectors.
pub fn explanation_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
}

/// Natural log of the distance, floored at [`LOG_DISTANCE_FLOOR`].
pub fn log_distance(distance: f64) -> f64 {
    distance.max(LOG_DISTANCE_FLOOR).ln()
}

pub fn write_records_csv<W: Write>(records: &[FaithfulnessRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "instance_id,technique,f0,expected_f,n")?;
    for r in records {
        writeln!(w, "{},{},{},{},{}", r.instance_id, r.technique, r.f0, r.expected_f, r.n_samples)?;
    }
    Ok(())
}

/// Mean over instances with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        Self { mean: stats::mean(values), se: stats::standard_error(values) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    /// MSE between `f(x + eps)` and the label.
    pub correctness_over_noise: MeanSe,
    /// MSE between `f(x + eps)` and `f(x)`.
    pub robustness: MeanSe,
    pub expected_faithfulness: MeanSe,
    /// Per feature: sd of the attribution over hypotheticals.
    pub stability_per_feature: Vec<MeanSe>,
    /// Sum over features of the per-feature sd.
    pub stability_total: MeanSe,
}

struct InstanceMeasures {
    correctness: f64,
    robustness: f64,
    faithfulness: f64,
    stability: Vec<f64>,
}

fn model_measures<P: Predictor + ?Sized>(model: &P, hyp: &HypotheticalSet, label: f64) -> (f64, f64) {
    let fx = model.predict_point(&hyp.center);
    let n = hyp.len() as f64;
    let (mut c, mut r) = (0.0, 0.0);
    for s in hyp.samples.rows() {
        let p = model.predict_point(s);
        c += (p - label).powi(2);
        r += (p - fx).powi(2);
    }
    (c / n, r / n)
}

fn column_sds(rows: &[Vec<f64>], d: usize) -> Vec<f64> {
    (0..d).map(|j| stats::sd_sample(&rows.iter().map(|r| r[j]).collect::<Vec<_>>())).collect()
}

fn aggregate(lambda: f64, per_instance: &[InstanceMeasures], d: usize) -> SweepRow {
    let pick = |f: &dyn Fn(&InstanceMeasures) -> f64| -> MeanSe {
        MeanSe::of(&per_instance.iter().map(f).collect::<Vec<_>>())
    };
    SweepRow {
        lambda,
        correctness_over_noise: pick(&|m| m.correctness),
        robustness: pick(&|m| m.robustness),
        expected_faithfulness: pick(&|m| m.faithfulness),
        stability_per_feature: (0..d).map(|j| pick(&|m| m.stability[j])).collect(),
        stability_total: pick(&|m| m.stability.iter().sum()),
    }
}

/// Sweep settings shared by [`explainer_sweep`] and [`predictor_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub lime: LimeConfig,
    pub ig_steps: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { n_samples: 150, seed: 0, lime: LimeConfig::default(), ig_steps: 200 }
    }
}

/// Measures for the uncertainty-suppressed surrogate across `lambdas`, with
/// the predictor held fixed. Attributions use the fixed-explanation reading:
/// `w o (x0 + eps)` with `w` fitted once at `x0`.
pub fn explainer_sweep<P: Predictor + ?Sized>(
    model: &P,
    dataset: &StandardizedDataset,
    spec: &UncertaintySpec,
    lambdas: &[f64],
    config: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    if lambdas.is_empty() {
        return Err(Error::arg("lambda sweep is empty"));
    }
    check_dim(dataset.dim(), spec.dim())?;
    let d = dataset.dim();
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let per_instance: Vec<InstanceMeasures> = (0..dataset.len())
            .into_par_iter()
            .map(|i| {
                let x0 = dataset.features.row(i);
                let hyp = sample_hypotheticals(x0, spec, config.n_samples, rng::derive_seed(config.seed, 2 * i as u64 + 1))?;
                let nbhd = config.lime.neighborhood(x0, rng::derive_seed(config.seed, 2 * i as u64))?;
                let expl = fit_regularized_lime(model, &nbhd, spec, lambda)?;
                let (correctness, robustness) = model_measures(model, &hyp, dataset.labels[i]);
                let (_, faithfulness) = faithfulness_on(model, &expl, &hyp)?;
                let attrs: Vec<Vec<f64>> = hyp.samples.rows().map(|s| expl.attributions(s)).collect::<Result<_>>()?;
                Ok(InstanceMeasures { correctness, robustness, faithfulness, stability: column_sds(&attrs, d) })
            })
            .collect::<Result<_>>()?;
        out.push(aggregate(lambda, &per_instance, d));
    }
    Ok(out)
}

/// Measures for predictors trained with different penalty strengths, each
/// explained by integrated gradients recomputed at every hypothetical.
/// Expected faithfulness is measured against `reference` at the original
/// instance.
pub fn predictor_sweep(
    models: &[&MlpPredictor],
    reference: &MlpPredictor,
    dataset: &StandardizedDataset,
    spec: &UncertaintySpec,
    config: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    if models.is_empty() {
        return Err(Error::arg("predictor sweep is empty"));
    }
    let d = dataset.dim();
    let baseline = vec![0.0; d];
    let mut out = Vec::with_capacity(models.len());
    for model in models {
        check_dim(d, model.input_dim())?;
        let ig = IgSurrogate::new(model, baseline.clone(), config.ig_steps)?;
        let per_instance: Vec<InstanceMeasures> = (0..dataset.len())
            .into_par_iter()
            .map(|i| {
                let x0 = dataset.features.row(i);
                let hyp = sample_hypotheticals(x0, spec, config.n_samples, rng::derive_seed(config.seed, 2 * i as u64 + 1))?;
                let (correctness, robustness) = model_measures(*model, &hyp, dataset.labels[i]);
                let (_, faithfulness) = faithfulness_on(reference, &ig, &hyp)?;
                let attrs: Vec<Vec<f64>> = hyp.samples.rows().map(|s| ig.attributions(s)).collect::<Result<_>>()?;
                Ok(InstanceMeasures { correctness, robustness, faithfulness, stability: column_sds(&attrs, d) })
            })
            .collect::<Result<_>>()?;
        out.push(aggregate(model.regularization_lambda(), &per_instance, d));
    }
    Ok(out)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], feature_names: &[String], mut w: W) -> std::io::Result<()> {
    write!(w, "lambda,correctness_over_noise,correctness_se,robustness,robustness_se,expected_faithfulness,expected_faithfulness_se,stability_total,stability_total_se")?;
    for f in feature_names {
        write!(w, ",stability[{f}],stability_se[{f}]")?;
    }
    writeln!(w)?;
    for r in rows {
        write!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.lambda,
            r.correctness_over_noise.mean,
            r.correctness_over_noise.se,
            r.robustness.mean,
            r.robustness.se,
            r.expected_faithfulness.mean,
            r.expected_faithfulness.se,
            r.stability_total.mean,
            r.stability_total.se
        )?;
        for s in &r.stability_per_feature {
            write!(w, ",{},{}", s.mean, s.se)?;
        }
        writeln!(w)?;
    }
    Ok(())
}
