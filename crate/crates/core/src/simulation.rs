//! End-to-end faithfulness simulation over a test set: baseline and
//! suppressed surrogates of the baseline network, integrated gradients of the
//! baseline and the regularized network, their faithfulness records,
//! improvement curves and pairwise explanation distances.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{StandardizedDataset, UncertaintySpec};
use crate::error::{check_dim, Error, Result};
use crate::explainer::{fit_lime, fit_regularized_lime, LimeConfig};
use crate::metrics::{
    explanation_distance, faithfulness_on, prob_improvement_curve, FaithfulnessCurve, FaithfulnessRecord,
    IgSurrogate, Technique, DEFAULT_BINS,
};
use crate::predictor::MlpPredictor;
use crate::propagate::{sample_hypotheticals, DEFAULT_METRIC_SAMPLES};
use crate::rng;
use crate::stats;

/// Candidate strengths for the suppressed surrogate when none is fixed.
pub const LAMBDA_CANDIDATES: [f64; 3] = [0.1, 1.0, 10.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    /// Hypotheticals per instance.
    pub n_samples: usize,
    pub seed: u64,
    pub lime: LimeConfig,
    pub ig_steps: usize,
    pub n_bins: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { n_samples: DEFAULT_METRIC_SAMPLES, seed: 0, lime: LimeConfig::default(), ig_steps: 200, n_bins: DEFAULT_BINS }
    }
}

impl SimulationConfig {
    fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::arg("simulation needs at least 2 hypotheticals per instance"));
        }
        if self.ig_steps == 0 || self.n_bins == 0 {
            return Err(Error::arg("ig_steps and n_bins must be > 0"));
        }
        Ok(())
    }

    /// Neighborhood and hypothetical seeds of instance `i`.
    pub fn instance_seeds(&self, i: usize) -> (u64, u64) {
        (rng::derive_seed(self.seed, 2 * i as u64), rng::derive_seed(self.seed, 2 * i as u64 + 1))
    }
}

/// Attributions at the instance itself, one vector per technique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceAttributions {
    pub instance_id: usize,
    pub lime: Vec<f64>,
    pub reg_lime: Vec<f64>,
    pub ig_nn: Vec<f64>,
    pub ig_regnn: Vec<f64>,
}

impl InstanceAttributions {
    pub fn get(&self, t: Technique) -> &[f64] {
        match t {
            Technique::Lime => &self.lime,
            Technique::RegLime => &self.reg_lime,
            Technique::IgNn => &self.ig_nn,
            Technique::IgRegnn => &self.ig_regnn,
        }
    }
}

/// Per-instance Euclidean distances between explanation pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub instance_id: usize,
    pub reg_lime_vs_ig_regnn: f64,
    pub reg_lime_vs_lime: f64,
    pub ig_regnn_vs_ig_nn: f64,
    pub lime_vs_ig_nn: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMedians {
    pub reg_lime_vs_ig_regnn: f64,
    pub reg_lime_vs_lime: f64,
    pub ig_regnn_vs_ig_nn: f64,
    pub lime_vs_ig_nn: f64,
}

impl DistanceMedians {
    pub fn of(rows: &[DistanceRow]) -> Self {
        let med = |f: fn(&DistanceRow) -> f64| stats::median(&rows.iter().map(f).collect::<Vec<_>>());
        Self {
            reg_lime_vs_ig_regnn: med(|r| r.reg_lime_vs_ig_regnn),
            reg_lime_vs_lime: med(|r| r.reg_lime_vs_lime),
            ig_regnn_vs_ig_nn: med(|r| r.ig_regnn_vs_ig_nn),
            lime_vs_ig_nn: med(|r| r.lime_vs_ig_nn),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub reg_lime_lambda: f64,
    pub regnn_lambda: f64,
    /// Four records per instance, in instance order.
    pub records: Vec<FaithfulnessRecord>,
    pub attributions: Vec<InstanceAttributions>,
    pub distances: Vec<DistanceRow>,
    pub distance_medians: DistanceMedians,
    /// Suppressed surrogate against the baseline surrogate.
    pub explainer_curve: FaithfulnessCurve,
    /// Regularized network against the baseline network, both read through
    /// integrated gradients.
    pub predictor_curve: FaithfulnessCurve,
}

impl SimulationResult {
    pub fn records_for(&self, t: Technique) -> Vec<FaithfulnessRecord> {
        self.records.iter().filter(|r| r.technique == t).cloned().collect()
    }

    /// `(min, max)` of `F0` over the instances for one technique.
    pub fn f0_range(&self, t: Technique) -> (f64, f64) {
        self.records
            .iter()
            .filter(|r| r.technique == t)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.f0), hi.max(r.f0)))
    }
}

struct InstanceOutcome {
    records: [FaithfulnessRecord; 4],
    attributions: InstanceAttributions,
}

#[allow(clippy::too_many_arguments)]
fn simulate_instance(
    nn: &MlpPredictor,
    ig_nn: &IgSurrogate<'_>,
    ig_regnn: &IgSurrogate<'_>,
    x0: &[f64],
    id: usize,
    spec: &UncertaintySpec,
    lambda: f64,
    config: &SimulationConfig,
) -> Result<InstanceOutcome> {
    let (nbhd_seed, hyp_seed) = config.instance_seeds(id);
    let nbhd = config.lime.neighborhood(x0, nbhd_seed)?;
    let lime = fit_lime(nn, &nbhd, config.lime.baseline_lambda)?;
    let reg_lime = fit_regularized_lime(nn, &nbhd, spec, lambda)?;
    let hyp = sample_hypotheticals(x0, spec, config.n_samples, hyp_seed)?;
    let record = |technique, (f0, expected_f): (f64, f64)| FaithfulnessRecord {
        instance_id: id,
        technique,
        f0,
        expected_f,
        n_samples: config.n_samples,
    };
    let records = [
        record(Technique::Lime, faithfulness_on(nn, &lime, &hyp)?),
        record(Technique::RegLime, faithfulness_on(nn, &reg_lime, &hyp)?),
        record(Technique::IgNn, faithfulness_on(nn, ig_nn, &hyp)?),
        record(Technique::IgRegnn, faithfulness_on(nn, ig_regnn, &hyp)?),
    ];
    let attributions = InstanceAttributions {
        instance_id: id,
        lime: lime.attributions(x0)?,
        reg_lime: reg_lime.attributions(x0)?,
        ig_nn: ig_nn.attributions(x0)?,
        ig_regnn: ig_regnn.attributions(x0)?,
    };
    Ok(InstanceOutcome { records, attributions })
}

/// Runs all four techniques on every instance of `test`.
///
/// Every faithfulness distance is measured against the baseline network at
/// the original instance; the suppressed surrogate uses `reg_lime_lambda`.
pub fn run_simulation(
    nn: &MlpPredictor,
    regnn: &MlpPredictor,
    test: &StandardizedDataset,
    spec: &UncertaintySpec,
    reg_lime_lambda: f64,
    config: &SimulationConfig,
) -> Result<SimulationResult> {
    config.validate()?;
    if test.is_empty() {
        return Err(Error::arg("test set is empty"));
    }
    check_dim(test.dim(), spec.dim())?;
    check_dim(test.dim(), nn.input_dim())?;
    check_dim(test.dim(), regnn.input_dim())?;
    let baseline = vec![0.0; test.dim()];
    let ig_nn = IgSurrogate::new(nn, baseline.clone(), config.ig_steps)?;
    let ig_regnn = IgSurrogate::new(regnn, baseline, config.ig_steps)?;

    let outcomes: Vec<InstanceOutcome> = (0..test.len())
        .into_par_iter()
        .map(|i| simulate_instance(nn, &ig_nn, &ig_regnn, test.features.row(i), i, spec, reg_lime_lambda, config))
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(4 * outcomes.len());
    let mut attributions = Vec::with_capacity(outcomes.len());
    let mut distances = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let a = &o.attributions;
        distances.push(DistanceRow {
            instance_id: a.instance_id,
            reg_lime_vs_ig_regnn: explanation_distance(&a.reg_lime, &a.ig_regnn)?,
            reg_lime_vs_lime: explanation_distance(&a.reg_lime, &a.lime)?,
            ig_regnn_vs_ig_nn: explanation_distance(&a.ig_regnn, &a.ig_nn)?,
            lime_vs_ig_nn: explanation_distance(&a.lime, &a.ig_nn)?,
        });
        records.extend(o.records);
        attributions.push(o.attributions);
    }
    let pick = |t: Technique| records.iter().filter(|r| r.technique == t).cloned().collect::<Vec<_>>();
    let explainer_curve = prob_improvement_curve(&pick(Technique::RegLime), &pick(Technique::Lime), config.n_bins)?;
    let predictor_curve = prob_improvement_curve(&pick(Technique::IgRegnn), &pick(Technique::IgNn), config.n_bins)?;
    Ok(SimulationResult {
        reg_lime_lambda,
        regnn_lambda: regnn.regularization_lambda(),
        distance_medians: DistanceMedians::of(&distances),
        records,
        attributions,
        distances,
        explainer_curve,
        predictor_curve,
    })
}

/// Mean expected faithfulness of the suppressed surrogate for each
/// candidate, and the candidate that minimizes it (first one on ties).
pub fn select_suppression_lambda(
    nn: &MlpPredictor,
    validation: &StandardizedDataset,
    spec: &UncertaintySpec,
    candidates: &[f64],
    config: &SimulationConfig,
) -> Result<(f64, Vec<(f64, f64)>)> {
    config.validate()?;
    if candidates.is_empty() {
        return Err(Error::arg("no candidate lambdas"));
    }
    if validation.is_empty() {
        return Err(Error::arg("validation slice is empty"));
    }
    check_dim(validation.dim(), spec.dim())?;
    let mut scores = Vec::with_capacity(candidates.len());
    for &lambda in candidates {
        let ef: Vec<f64> = (0..validation.len())
            .into_par_iter()
            .map(|i| {
                let x0 = validation.features.row(i);
                let (nbhd_seed, hyp_seed) = config.instance_seeds(i);
                let nbhd = config.lime.neighborhood(x0, nbhd_seed)?;
                let expl = fit_regularized_lime(nn, &nbhd, spec, lambda)?;
                let hyp = sample_hypotheticals(x0, spec, config.n_samples, hyp_seed)?;
                Ok(faithfulness_on(nn, &expl, &hyp)?.1)
            })
            .collect::<Result<_>>()?;
        scores.push((lambda, stats::mean(&ef)));
    }
    let best = scores.iter().fold(scores[0], |best, &s| if s.1 < best.1 { s } else { best });
    Ok((best.0, scores))
}

pub fn write_distances_csv<W: Write>(rows: &[DistanceRow], mut w: W) -> std::io::Result<()> {
    use crate::metrics::log_distance;
    writeln!(
        w,
        "instance_id,reg_lime_vs_ig_regnn,reg_lime_vs_lime,ig_regnn_vs_ig_nn,lime_vs_ig_nn,\
         log_reg_lime_vs_ig_regnn,log_reg_lime_vs_lime,log_ig_regnn_vs_ig_nn,log_lime_vs_ig_nn"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.instance_id,
            r.reg_lime_vs_ig_regnn,
            r.reg_lime_vs_lime,
            r.ig_regnn_vs_ig_nn,
            r.lime_vs_ig_nn,
            log_distance(r.reg_lime_vs_ig_regnn),
            log_distance(r.reg_lime_vs_lime),
            log_distance(r.ig_regnn_vs_ig_nn),
            log_distance(r.lime_vs_ig_nn)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::StandardizedDataset;
    use crate::matrix::Matrix;
    use crate::predictor::tests::random_net;

    fn tiny_set(n: usize, d: usize) -> StandardizedDataset {
        let mut r = rng::seeded(3);
        let data: Vec<f64> = (0..n * d).map(|_| rand::Rng::random_range(&mut r, -1.5..1.5)).collect();
        let features = if n == 0 { Matrix::zeros(0, d) } else { Matrix::from_vec(n, d, data).unwrap() };
        let names: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
        StandardizedDataset::from_standardized(features, vec![0.0; n], names).unwrap()
    }

    fn quick() -> SimulationConfig {
        SimulationConfig {
            n_samples: 20,
            seed: 9,
            lime: LimeConfig { n_samples: 200, ..LimeConfig::default() },
            ig_steps: 40,
            n_bins: 3,
        }
    }

    #[test]
    fn four_records_per_instance_and_deterministic() {
        let nn = random_net(&[3, 5, 1], 1);
        let regnn = random_net(&[3, 5, 1], 2);
        let test = tiny_set(7, 3);
        let spec = UncertaintySpec::new(vec![0.5, 0.0, 0.3]).unwrap();
        let a = run_simulation(&nn, &regnn, &test, &spec, 1.0, &quick()).unwrap();
        let b = run_simulation(&nn, &regnn, &test, &spec, 1.0, &quick()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 28);
        assert_eq!(a.explainer_curve.counts.iter().sum::<usize>(), 7);
        for r in &a.records {
            assert!(r.f0 >= 0.0 && r.expected_f >= 0.0);
        }
        // IG of the reference network is complete up to the Riemann error
        for r in a.records_for(Technique::IgNn) {
            assert!(r.f0 < 1e-6);
        }
    }

    #[test]
    fn certain_spec_makes_suppression_inert() {
        let nn = random_net(&[2, 4, 1], 5);
        let test = tiny_set(5, 2);
        let spec = UncertaintySpec::certain(2);
        let res = run_simulation(&nn, &nn, &test, &spec, 10.0, &quick()).unwrap();
        for r in &res.records {
            assert_eq!(r.f0, r.expected_f);
        }
        for d in &res.distances {
            assert!(d.reg_lime_vs_lime < 1e-6);
            assert_eq!(d.ig_regnn_vs_ig_nn, 0.0);
        }
    }

    #[test]
    fn selection_returns_a_candidate() {
        let nn = random_net(&[2, 4, 1], 5);
        let val = tiny_set(6, 2);
        let spec = UncertaintySpec::new(vec![1.0, 0.0]).unwrap();
        let (best, scores) = select_suppression_lambda(&nn, &val, &spec, &LAMBDA_CANDIDATES, &quick()).unwrap();
        assert_eq!(scores.len(), 3);
        let min = scores.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        assert!(scores.iter().any(|s| s.0 == best && s.1 == min));
    }

    #[test]
    fn empty_test_set_is_rejected() {
        let nn = random_net(&[2, 4, 1], 5);
        let test = tiny_set(0, 2);
        let spec = UncertaintySpec::certain(2);
        assert!(run_simulation(&nn, &nn, &test, &spec, 1.0, &quick()).is_err());
    }
}
