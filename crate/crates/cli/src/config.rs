use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::bail;
use serde::{Deserialize, Serialize};
use uncertain_attr::data::UncertaintyLevel;
use uncertain_attr::explainer::LimeConfig;
use uncertain_attr::predictor::TrainConfig;
use uncertain_attr::simulation::LAMBDA_CANDIDATES;
use uncertain_attr::stimuli::StimulusConfig;

use crate::UsageError;

/// Everything a run depends on. Loaded from one JSON file; missing fields
/// take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    /// Feature columns; empty means every column except the label.
    pub features: Vec<String>,
    pub label: String,
    pub delimiter: char,
    pub test_fraction: f64,
    pub split_seed: u64,
    /// Master seed for training, explanation, simulation and stimuli.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub uncertainty: UncertaintyConfig,
    pub model: ModelConfig,
    pub explainer: ExplainerConfig,
    pub simulation: SimulationSettings,
    pub display: DisplayConfig,
    pub stimuli: StimuliSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UncertaintyConfig {
    pub level: UncertaintyLevel,
    pub features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub ig_steps: usize,
    /// Penalty of the regularized network used by `explain` and `simulate`.
    pub regnn_lambda: f64,
    /// Additional penalties trained by `train --sweep`.
    pub sweep_lambdas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainerConfig {
    pub n_samples: usize,
    pub kernel_width: Option<f64>,
    pub baseline_lambda: f64,
    /// Fixed suppression strength; `null` selects one from `lambda_candidates`
    /// on a validation slice of the training split.
    pub suppress_lambda: Option<f64>,
    pub lambda_candidates: Vec<f64>,
    pub validation_size: usize,
    /// Strengths compared by `simulate --sweep`.
    pub sweep_lambdas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    pub n_samples: usize,
    pub ig_steps: usize,
    pub n_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisplayConfig {
    pub n_samples: usize,
    pub grid_size: usize,
    /// Column name to label shown in figures and stimulus files.
    pub names: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StimuliSettings {
    pub k_per_instance: usize,
    pub n_hypotheticals: usize,
    pub window: (f64, f64),
    pub threshold: f64,
    pub n_clusters: usize,
    pub n_total: usize,
    pub n_practice: usize,
    /// `null` uses the explainer's suppression strength.
    pub suppress_lambda: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let strings = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        Self {
            dataset: PathBuf::from("data/winequality-red.csv"),
            features: strings(&["alcohol", "pH", "total sulfur dioxide", "sulphates", "volatile acidity"]),
            label: "quality".into(),
            delimiter: ',',
            test_fraction: 0.2,
            split_seed: 7,
            seed: 0,
            output_dir: PathBuf::from("out"),
            uncertainty: UncertaintyConfig::default(),
            model: ModelConfig::default(),
            explainer: ExplainerConfig::default(),
            simulation: SimulationSettings::default(),
            display: DisplayConfig::default(),
            stimuli: StimuliSettings::default(),
        }
    }
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        Self { level: UncertaintyLevel::High, features: vec!["alcohol".into(), "volatile acidity".into()] }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            hidden_sizes: t.hidden_sizes,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            ig_steps: t.ig_steps,
            regnn_lambda: 1.0,
            sweep_lambdas: vec![0.1],
        }
    }
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        let l = LimeConfig::default();
        Self {
            n_samples: l.n_samples,
            kernel_width: l.kernel_width,
            baseline_lambda: l.baseline_lambda,
            suppress_lambda: None,
            lambda_candidates: LAMBDA_CANDIDATES.to_vec(),
            validation_size: 200,
            sweep_lambdas: vec![0.0, 0.1, 1.0, 10.0],
        }
    }
}

impl Default for SimulationSettings {
    fn default() -> Self {
        let s = uncertain_attr::simulation::SimulationConfig::default();
        Self { n_samples: s.n_samples, ig_steps: s.ig_steps, n_bins: s.n_bins }
    }
}

impl Default for DisplayConfig {
    fn default() -> Self {
        let names = [("volatile acidity", "Vinegar Taint"), ("total sulfur dioxide", "SO2")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self { n_samples: 1000, grid_size: 64, names }
    }
}

impl Default for StimuliSettings {
    fn default() -> Self {
        let s = StimulusConfig::default();
        Self {
            k_per_instance: s.k_per_instance,
            n_hypotheticals: s.n_hypotheticals,
            window: s.window,
            threshold: s.threshold,
            n_clusters: s.n_clusters,
            n_total: s.n_total,
            n_practice: s.n_practice,
            suppress_lambda: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let config = serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let usage = |msg: String| -> anyhow::Result<()> { Err(UsageError(msg).into()) };
        if !self.dataset.is_file() {
            return usage(format!("dataset not found: {}", self.dataset.display()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return usage(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction));
        }
        if !self.delimiter.is_ascii() {
            return usage(format!("delimiter must be a single ASCII character, got `{}`", self.delimiter));
        }
        for f in &self.uncertainty.features {
            if !self.features.is_empty() && !self.features.contains(f) {
                return usage(format!("uncertain feature `{f}` is not among the selected features"));
            }
        }
        let m = &self.model;
        if m.regnn_lambda <= 0.0 || m.sweep_lambdas.iter().any(|&l| l <= 0.0) {
            return usage("regularized network penalties must be > 0".into());
        }
        if self.explainer.lambda_candidates.is_empty() && self.explainer.suppress_lambda.is_none() {
            return usage("set explainer.suppress_lambda or give lambda_candidates".into());
        }
        if self.stimuli.n_practice > self.stimuli.n_total {
            return usage("stimuli.n_practice exceeds stimuli.n_total".into());
        }
        Ok(())
    }

    pub fn delimiter_byte(&self) -> u8 {
        self.delimiter as u8
    }

    pub fn train_config(&self, lambda: f64) -> TrainConfig {
        TrainConfig {
            hidden_sizes: self.model.hidden_sizes.clone(),
            learning_rate: self.model.learning_rate,
            epochs: self.model.epochs,
            batch_size: self.model.batch_size,
            seed: uncertain_attr::rng::derive_seed(self.seed, TRAIN_STREAM),
            ig_steps: self.model.ig_steps,
            lambda,
        }
    }

    pub fn lime(&self) -> LimeConfig {
        LimeConfig {
            n_samples: self.explainer.n_samples,
            kernel_width: self.explainer.kernel_width,
            baseline_lambda: self.explainer.baseline_lambda,
        }
    }

    /// Name shown for a column.
    pub fn display_name(&self, column: &str) -> String {
        self.display.names.get(column).cloned().unwrap_or_else(|| column.to_string())
    }

    pub fn stage_seed(&self, stream: u64) -> u64 {
        uncertain_attr::rng::derive_seed(self.seed, stream)
    }
}

pub const TRAIN_STREAM: u64 = 1;
pub const EXPLAIN_STREAM: u64 = 2;
pub const SIMULATE_STREAM: u64 = 3;
pub const STIMULI_STREAM: u64 = 4;
pub const SWEEP_STREAM: u64 = 5;

/// Parses `high,medium,low`.
pub fn parse_levels(s: &str) -> anyhow::Result<Vec<UncertaintyLevel>> {
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let level: UncertaintyLevel =
            part.parse().map_err(|e: uncertain_attr::Error| UsageError(e.to_string()))?;
        if !out.contains(&level) {
            out.push(level);
        }
    }
    if out.is_empty() {
        bail!(UsageError("no uncertainty level given".into()));
    }
    Ok(out)
}
