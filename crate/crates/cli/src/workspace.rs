//! Data and model locations shared by every command.

use std::path::{Path, PathBuf};

use anyhow::Context;
use uncertain_attr::data::{
    fit_standardize, ingest, make_uncertainty_spec, split, StandardizedDataset, UncertaintyLevel, UncertaintySpec,
};
use uncertain_attr::predictor::MlpPredictor;

use crate::config::RunConfig;
use crate::UsageError;

pub struct Workspace {
    pub config: RunConfig,
    pub train: StandardizedDataset,
    pub test: StandardizedDataset,
}

impl Workspace {
    /// Reads, splits and standardizes the dataset named by `config`.
    pub fn prepare(config: RunConfig) -> anyhow::Result<Self> {
        config.validate()?;
        let raw = ingest(&config.dataset, &config.features, &config.label, config.delimiter_byte())
            .with_context(|| format!("loading {}", config.dataset.display()))?;
        let (train_raw, test_raw) = split(&raw, config.test_fraction, config.split_seed)?;
        if test_raw.is_empty() {
            return Err(UsageError(format!(
                "test split is empty ({} rows, test_fraction {})",
                raw.len(),
                config.test_fraction
            ))
            .into());
        }
        let (scaler, train) = fit_standardize(&train_raw)?;
        let test = scaler.transform(&test_raw)?;
        Ok(Self { config, train, test })
    }

    pub fn out(&self) -> &Path {
        &self.config.output_dir
    }

    pub fn spec(&self, level: UncertaintyLevel) -> anyhow::Result<UncertaintySpec> {
        Ok(make_uncertainty_spec(level, &self.config.uncertainty.features, &self.train)?)
    }

    pub fn display_names(&self) -> Vec<String> {
        self.train.feature_names.iter().map(|f| self.config.display_name(f)).collect()
    }

    /// The first `validation_size` training rows.
    pub fn validation(&self) -> StandardizedDataset {
        let n = self.config.explainer.validation_size.min(self.train.len());
        self.train.subset(&(0..n).collect::<Vec<_>>())
    }

    pub fn models_dir(&self) -> PathBuf {
        self.out().join("models")
    }

    pub fn nn_path(&self) -> PathBuf {
        self.models_dir().join("nn.json")
    }

    pub fn regnn_path(&self, level: UncertaintyLevel, lambda: f64) -> PathBuf {
        self.models_dir().join(format!("regnn_{level}_lambda{lambda}.json"))
    }

    pub fn load_model(&self, path: &Path) -> anyhow::Result<MlpPredictor> {
        let text = std::fs::read_to_string(path).map_err(|_| {
            UsageError(format!("model {} not found; run `train` with the same config first", path.display()))
        })?;
        let model = MlpPredictor::from_json(&text).with_context(|| format!("reading {}", path.display()))?;
        if model.input_dim() != self.train.dim() {
            return Err(UsageError(format!(
                "model {} expects {} features, config selects {}",
                path.display(),
                model.input_dim(),
                self.train.dim()
            ))
            .into());
        }
        if model.scaler().is_some_and(|s| s != &self.train.scaler) {
            return Err(UsageError(format!(
                "model {} was trained on a different split or feature set",
                path.display()
            ))
            .into());
        }
        Ok(model)
    }

    pub fn levels_or_default(&self, levels: Option<Vec<UncertaintyLevel>>) -> Vec<UncertaintyLevel> {
        levels.unwrap_or_else(|| vec![self.config.uncertainty.level])
    }
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text)
}

/// Renders CSV into memory and writes it in one go.
pub fn write_csv(path: &Path, render: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    render(&mut buf)?;
    write_file(path, buf)
}
