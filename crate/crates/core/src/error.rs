use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("schema error: column `{0}` not found")]
    MissingColumn(String),

    #[error("parse error at data row {row}, column `{column}`: `{value}` is not a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("degenerate feature `{0}`: zero variance on the fitting split")]
    DegenerateFeature(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("propagation error at sample {sample}: {reason}")]
    Propagation { sample: usize, reason: String },

    #[error("pairing error: instance {0} has no counterpart")]
    Pairing(usize),

    #[error("cannot balance selection: need {needed_accept} accept / {needed_reject} reject, \
             achievable at most {available_accept} accept / {available_reject} reject")]
    Balance {
        needed_accept: usize,
        needed_reject: usize,
        available_accept: usize,
        available_reject: usize,
    },
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension { expected, actual })
    }
}

pub(crate) fn check_finite(what: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::arg(format!("{what}[{i}] is not finite"))),
    }
}
