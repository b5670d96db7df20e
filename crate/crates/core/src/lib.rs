pub mod data;
pub mod error;
pub mod explainer;
pub mod matrix;
pub mod metrics;
pub mod predictor;
pub mod propagate;
pub mod rng;
pub mod simulation;
pub mod stimuli;
pub mod stats;

pub use error::{Error, Result};
