//! Mini-batch gradient descent for the plain squared-error objective and for
//! the objective with an integrated-gradients uncertainty penalty,
//!
//! ```text
//! mean_i (f(x_i) - y_i)^2 + lambda * mean_i || sigma o IG(x_i, f) ||^2
//! ```
//!
//! The penalty gradient differentiates through the Riemann sum that defines
//! IG. For one sample, with `v_d = 2 sigma_d^2 IG_d (x_d - b_d) / steps`, the
//! penalty gradient is `sum_k d/dθ [v . grad_x f(z_k)]`, a directional
//! derivative of the input gradient, obtained by pushing the tangent `v`
//! forward through the network and back-propagating the tangent output.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ig::average_path_gradient;
use super::{Layer, MlpPredictor, Tape};
use crate::data::{StandardizedDataset, UncertaintySpec};
use crate::error::{check_dim, Error, Result};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Riemann steps for the IG inside the training penalty.
    pub ig_steps: usize,
    pub lambda: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![32, 16],
            learning_rate: 1e-2,
            epochs: 300,
            batch_size: 64,
            seed: 0,
            ig_steps: 50,
            lambda: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.contains(&0) {
            return Err(Error::arg("hidden layer sizes must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::arg("learning_rate must be > 0"));
        }
        if self.epochs == 0 {
            return Err(Error::arg("epochs must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::arg("batch_size must be > 0"));
        }
        if self.ig_steps == 0 {
            return Err(Error::arg("ig_steps must be > 0"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::arg("lambda must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Objective averaged over the epoch's batches (weighted by batch size).
    pub loss: f64,
    pub data_loss: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGrad {
    /// `data_loss + lambda * penalty`
    pub loss: f64,
    pub data_loss: f64,
    /// Batch mean of `|| sigma o IG ||^2`, before multiplying by lambda.
    pub penalty: f64,
    pub grad: Vec<f64>,
}

/// Mean-reduced objective and its exact parameter gradient over `rows` of
/// the dataset. `lambda = 0` (or an all-zero sigma) gives plain MSE.
pub fn loss_and_grad(
    model: &MlpPredictor,
    features: &Matrix,
    labels: &[f64],
    rows: &[usize],
    spec: &UncertaintySpec,
    lambda: f64,
    ig_steps: usize,
) -> Result<LossAndGrad> {
    let d = model.input_dim();
    check_dim(d, features.ncols())?;
    check_dim(features.nrows(), labels.len())?;
    check_dim(d, spec.dim())?;
    if rows.is_empty() {
        return Err(Error::arg("batch is empty"));
    }
    if ig_steps == 0 {
        return Err(Error::arg("ig_steps must be > 0"));
    }
    let penalized = lambda > 0.0 && !spec.is_certain();
    let baseline = vec![0.0; d];
    let n_params = model.param_count();

    let per_sample: Vec<(f64, f64, Vec<f64>)> = rows
        .par_iter()
        .map_init(
            || Tape::new(model),
            |tape, &i| {
                let x = features.row(i);
                let mut grad = vec![0.0; n_params];
                tape.forward(model, x, None);
                let resid = tape.output() - labels[i];
                tape.backward_params(model, 2.0 * resid, 0.0, &mut grad);
                let mut pen = 0.0;
                if penalized {
                    pen = penalty_grad(model, tape, x, &baseline, spec, lambda, ig_steps, &mut grad);
                }
                (resid * resid, pen, grad)
            },
        )
        .collect();

    let inv = 1.0 / rows.len() as f64;
    let mut grad = vec![0.0; n_params];
    let mut data_loss = 0.0;
    let mut penalty = 0.0;
    for (sq, pen, g) in &per_sample {
        data_loss += sq;
        penalty += pen;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    grad.iter_mut().for_each(|g| *g *= inv);
    data_loss *= inv;
    penalty *= inv;
    Ok(LossAndGrad { loss: data_loss + lambda * penalty, data_loss, penalty, grad })
}

/// Adds `lambda * d/dθ ||sigma o IG(x)||^2` to `grad`, returns the unscaled penalty.
#[allow(clippy::too_many_arguments)]
fn penalty_grad(
    model: &MlpPredictor,
    tape: &mut Tape,
    x: &[f64],
    baseline: &[f64],
    spec: &UncertaintySpec,
    lambda: f64,
    steps: usize,
    grad: &mut [f64],
) -> f64 {
    let d = x.len();
    let path_grad = average_path_gradient(model, tape, x, baseline, steps);
    let mut pen = 0.0;
    let mut direction = vec![0.0; d];
    for j in 0..d {
        let s2 = spec.sigma[j] * spec.sigma[j];
        let span = x[j] - baseline[j];
        let ig = path_grad[j] * span;
        pen += s2 * ig * ig;
        direction[j] = lambda * 2.0 * s2 * ig * span / steps as f64;
    }
    if direction.iter().all(|v| *v == 0.0) {
        return pen;
    }
    let mut z = vec![0.0; d];
    for k in 0..steps {
        let alpha = (k as f64 + 0.5) / steps as f64;
        for j in 0..d {
            z[j] = baseline[j] + alpha * (x[j] - baseline[j]);
        }
        tape.forward(model, &z, Some(&direction));
        tape.backward_params(model, 0.0, 1.0, grad);
    }
    pen
}

fn init_network(input_dim: usize, config: &TrainConfig, label_mean: f64) -> Result<MlpPredictor> {
    let mut sizes = vec![input_dim];
    sizes.extend_from_slice(&config.hidden_sizes);
    sizes.push(1);
    let mut r = rng::seeded(config.seed);
    let mut layers = Vec::with_capacity(sizes.len() - 1);
    for w in sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        // Glorot uniform
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out).map(|_| r.random_range(-limit..limit)).collect();
        layers.push(Layer::new(Matrix::from_vec(fan_out, fan_in, data)?, vec![0.0; fan_out])?);
    }
    if let Some(last) = layers.last_mut() {
        last.biases[0] = label_mean;
    }
    MlpPredictor::from_layers(layers)
}

fn run_training(
    train: &StandardizedDataset,
    spec: &UncertaintySpec,
    config: &TrainConfig,
) -> Result<(MlpPredictor, Vec<EpochStats>)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::arg("training set is empty"));
    }
    check_dim(train.dim(), spec.dim())?;
    let label_mean = train.labels.iter().sum::<f64>() / train.len() as f64;
    let mut model = init_network(train.dim(), config, label_mean)?;
    model.set_lambda(config.lambda);
    model.scaler = Some(train.scaler.clone());

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng::stream(config.seed, epoch as u64));
        let (mut loss, mut data_loss, mut penalty) = (0.0, 0.0, 0.0);
        for batch in order.chunks(config.batch_size) {
            let lg = loss_and_grad(
                &model,
                &train.features,
                &train.labels,
                batch,
                spec,
                config.lambda,
                config.ig_steps,
            )?;
            if !lg.loss.is_finite() || lg.grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            model.apply_update(&lg.grad, config.learning_rate);
            let w = batch.len() as f64;
            loss += lg.loss * w;
            data_loss += lg.data_loss * w;
            penalty += lg.penalty * w;
        }
        let n = train.len() as f64;
        history.push(EpochStats { epoch, loss: loss / n, data_loss: data_loss / n, penalty: penalty / n });
    }
    if model.params().iter().any(|p| !p.is_finite()) {
        return Err(Error::Diverged { epoch: config.epochs.saturating_sub(1) });
    }
    Ok((model, history))
}

/// Baseline predictor: squared error only. `config.lambda` must be 0.
pub fn train_mlp(
    train: &StandardizedDataset,
    config: &TrainConfig,
) -> Result<(MlpPredictor, Vec<EpochStats>)> {
    if config.lambda != 0.0 {
        return Err(Error::arg("train_mlp expects lambda = 0; use train_regularized_mlp"));
    }
    run_training(train, &UncertaintySpec::certain(train.dim()), config)
}

/// Predictor trained with the IG attribution-uncertainty penalty. `config.lambda` must be > 0.
pub fn train_regularized_mlp(
    train: &StandardizedDataset,
    spec: &UncertaintySpec,
    config: &TrainConfig,
) -> Result<(MlpPredictor, Vec<EpochStats>)> {
    if !(config.lambda > 0.0) {
        return Err(Error::arg("train_regularized_mlp expects lambda > 0"));
    }
    run_training(train, spec, config)
}
