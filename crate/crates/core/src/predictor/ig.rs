use serde::{Deserialize, Serialize};

use super::{MlpPredictor, Tape};
use crate::error::{check_dim, check_finite, Error, Result};

/// Integrated-gradients attribution of one prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgAttribution {
    pub attributions: Vec<f64>,
    pub baseline_point: Vec<f64>,
    /// `sum(attributions) - (f(x) - f(baseline_point))`
    pub completeness_gap: f64,
}

impl IgAttribution {
    pub fn total(&self) -> f64 {
        self.attributions.iter().sum()
    }
}

/// Midpoint Riemann sum of the gradient along the straight path from
/// `baseline_point` to `x`, scaled by `x - baseline_point`.
pub fn integrated_gradients(
    model: &MlpPredictor,
    x: &[f64],
    baseline_point: &[f64],
    steps: usize,
) -> Result<IgAttribution> {
    let d = model.input_dim();
    check_dim(d, x.len())?;
    check_dim(d, baseline_point.len())?;
    check_finite("x", x)?;
    check_finite("baseline_point", baseline_point)?;
    if steps == 0 {
        return Err(Error::arg("integrated gradients needs steps >= 1"));
    }
    let mut tape = Tape::new(model);
    let path_grad = average_path_gradient(model, &mut tape, x, baseline_point, steps);
    let attributions: Vec<f64> = path_grad
        .iter()
        .zip(x.iter().zip(baseline_point))
        .map(|(g, (xi, bi))| g * (xi - bi))
        .collect();
    let delta = model.forward(x) - model.forward(baseline_point);
    let completeness_gap = attributions.iter().sum::<f64>() - delta;
    Ok(IgAttribution { attributions, baseline_point: baseline_point.to_vec(), completeness_gap })
}

/// `(1/steps) * sum_k grad f(b + (k + 1/2)/steps * (x - b))`
pub(crate) fn average_path_gradient(
    model: &MlpPredictor,
    tape: &mut Tape,
    x: &[f64],
    baseline_point: &[f64],
    steps: usize,
) -> Vec<f64> {
    let d = x.len();
    let mut acc = vec![0.0; d];
    let mut z = vec![0.0; d];
    for k in 0..steps {
        let alpha = (k as f64 + 0.5) / steps as f64;
        for i in 0..d {
            z[i] = baseline_point[i] + alpha * (x[i] - baseline_point[i]);
        }
        tape.forward(model, &z, None);
        for (a, g) in acc.iter_mut().zip(tape.input_gradient(model)) {
            *a += g;
        }
    }
    let inv = 1.0 / steps as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    acc
}
