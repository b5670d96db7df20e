//! Local linear surrogates fitted by kernel-weighted ridge regression.
//!
//! The baseline surrogate penalizes `lambda * ||w||^2`; the uncertainty-aware
//! one penalizes `lambda * ||sigma o w||^2`, so weights of noisy features are
//! shrunk and the fit re-attributes their share to certain features. Both are
//! solved in closed form with an unpenalized intercept.
//!
//! The data term is the kernel-weighted *mean* of squared residuals, so the
//! penalty strength does not depend on the neighborhood size.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::UncertaintySpec;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::matrix::Matrix;
use crate::predictor::{dot, Predictor};
use crate::rng;

pub const JITTER: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub points: Matrix,
    pub kernel_weights: Vec<f64>,
    pub center: Vec<f64>,
    pub seed: u64,
}

/// Default kernel width `0.75 * sqrt(D)`.
pub fn default_kernel_width(dim: usize) -> f64 {
    0.75 * (dim as f64).sqrt()
}

pub fn kernel_weight(distance_sq: f64, kernel_width: f64) -> f64 {
    (-distance_sq / (kernel_width * kernel_width)).exp()
}

/// Draws `n` points from `center + N(0, I)` and weights them with an
/// exponential kernel on squared distance.
pub fn sample_neighborhood(center: &[f64], n: usize, seed: u64, kernel_width: f64) -> Result<Neighborhood> {
    let d = center.len();
    check_finite("center", center)?;
    if n < d + 2 {
        return Err(Error::arg(format!("neighborhood needs at least {} samples, got {n}", d + 2)));
    }
    if !(kernel_width > 0.0 && kernel_width.is_finite()) {
        return Err(Error::arg("kernel_width must be > 0"));
    }
    let mut r = rng::seeded(seed);
    let mut points = Matrix::zeros(n, d);
    let mut kernel_weights = Vec::with_capacity(n);
    for i in 0..n {
        let row = points.row_mut(i);
        let mut dist_sq = 0.0;
        for (p, c) in row.iter_mut().zip(center) {
            let e: f64 = StandardNormal.sample(&mut r);
            *p = c + e;
            dist_sq += e * e;
        }
        kernel_weights.push(kernel_weight(dist_sq, kernel_width));
    }
    Ok(Neighborhood { points, kernel_weights, center: center.to_vec(), seed })
}

impl Neighborhood {
    /// Neighborhood from explicit points and weights.
    pub fn from_parts(points: Matrix, kernel_weights: Vec<f64>, center: Vec<f64>, seed: u64) -> Result<Self> {
        check_dim(points.nrows(), kernel_weights.len())?;
        check_dim(points.ncols(), center.len())?;
        check_finite("points", points.as_slice())?;
        if kernel_weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::arg("kernel weights must be finite and positive"));
        }
        Ok(Self { points, kernel_weights, center, seed })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplanationKind {
    Baseline,
    Regularized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearExplanation {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub center: Vec<f64>,
    pub lambda: f64,
    #[serde(rename = "sigma")]
    pub sigma_used: Vec<f64>,
    pub kind: ExplanationKind,
    pub seed: u64,
}

impl LinearExplanation {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `w . x + b`
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.value_unchecked(x))
    }

    #[inline]
    pub(crate) fn value_unchecked(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.intercept
    }

    /// Per-feature attribution `w_d * x_d`.
    pub fn attributions(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.weights.iter().zip(x).map(|(w, v)| w * v).collect())
    }
}

pub fn explain_value(expl: &LinearExplanation, x: &[f64]) -> Result<f64> {
    expl.value(x)
}

pub fn attribution_vector(expl: &LinearExplanation, x: &[f64]) -> Result<Vec<f64>> {
    expl.attributions(x)
}

/// Solves `(X^T C X / sum(c) + diag(penalty, 0) + jitter I) beta = X^T C y / sum(c)`
/// where `X` has a trailing intercept column. Returns `(weights, intercept)`.
pub fn weighted_ridge(
    points: &Matrix,
    targets: &[f64],
    weights: &[f64],
    penalty: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let (n, d) = (points.nrows(), points.ncols());
    check_dim(n, targets.len())?;
    check_dim(n, weights.len())?;
    check_dim(d, penalty.len())?;
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Numeric("kernel weights sum to zero".into()));
    }
    let p = d + 1;
    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut row = vec![1.0; p];
    for i in 0..n {
        row[..d].copy_from_slice(points.row(i));
        let c = weights[i] / total;
        let cy = c * targets[i];
        for j in 0..p {
            let cj = c * row[j];
            rhs[j] += cy * row[j];
            for k in j..p {
                a[(j, k)] += cj * row[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            a[(j, k)] = a[(k, j)];
        }
    }
    for j in 0..d {
        a[(j, j)] += penalty[j];
    }
    for j in 0..p {
        a[(j, j)] += JITTER;
    }
    let beta = match a.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numeric("normal matrix is singular".into()))?,
    };
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Numeric("ridge solution is not finite".into()));
    }
    Ok((beta.as_slice()[..d].to_vec(), beta[d]))
}

fn query_model<P: Predictor + ?Sized>(model: &P, nbhd: &Neighborhood) -> Result<Vec<f64>> {
    check_dim(model.input_dim(), nbhd.dim())?;
    let ys: Vec<f64> = nbhd.points.rows().map(|r| model.predict_point(r)).collect();
    if let Some(i) = ys.iter().position(|y| !y.is_finite()) {
        return Err(Error::Numeric(format!("model output at neighborhood point {i} is not finite")));
    }
    Ok(ys)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::arg(format!("lambda must be finite and >= 0, got {lambda}")))
    }
}

/// Baseline surrogate with penalty `lambda * ||w||^2`.
pub fn fit_lime<P: Predictor + ?Sized>(model: &P, nbhd: &Neighborhood, lambda: f64) -> Result<LinearExplanation> {
    check_lambda(lambda)?;
    let ys = query_model(model, nbhd)?;
    let (weights, intercept) =
        weighted_ridge(&nbhd.points, &ys, &nbhd.kernel_weights, &vec![lambda; nbhd.dim()])?;
    Ok(LinearExplanation {
        weights,
        intercept,
        center: nbhd.center.clone(),
        lambda,
        sigma_used: vec![0.0; nbhd.dim()],
        kind: ExplanationKind::Baseline,
        seed: nbhd.seed,
    })
}

/// Uncertainty-suppressed surrogate with penalty `lambda * ||sigma o w||^2`.
pub fn fit_regularized_lime<P: Predictor + ?Sized>(
    model: &P,
    nbhd: &Neighborhood,
    spec: &UncertaintySpec,
    lambda: f64,
) -> Result<LinearExplanation> {
    check_lambda(lambda)?;
    check_dim(nbhd.dim(), spec.dim())?;
    let ys = query_model(model, nbhd)?;
    let penalty: Vec<f64> = spec.sigma.iter().map(|s| lambda * s * s).collect();
    let (weights, intercept) = weighted_ridge(&nbhd.points, &ys, &nbhd.kernel_weights, &penalty)?;
    Ok(LinearExplanation {
        weights,
        intercept,
        center: nbhd.center.clone(),
        lambda,
        sigma_used: spec.sigma.clone(),
        kind: ExplanationKind::Regularized,
        seed: nbhd.seed,
    })
}

/// Neighborhood parameters shared by every explanation in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// `None` means [`default_kernel_width`] of the feature count.
    pub kernel_width: Option<f64>,
    /// Ridge strength of the baseline surrogate.
    pub baseline_lambda: f64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self { n_samples: 1000, kernel_width: None, baseline_lambda: 0.0 }
    }
}

impl LimeConfig {
    pub fn kernel_width_for(&self, dim: usize) -> f64 {
        self.kernel_width.unwrap_or_else(|| default_kernel_width(dim))
    }

    pub fn neighborhood(&self, center: &[f64], seed: u64) -> Result<Neighborhood> {
        sample_neighborhood(center, self.n_samples, seed, self.kernel_width_for(center.len()))
    }

    /// Baseline and suppressed surrogate fitted on the same neighborhood.
    pub fn explain_pair<P: Predictor + ?Sized>(
        &self,
        model: &P,
        center: &[f64],
        spec: &UncertaintySpec,
        lambda: f64,
        seed: u64,
    ) -> Result<(LinearExplanation, LinearExplanation)> {
        let nbhd = self.neighborhood(center, seed)?;
        Ok((fit_lime(model, &nbhd, self.baseline_lambda)?, fit_regularized_lime(model, &nbhd, spec, lambda)?))
    }
}
