//! Feed-forward tanh regressor with a linear output unit.
//!
//! The same type plays both the baseline predictor and the predictor trained
//! with an attribution-uncertainty penalty; `regularization_lambda` records
//! which one it is.

mod ig;
mod train;

use serde::{Deserialize, Serialize};

use crate::data::Scaler;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::matrix::Matrix;

pub use ig::{integrated_gradients, IgAttribution};
pub use train::{
    loss_and_grad, train_mlp, train_regularized_mlp, EpochStats, LossAndGrad, TrainConfig,
};

pub const MODEL_FORMAT: &str = "uncertain-attr-mlp/1";

/// Anything that maps a standardized feature vector to a scalar score.
pub trait Predictor: Sync {
    fn input_dim(&self) -> usize;

    /// Caller guarantees `x.len() == self.input_dim()`.
    fn predict_point(&self, x: &[f64]) -> f64;
}

/// Adapter turning a closure into a [`Predictor`].
pub struct FnPredictor<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnPredictor<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for FnPredictor<F> {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn predict_point(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
}

/// One affine layer, `weights` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn new(weights: Matrix, biases: Vec<f64>) -> Result<Self> {
        check_dim(weights.nrows(), biases.len())?;
        Ok(Self { weights, biases })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn param_count(&self) -> usize {
        self.weights.nrows() * self.weights.ncols() + self.biases.len()
    }

    /// `out = W x + b`
    #[inline]
    fn affine(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out.iter_mut().zip(self.weights.rows().zip(&self.biases)) {
            *o = b + dot(row, x);
        }
    }

    /// `out = W x`
    #[inline]
    fn linear(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.weights.rows()) {
            *o = dot(row, x);
        }
    }

    /// `out = W^T y`
    #[inline]
    fn transpose_mul(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (row, &yi) in self.weights.rows().zip(y) {
            if yi != 0.0 {
                for (o, w) in out.iter_mut().zip(row) {
                    *o += w * yi;
                }
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpPredictor {
    layers: Vec<Layer>,
    activation: Activation,
    regularization_lambda: f64,
    scaler: Option<Scaler>,
}

impl MlpPredictor {
    /// Builds a network from explicit layers. Hidden layers use tanh, the
    /// last layer is linear with a single output.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::arg("network needs at least one layer"))?;
        if first.in_dim() == 0 {
            return Err(Error::arg("input dimension must be positive"));
        }
        for pair in layers.windows(2) {
            check_dim(pair[0].out_dim(), pair[1].in_dim())?;
        }
        let last = layers.last().expect("nonempty");
        if last.out_dim() != 1 {
            return Err(Error::arg(format!("final layer must have 1 output, has {}", last.out_dim())));
        }
        for (i, l) in layers.iter().enumerate() {
            check_finite(&format!("layer {i} weights"), l.weights.as_slice())?;
            check_finite(&format!("layer {i} biases"), &l.biases)?;
        }
        Ok(Self { layers, activation: Activation::Tanh, regularization_lambda: 0.0, scaler: None })
    }

    /// All-zero network with the given layer sizes, e.g. `[5, 32, 16, 1]`.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::arg("need at least input and output sizes"));
        }
        let layers = sizes
            .windows(2)
            .map(|w| Layer::new(Matrix::zeros(w[1], w[0]), vec![0.0; w[1]]))
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn regularization_lambda(&self) -> f64 {
        self.regularization_lambda
    }

    pub fn scaler(&self) -> Option<&Scaler> {
        self.scaler.as_ref()
    }

    pub fn with_scaler(mut self, scaler: Scaler) -> Self {
        self.scaler = Some(scaler);
        self
    }

    pub(crate) fn set_lambda(&mut self, lambda: f64) {
        self.regularization_lambda = lambda;
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Parameters flattened layer by layer: weights row-major, then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        check_dim(self.param_count(), params.len())?;
        let mut offset = 0;
        for l in &mut self.layers {
            let (r, c) = (l.weights.nrows(), l.weights.ncols());
            l.weights = Matrix::from_vec(r, c, params[offset..offset + r * c].to_vec())?;
            offset += r * c;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    pub(crate) fn apply_update(&mut self, step: &[f64], scale: f64) {
        let mut offset = 0;
        for l in &mut self.layers {
            let n = l.weights.nrows() * l.weights.ncols();
            let (r, c) = (l.weights.nrows(), l.weights.ncols());
            for i in 0..r {
                for (j, w) in l.weights.row_mut(i).iter_mut().enumerate() {
                    *w -= scale * step[offset + i * c + j];
                }
            }
            offset += n;
            for b in &mut l.biases {
                *b -= scale * step[offset];
                offset += 1;
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.input_dim(), x.len())?;
        check_finite("x", x)?;
        Ok(self.forward(x))
    }

    pub fn predict_batch(&self, xs: &Matrix) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), xs.ncols())?;
        xs.rows().map(|r| self.predict(r)).collect()
    }

    pub(crate) fn forward(&self, x: &[f64]) -> f64 {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            next.resize(l.out_dim(), 0.0);
            l.affine(&cur, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur[0]
    }

    /// Gradient of the output with respect to the input.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), x.len())?;
        let mut tape = Tape::new(self);
        tape.forward(self, x, None);
        Ok(tape.input_gradient(self))
    }
}

impl Predictor for MlpPredictor {
    fn input_dim(&self) -> usize {
        MlpPredictor::input_dim(self)
    }

    fn predict_point(&self, x: &[f64]) -> f64 {
        self.forward(x)
    }
}

/// Forward activations for one input, optionally carrying a tangent (a
/// directional derivative along an input direction) through the network.
pub(crate) struct Tape {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    /// Tangent of `acts`.
    tans: Vec<Vec<f64>>,
    /// Tangent of each layer's pre-activation.
    tan_pre: Vec<Vec<f64>>,
    has_tangent: bool,
    // backward scratch
    adj_act: Vec<f64>,
    adj_tan: Vec<f64>,
    adj_pre: Vec<f64>,
    adj_tan_pre: Vec<f64>,
    scratch: Vec<f64>,
}

impl Tape {
    pub(crate) fn new(model: &MlpPredictor) -> Self {
        let mut sizes = vec![model.input_dim()];
        sizes.extend(model.layers.iter().map(Layer::out_dim));
        let widest = *sizes.iter().max().expect("nonempty");
        Self {
            acts: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            tans: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            tan_pre: sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
            has_tangent: false,
            adj_act: Vec::with_capacity(widest),
            adj_tan: Vec::with_capacity(widest),
            adj_pre: Vec::with_capacity(widest),
            adj_tan_pre: Vec::with_capacity(widest),
            scratch: Vec::with_capacity(widest),
        }
    }

    pub(crate) fn output(&self) -> f64 {
        self.acts.last().expect("nonempty")[0]
    }

    /// Directional derivative of the output along the tangent direction.
    #[cfg(test)]
    pub(crate) fn output_tangent(&self) -> f64 {
        self.tans.last().expect("nonempty")[0]
    }

    pub(crate) fn forward(&mut self, model: &MlpPredictor, x: &[f64], direction: Option<&[f64]>) {
        self.acts[0].copy_from_slice(x);
        self.has_tangent = direction.is_some();
        if let Some(v) = direction {
            self.tans[0].copy_from_slice(v);
        }
        let last = model.layers.len() - 1;
        for (l, layer) in model.layers.iter().enumerate() {
            let (before, after) = self.acts.split_at_mut(l + 1);
            layer.affine(&before[l], &mut after[0]);
            if self.has_tangent {
                let (tb, ta) = self.tans.split_at_mut(l + 1);
                layer.linear(&tb[l], &mut self.tan_pre[l]);
                ta[0].copy_from_slice(&self.tan_pre[l]);
            }
            if l < last {
                for a in after[0].iter_mut() {
                    *a = a.tanh();
                }
                if self.has_tangent {
                    for (t, a) in self.tans[l + 1].iter_mut().zip(&self.acts[l + 1]) {
                        *t *= 1.0 - a * a;
                    }
                }
            }
        }
    }

    /// d(output)/d(input) from the last forward pass.
    pub(crate) fn input_gradient(&mut self, model: &MlpPredictor) -> Vec<f64> {
        let last = model.layers.len() - 1;
        self.adj_pre.clear();
        self.adj_pre.push(1.0);
        for l in (0..=last).rev() {
            let layer = &model.layers[l];
            self.scratch.resize(layer.in_dim(), 0.0);
            layer.transpose_mul(&self.adj_pre, &mut self.scratch);
            if l == 0 {
                break;
            }
            // through tanh of layer l-1
            self.adj_pre.clear();
            for (g, a) in self.scratch.iter().zip(&self.acts[l]) {
                self.adj_pre.push(g * (1.0 - a * a));
            }
        }
        self.scratch.clone()
    }

    /// Accumulates `scale_value * d(output)/dθ + scale_tangent * d(output tangent)/dθ`
    /// into `grad` (flat parameter layout of [`MlpPredictor::params`]).
    pub(crate) fn backward_params(
        &mut self,
        model: &MlpPredictor,
        scale_value: f64,
        scale_tangent: f64,
        grad: &mut [f64],
    ) {
        let use_tan = self.has_tangent && scale_tangent != 0.0;
        let last = model.layers.len() - 1;
        let mut offsets = Vec::with_capacity(model.layers.len());
        let mut off = 0;
        for l in &model.layers {
            offsets.push(off);
            off += l.param_count();
        }

        self.adj_pre.clear();
        self.adj_pre.push(scale_value);
        self.adj_tan_pre.clear();
        self.adj_tan_pre.push(if use_tan { scale_tangent } else { 0.0 });

        for l in (0..=last).rev() {
            let layer = &model.layers[l];
            let (rows, cols) = (layer.out_dim(), layer.in_dim());
            let base = offsets[l];
            let input = &self.acts[l];
            let tan_in = &self.tans[l];
            for i in 0..rows {
                let gp = self.adj_pre[i];
                let gt = self.adj_tan_pre[i];
                let row = &mut grad[base + i * cols..base + (i + 1) * cols];
                if gp != 0.0 {
                    for (g, a) in row.iter_mut().zip(input) {
                        *g += gp * a;
                    }
                }
                if use_tan && gt != 0.0 {
                    for (g, t) in row.iter_mut().zip(tan_in) {
                        *g += gt * t;
                    }
                }
                grad[base + rows * cols + i] += gp;
            }
            if l == 0 {
                break;
            }
            // adjoints of this layer's inputs, i.e. of acts[l] and tans[l]
            self.adj_act.resize(cols, 0.0);
            layer.transpose_mul(&self.adj_pre, &mut self.adj_act);
            if use_tan {
                self.adj_tan.resize(cols, 0.0);
                layer.transpose_mul(&self.adj_tan_pre, &mut self.adj_tan);
            }
            // acts[l] = tanh(pre), tans[l] = (1 - acts[l]^2) * tan_pre[l-1]
            let a = &self.acts[l];
            self.adj_pre.clear();
            self.adj_tan_pre.clear();
            for j in 0..cols {
                let s = 1.0 - a[j] * a[j];
                let mut ga = self.adj_act[j];
                if use_tan {
                    let gt = self.adj_tan[j];
                    self.adj_tan_pre.push(s * gt);
                    // through s = 1 - a^2
                    ga += -2.0 * a[j] * self.tan_pre[l - 1][j] * gt;
                } else {
                    self.adj_tan_pre.push(0.0);
                }
                self.adj_pre.push(s * ga);
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct LayerJson {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    format: String,
    activation: Activation,
    input_dim: usize,
    layer_shapes: Vec<[usize; 2]>,
    layers: Vec<LayerJson>,
    lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scaler: Option<Scaler>,
}

impl MlpPredictor {
    pub fn to_json(&self) -> Result<String> {
        let doc = ModelJson {
            format: MODEL_FORMAT.to_string(),
            activation: self.activation,
            input_dim: self.input_dim(),
            layer_shapes: self.layers.iter().map(|l| [l.out_dim(), l.in_dim()]).collect(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerJson {
                    rows: l.out_dim(),
                    cols: l.in_dim(),
                    weights: l.weights.as_slice().to_vec(),
                    biases: l.biases.clone(),
                })
                .collect(),
            lambda: self.regularization_lambda,
            scaler: self.scaler.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelJson = serde_json::from_str(s)?;
        if doc.format != MODEL_FORMAT {
            return Err(Error::arg(format!(
                "unsupported model format `{}` (expected `{MODEL_FORMAT}`)",
                doc.format
            )));
        }
        let layers = doc
            .layers
            .into_iter()
            .map(|l| Layer::new(Matrix::from_vec(l.rows, l.cols, l.weights)?, l.biases))
            .collect::<Result<Vec<_>>>()?;
        let mut model = Self::from_layers(layers)?;
        check_dim(doc.input_dim, model.input_dim())?;
        if !(doc.lambda >= 0.0) {
            return Err(Error::arg("lambda must be >= 0"));
        }
        model.regularization_lambda = doc.lambda;
        model.scaler = doc.scaler;
        Ok(model)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn random_net(sizes: &[usize], seed: u64) -> MlpPredictor {
        let mut r = rng::seeded(seed);
        let n = Normal::new(0.0, 0.7).unwrap();
        let mut m = MlpPredictor::zeros(sizes).unwrap();
        let p: Vec<f64> = (0..m.param_count()).map(|_| n.sample(&mut r)).collect();
        m.set_params(&p).unwrap();
        m
    }

    #[test]
    fn zero_network_outputs_final_bias() {
        let mut m = MlpPredictor::zeros(&[3, 4, 1]).unwrap();
        let mut p = m.params();
        *p.last_mut().unwrap() = 2.5;
        m.set_params(&p).unwrap();
        assert_eq!(m.predict(&[1.0, -2.0, 3.0]).unwrap(), 2.5);
    }

    #[test]
    fn hand_computed_2_2_1() {
        // h = tanh(W1 x + b1), y = w2 . h + b2
        let l1 = Layer::new(Matrix::from_vec(2, 2, vec![0.5, -1.0, 0.25, 2.0]).unwrap(), vec![0.1, -0.2])
            .unwrap();
        let l2 = Layer::new(Matrix::from_vec(1, 2, vec![1.5, -0.5]).unwrap(), vec![0.3]).unwrap();
        let m = MlpPredictor::from_layers(vec![l1, l2]).unwrap();
        let x = [0.4, -0.3];
        // 0.5*0.4 - 1.0*(-0.3) + 0.1 = 0.6; 0.25*0.4 + 2.0*(-0.3) - 0.2 = -0.7
        let expected = 1.5 * 0.6f64.tanh() - 0.5 * (-0.7f64).tanh() + 0.3;
        assert!((m.predict(&x).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 1.4077582391).abs() < 1e-9);
    }

    #[test]
    fn batch_matches_single() {
        let m = random_net(&[3, 5, 4, 1], 11);
        let xs = Matrix::from_vec(3, 3, vec![0.1, 0.2, 0.3, -1.0, 0.0, 2.0, 5.0, -5.0, 0.5]).unwrap();
        let batch = m.predict_batch(&xs).unwrap();
        for (i, b) in batch.iter().enumerate() {
            assert_eq!(*b, m.predict(xs.row(i)).unwrap());
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = random_net(&[3, 2, 1], 1);
        assert!(matches!(m.predict(&[1.0, 2.0]), Err(Error::Dimension { expected: 3, actual: 2 })));
        assert!(m.predict(&[1.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn rejects_bad_shapes() {
        let l1 = Layer::new(Matrix::zeros(2, 3), vec![0.0; 2]).unwrap();
        let l2 = Layer::new(Matrix::zeros(1, 3), vec![0.0]).unwrap();
        assert!(MlpPredictor::from_layers(vec![l1, l2]).is_err());
        assert!(MlpPredictor::zeros(&[3, 2]).is_err());
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let m = random_net(&[4, 6, 3, 1], 5);
        let x = [0.3, -0.7, 1.1, 0.05];
        let g = m.input_gradient(&x).unwrap();
        let h = 1e-6;
        for d in 0..4 {
            let mut xp = x;
            let mut xm = x;
            xp[d] += h;
            xm[d] -= h;
            let fd = (m.forward(&xp) - m.forward(&xm)) / (2.0 * h);
            assert!((fd - g[d]).abs() < 1e-8, "d={d}: {fd} vs {}", g[d]);
        }
    }

    #[test]
    fn tangent_is_directional_derivative() {
        let m = random_net(&[3, 5, 1], 8);
        let x = [0.2, 0.1, -0.4];
        let v = [1.0, -2.0, 0.5];
        let mut tape = Tape::new(&m);
        tape.forward(&m, &x, Some(&v));
        let g = m.input_gradient(&x).unwrap();
        assert!((tape.output_tangent() - dot(&g, &v)).abs() < 1e-12);
        assert_eq!(tape.output(), m.forward(&x));
    }

    #[test]
    fn json_round_trip() {
        let m = random_net(&[2, 3, 1], 3);
        let s = m.to_json().unwrap();
        assert!(s.contains(MODEL_FORMAT));
        let back = MlpPredictor::from_json(&s).unwrap();
        assert_eq!(back, m);
        let bad = s.replace(MODEL_FORMAT, "other/9");
        assert!(MlpPredictor::from_json(&bad).is_err());
    }
}
