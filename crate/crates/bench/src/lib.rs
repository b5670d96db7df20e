//! Fixtures shared by the benchmarks.

use rand::Rng;
use uncertain_attr::data::StandardizedDataset;
use uncertain_attr::matrix::Matrix;
use uncertain_attr::predictor::{Layer, MlpPredictor};
use uncertain_attr::rng::seeded;

/// Network with uniform weights in `[-0.5, 0.5]`, e.g. `sizes = [5, 32, 16, 1]`.
pub fn random_network(sizes: &[usize], seed: u64) -> MlpPredictor {
    let mut r = seeded(seed);
    let layers = sizes
        .windows(2)
        .map(|p| {
            let w = (0..p[0] * p[1]).map(|_| r.random_range(-0.5..0.5)).collect();
            let b = (0..p[1]).map(|_| r.random_range(-0.5..0.5)).collect();
            Layer::new(Matrix::from_vec(p[1], p[0], w).unwrap(), b).unwrap()
        })
        .collect();
    MlpPredictor::from_layers(layers).unwrap()
}

/// `n` standard-normal rows with a smooth target.
pub fn dataset(n: usize, dim: usize, seed: u64) -> StandardizedDataset {
    let mut r = seeded(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
    let labels = rows.iter().map(|x| x.iter().enumerate().map(|(d, v)| (d as f64 + 1.0) * v.tanh()).sum()).collect();
    let names = (0..dim).map(|d| format!("x{d}")).collect();
    StandardizedDataset::from_standardized(Matrix::from_rows(&rows).unwrap(), labels, names).unwrap()
}
