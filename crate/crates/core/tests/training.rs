//! Training on synthetic and wine data.

use std::path::Path;

use rand::Rng;
use uncertain_attr::data::{
    fit_standardize, ingest, make_uncertainty_spec, split, StandardizedDataset, UncertaintyLevel, UncertaintySpec,
};
use uncertain_attr::matrix::Matrix;
use uncertain_attr::metrics::{predictor_sweep, SweepConfig};
use uncertain_attr::predictor::{train_mlp, train_regularized_mlp, MlpPredictor, TrainConfig};
use uncertain_attr::rng::seeded;
use uncertain_attr::stats::{mean, sd_sample};

fn rmse(model: &MlpPredictor, data: &StandardizedDataset) -> f64 {
    let preds = model.predict_batch(&data.features).unwrap();
    let mse = preds.iter().zip(&data.labels).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / data.len() as f64;
    mse.sqrt()
}

fn synthetic(n: usize, seed: u64) -> StandardizedDataset {
    let mut r = seeded(seed);
    let mut xs = Matrix::zeros(n, 2);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b): (f64, f64) = (r.random_range(-1.5..1.5), r.random_range(-1.5..1.5));
        xs.set(i, 0, a);
        xs.set(i, 1, b);
        ys.push(2.0 * a + 3.0 * b);
    }
    StandardizedDataset::from_standardized(xs, ys, vec!["x1".into(), "x2".into()]).unwrap()
}

fn wine() -> (StandardizedDataset, StandardizedDataset) {
    let names: Vec<String> =
        ["alcohol", "pH", "total sulfur dioxide", "sulphates", "volatile acidity"].iter().map(|s| s.to_string()).collect();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/winequality-red.csv");
    let raw = ingest(path, &names, "quality", b',').unwrap();
    let (tr, te) = split(&raw, 0.2, 7).unwrap();
    let (scaler, train) = fit_standardize(&tr).unwrap();
    let test = scaler.transform(&te).unwrap();
    (train, test)
}

#[test]
fn learns_a_linear_target() {
    let train = synthetic(1000, 1);
    let test = synthetic(200, 2);
    let (model, history) = train_mlp(&train, &TrainConfig::default()).unwrap();
    assert!(history.last().unwrap().loss < history[0].loss);
    let err = rmse(&model, &test);
    assert!(err < 0.3, "test RMSE {err}");
}

#[test]
fn wine_error_beats_the_label_spread() {
    let (train, test) = wine();
    assert_eq!(train.len() + test.len(), 1599);
    let (model, _) = train_mlp(&train, &TrainConfig::default()).unwrap();
    let err = rmse(&model, &test);
    let spread = sd_sample(&test.labels);
    assert!(err < spread, "test RMSE {err} vs label sd {spread}");
    assert!(mean(&train.features.column(0)).abs() < 1e-12);
}

#[test]
fn certain_spec_trains_the_plain_network() {
    let train = synthetic(300, 3);
    let config = TrainConfig { epochs: 15, hidden_sizes: vec![6], ..Default::default() };
    let (plain, _) = train_mlp(&train, &config).unwrap();
    let reg_config = TrainConfig { lambda: 5.0, ..config };
    let (reg, history) = train_regularized_mlp(&train, &UncertaintySpec::certain(2), &reg_config).unwrap();
    assert_eq!(plain.params(), reg.params());
    assert!(history.iter().all(|h| h.penalty == 0.0));
}

#[test]
fn penalty_shrinks_as_lambda_grows() {
    let (train, _) = wine();
    let train = train.subset(&(0..400).collect::<Vec<_>>());
    let spec = make_uncertainty_spec(UncertaintyLevel::High, &["alcohol".into(), "volatile acidity".into()], &train)
        .unwrap();
    let base = TrainConfig { epochs: 40, hidden_sizes: vec![8], ig_steps: 10, ..Default::default() };
    let mut penalties = Vec::new();
    for lambda in [0.1, 1.0, 10.0] {
        let (_, history) = train_regularized_mlp(&train, &spec, &TrainConfig { lambda, ..base.clone() }).unwrap();
        penalties.push(history.last().unwrap().penalty);
    }
    assert!(penalties.windows(2).all(|p| p[1] < p[0]), "{penalties:?}");
}

#[test]
fn training_is_deterministic_and_round_trips() {
    let train = synthetic(200, 4);
    let config = TrainConfig { epochs: 10, hidden_sizes: vec![4], ..Default::default() };
    let (a, _) = train_mlp(&train, &config).unwrap();
    let (b, _) = train_mlp(&train, &config).unwrap();
    assert_eq!(a.params(), b.params());
    let back = MlpPredictor::from_json(&a.to_json().unwrap()).unwrap();
    assert_eq!(back.params(), a.params());
    let other = train_mlp(&train, &TrainConfig { seed: 99, ..config }).unwrap().0;
    assert_ne!(other.params(), a.params());
}

#[test]
fn regularized_networks_give_steadier_attributions() {
    let (train, test) = wine();
    let train = train.subset(&(0..400).collect::<Vec<_>>());
    let test = test.subset(&(0..60).collect::<Vec<_>>());
    let spec = make_uncertainty_spec(UncertaintyLevel::High, &["alcohol".into(), "volatile acidity".into()], &train)
        .unwrap();
    let base = TrainConfig { epochs: 40, hidden_sizes: vec![8], ig_steps: 10, ..Default::default() };
    let nn = train_mlp(&train, &base).unwrap().0;
    let mut models = vec![nn.clone()];
    for lambda in [0.1, 1.0] {
        models.push(train_regularized_mlp(&train, &spec, &TrainConfig { lambda, ..base.clone() }).unwrap().0);
    }
    let refs: Vec<&MlpPredictor> = models.iter().collect();
    let config = SweepConfig { n_samples: 50, ig_steps: 20, ..Default::default() };
    let rows = predictor_sweep(&refs, &nn, &test, &spec, &config).unwrap();
    assert_eq!(rows.iter().map(|r| r.lambda).collect::<Vec<_>>(), vec![0.0, 0.1, 1.0]);
    let stability: Vec<f64> = rows.iter().map(|r| r.stability_total.mean).collect();
    assert!(stability.windows(2).all(|w| w[1] < w[0]), "{stability:?}");
}
