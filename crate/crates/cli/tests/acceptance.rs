//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};
use uncertain_attr::data::{
    fit_standardize, ingest, make_uncertainty_spec, split, StandardizedDataset, UncertaintyLevel, UncertaintySpec,
};
use uncertain_attr::explainer::{fit_lime, fit_regularized_lime, LimeConfig};
use uncertain_attr::matrix::Matrix;
use uncertain_attr::metrics::{expected_faithfulness, explainer_sweep, SweepConfig, Technique};
use uncertain_attr::predictor::{
    integrated_gradients, loss_and_grad, train_mlp, train_regularized_mlp, Layer, MlpPredictor, TrainConfig,
};
use uncertain_attr::propagate::{propagate_fixed, sample_hypotheticals, surrogate_values};
use uncertain_attr::rng::{derive_seed, seeded};
use uncertain_attr::simulation::{run_simulation, select_suppression_lambda, SimulationConfig, LAMBDA_CANDIDATES};
use uncertain_attr::stats::sd_sample;
use uncertain_attr::stimuli::{select_stimuli, to_display, Selection, StimulusConfig};

const FEATURES: [&str; 5] = ["alcohol", "pH", "total sulfur dioxide", "sulphates", "volatile acidity"];
const UNCERTAIN: [&str; 2] = ["alcohol", "volatile acidity"];

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!(
            "[{}] criterion {id:>2} {name}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
}

struct Wine {
    train: StandardizedDataset,
    test: StandardizedDataset,
    spec: UncertaintySpec,
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn wine() -> Wine {
    let names: Vec<String> = FEATURES.iter().map(|s| s.to_string()).collect();
    let raw = ingest(repo_root().join("data/winequality-red.csv"), &names, "quality", b',').unwrap();
    let (tr, te) = split(&raw, 0.2, 7).unwrap();
    let (scaler, train) = fit_standardize(&tr).unwrap();
    let test = scaler.transform(&te).unwrap();
    let uncertain: Vec<String> = UNCERTAIN.iter().map(|s| s.to_string()).collect();
    let spec = make_uncertainty_spec(UncertaintyLevel::High, &uncertain, &train).unwrap();
    Wine { train, test, spec }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn sample_rows(n: usize, k: usize, seed: u64) -> Vec<usize> {
    use rand::seq::index::sample;
    let mut idx = sample(&mut seeded(seed), n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Mean excess distance against the closed form on random instances.
fn criterion_1(r: &mut Report, w: &Wine, nn: &MlpPredictor) {
    let t = Instant::now();
    let lime = LimeConfig::default();
    let mut worst: f64 = 0.0;
    let rows = sample_rows(w.test.len(), 20, 11);
    for &i in &rows {
        let x0 = w.test.features.row(i);
        let nbhd = lime.neighborhood(x0, derive_seed(1, i as u64)).unwrap();
        let expl = fit_lime(nn, &nbhd, 0.0).unwrap();
        let rec = expected_faithfulness(
            nn,
            &expl,
            x0,
            &w.spec,
            100_000,
            derive_seed(2, i as u64),
            i,
            Technique::Lime,
        )
        .unwrap();
        let closed: f64 = expl.weights.iter().zip(&w.spec.sigma).map(|(w, s)| w * w * s * s).sum();
        worst = worst.max(((rec.expected_f - rec.f0) - closed).abs() / closed);
    }
    let el = t.elapsed();
    r.line(
        1,
        "excess expected distance equals sum of w^2 sigma^2",
        worst < 0.05 && el < Duration::from_secs(10),
        format!(
            "worst relative error {worst:.4} over {} instances (< 0.05), {}",
            rows.len(),
            secs(el)
        ),
    );
}

fn criterion_2(r: &mut Report, w: &Wine, nn: &MlpPredictor) {
    let t = Instant::now();
    let lime = LimeConfig::default();
    let mut ok = 0;
    for i in 0..w.test.len() {
        let x0 = w.test.features.row(i);
        let expl = fit_lime(nn, &lime.neighborhood(x0, derive_seed(3, i as u64)).unwrap(), 0.0).unwrap();
        let rec = expected_faithfulness(
            nn,
            &expl,
            x0,
            &w.spec,
            150,
            derive_seed(4, i as u64),
            i,
            Technique::Lime,
        )
        .unwrap();
        ok += usize::from(rec.expected_f >= rec.f0);
    }
    let el = t.elapsed();
    let share = ok as f64 / w.test.len() as f64;
    r.line(
        2,
        "expected distance is at least the point distance",
        share >= 0.95 && el < Duration::from_secs(60),
        format!(
            "{ok}/{} instances ({:.1}%, need >= 95%), {}",
            w.test.len(),
            100.0 * share,
            secs(el)
        ),
    );
}

fn criterion_3(r: &mut Report, w: &Wine, nn: &MlpPredictor) {
    let t = Instant::now();
    let lambdas = [0.0, 0.1, 1.0, 10.0, 100.0];
    let lime = LimeConfig::default();
    let rows = sample_rows(w.test.len(), 20, 13);
    let mut ok = 0;
    for &i in &rows {
        let nbhd = lime
            .neighborhood(w.test.features.row(i), derive_seed(5, i as u64))
            .unwrap();
        let fits: Vec<Vec<f64>> = lambdas
            .iter()
            .map(|&l| fit_regularized_lime(nn, &nbhd, &w.spec, l).unwrap().weights)
            .collect();
        let monotone = w
            .spec
            .uncertain_features()
            .all(|d| fits.windows(2).all(|p| p[1][d].abs() <= p[0][d].abs()));
        ok += usize::from(monotone);
    }
    let el = t.elapsed();
    let share = ok as f64 / rows.len() as f64;
    r.line(
        3,
        "suppressed weights shrink as lambda grows",
        share >= 0.95 && el < Duration::from_secs(60),
        format!("{ok}/{} instances monotone (need >= 95%), {}", rows.len(), secs(el)),
    );
}

fn criteria_4_to_6(r: &mut Report, w: &Wine, nn: &MlpPredictor, regnn: &MlpPredictor, regnn_time: Duration) {
    let t = Instant::now();
    let config = SimulationConfig {
        seed: 3,
        ..Default::default()
    };
    let validation = w.train.subset(&(0..200).collect::<Vec<_>>());
    let (lambda, _) = select_suppression_lambda(nn, &validation, &w.spec, &LAMBDA_CANDIDATES, &config).unwrap();
    let res = run_simulation(nn, regnn, &w.test, &w.spec, lambda, &config).unwrap();
    let el = t.elapsed();

    let trend = res.explainer_curve.trend();
    r.line(
        4,
        "explainer improvement rises with baseline distance",
        trend > 0.0 && el < Duration::from_secs(300),
        format!("Spearman {trend:.3} (> 0) at suppression lambda {lambda}, {}", secs(el)),
    );

    let trend = res.predictor_curve.trend();
    let (lo_ig, hi_ig) = res.f0_range(Technique::IgNn);
    let (lo_lime, hi_lime) = res.f0_range(Technique::Lime);
    let narrower = hi_ig - lo_ig < hi_lime - lo_lime;
    let total = el + regnn_time;
    r.line(
        5,
        "predictor improvement rises with baseline distance; IG F0 range below LIME's",
        trend > 0.0 && narrower && total < Duration::from_secs(900),
        format!(
            "Spearman {trend:.3} (> 0; probabilities {:?}); IG F0 range {:.2e} vs LIME {:.2e}; {} incl. training",
            res.predictor_curve.prob_improved,
            hi_ig - lo_ig,
            hi_lime - lo_lime,
            secs(total)
        ),
    );

    let m = &res.distance_medians;
    r.line(
        6,
        "suppressed explanations agree more with each other than with their baselines",
        m.reg_lime_vs_ig_regnn < m.reg_lime_vs_lime && m.reg_lime_vs_ig_regnn < m.ig_regnn_vs_ig_nn,
        format!(
            "median d(RegLIME, IG RegNN) {:.3} vs d(RegLIME, LIME) {:.3} and d(IG RegNN, IG NN) {:.3}",
            m.reg_lime_vs_ig_regnn, m.reg_lime_vs_lime, m.ig_regnn_vs_ig_nn
        ),
    );
}

fn random_net(sizes: &[usize], seed: u64) -> MlpPredictor {
    use rand::Rng;
    let mut g = seeded(seed);
    let layers = sizes
        .windows(2)
        .map(|p| {
            let wts: Vec<f64> = (0..p[0] * p[1]).map(|_| g.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..p[1]).map(|_| g.random_range(-0.5..0.5)).collect();
            Layer::new(Matrix::from_vec(p[1], p[0], wts).unwrap(), b).unwrap()
        })
        .collect();
    MlpPredictor::from_layers(layers).unwrap()
}

fn criterion_7(r: &mut Report) {
    use rand::Rng;
    let t = Instant::now();
    let model = random_net(&[2, 4, 1], 17);
    let mut g = seeded(19);
    let xs = Matrix::from_vec(6, 2, (0..12).map(|_| g.random_range(-2.0..2.0)).collect()).unwrap();
    let ys: Vec<f64> = (0..6).map(|_| g.random_range(-1.0..1.0)).collect();
    let rows: Vec<usize> = (0..6).collect();
    let spec = UncertaintySpec::new(vec![0.8, 0.3]).unwrap();
    let (lambda, steps) = (0.7, 16);
    let lg = loss_and_grad(&model, &xs, &ys, &rows, &spec, lambda, steps).unwrap();
    let p0 = model.params();
    let h = 1e-5;
    let mut m = model.clone();
    let mut loss_at = |p: &[f64]| {
        m.set_params(p).unwrap();
        loss_and_grad(&m, &xs, &ys, &rows, &spec, lambda, steps).unwrap().loss
    };
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..p0.len() {
        let (mut up, mut dn) = (p0.clone(), p0.clone());
        up[i] += h;
        dn[i] -= h;
        let fd = (loss_at(&up) - loss_at(&dn)) / (2.0 * h);
        diff = diff.max((fd - lg.grad[i]).abs());
        scale = scale.max(fd.abs());
    }
    let rel = diff / scale;
    let el = t.elapsed();
    r.line(
        7,
        "penalized loss gradient matches central differences",
        rel < 1e-4 && lg.penalty > 0.0 && el < Duration::from_secs(5),
        format!(
            "max relative error {rel:.2e} over {} parameters (< 1e-4), {}",
            p0.len(),
            secs(el)
        ),
    );
}

fn criterion_8(r: &mut Report, w: &Wine, models: &[(&str, &MlpPredictor)]) {
    let rows = sample_rows(w.test.len(), 100, 23);
    let baseline = vec![0.0; w.test.dim()];
    let mut worst: f64 = 0.0;
    for (_, m) in models {
        for &i in &rows {
            let x = w.test.features.row(i);
            let ig = integrated_gradients(m, x, &baseline, 200).unwrap();
            let delta = m.predict(x).unwrap() - m.predict(&baseline).unwrap();
            worst = worst.max(ig.completeness_gap.abs() / delta.abs().max(f64::MIN_POSITIVE));
        }
    }
    let names: Vec<&str> = models.iter().map(|(n, _)| *n).collect();
    r.line(
        8,
        "integrated gradients are complete at 200 steps",
        worst < 1e-3,
        format!(
            "worst relative gap {worst:.2e} on {} instances for {names:?} (< 1e-3)",
            rows.len()
        ),
    );
}

fn criterion_9(r: &mut Report, w: &Wine, nn: &MlpPredictor) {
    let lime = LimeConfig::default();
    let mut worst: f64 = 0.0;
    let mut certain_zero = true;
    for i in 0..10 {
        let x0 = w.test.features.row(i);
        let (base, supp) = lime
            .explain_pair(nn, x0, &w.spec, 1.0, derive_seed(7, i as u64))
            .unwrap();
        let hyp = sample_hypotheticals(x0, &w.spec, 1000, derive_seed(8, i as u64)).unwrap();
        for expl in [&base, &supp] {
            let dist = propagate_fixed(expl, &hyp).unwrap();
            let totals = dist.totals().unwrap();
            let outputs = surrogate_values(expl, &hyp).unwrap();
            worst = worst.max((sd_sample(&totals) - sd_sample(&outputs)).abs());
            for (d, s) in w.spec.sigma.iter().enumerate() {
                if *s == 0.0 {
                    certain_zero &= dist.sd[d] == 0.0 && dist.ci90_halfwidth[d] == 0.0;
                }
            }
        }
    }
    r.line(
        9,
        "attribution spread matches surrogate output spread",
        worst < 1e-12 && certain_zero,
        format!("max sd difference {worst:.1e} (< 1e-12); certain features exactly zero: {certain_zero}"),
    );
}

fn criterion_10(r: &mut Report, w: &Wine, nn: &MlpPredictor) {
    let t = Instant::now();
    let config = StimulusConfig::default();
    let names: Vec<String> = FEATURES.iter().map(|s| s.to_string()).collect();
    let run = || match select_stimuli(nn, &w.test, &w.spec, &config).unwrap() {
        Selection::Selected(set, _) => Some(to_display(&set, &w.test, &w.spec, &names, config.threshold).unwrap()),
        Selection::Empty(_) => None,
    };
    let Some(first) = run() else {
        r.line(
            10,
            "stimulus pipeline",
            false,
            "no candidate survived the filters".into(),
        );
        return;
    };
    let second = run().expect("second run is empty");
    let el = t.elapsed();
    let hash = |s| Sha256::digest(serde_json::to_vec(s).unwrap());
    let identical = hash(&first) == hash(&second);
    let practice = first.stimuli.iter().filter(|s| s.block == "practice").count();
    let main: Vec<_> = first.stimuli.iter().filter(|s| s.block == "main").collect();
    let accept = main.iter().filter(|s| s.decision == "accept").count();
    let (lo, hi) = config.window;
    let in_window = first
        .stimuli
        .iter()
        .all(|s| s.predicted_score > lo && s.predicted_score < hi);
    let consistent = first
        .stimuli
        .iter()
        .all(|s| (s.predicted_score > config.threshold) == (s.actual_score > config.threshold));
    let pass = practice == 4
        && main.len() == 30
        && accept == 15
        && in_window
        && consistent
        && identical
        && el < Duration::from_secs(300);
    r.line(
        10,
        "stimulus pipeline",
        pass,
        format!(
            "{practice} practice / {} main, {accept} accept / {} reject, in window {in_window}, side-consistent {consistent}, rerun identical {identical}, {} for two runs",
            main.len(),
            main.len() - accept,
            secs(el)
        ),
    );
}

fn criterion_11(r: &mut Report, w: &Wine, nn: &MlpPredictor) {
    let lambdas = [0.0, 0.1, 1.0, 10.0];
    let rows = explainer_sweep(
        nn,
        &w.test,
        &w.spec,
        &lambdas,
        &SweepConfig {
            seed: 5,
            ..Default::default()
        },
    )
    .unwrap();
    let bits = |m: &uncertain_attr::metrics::MeanSe| (m.mean.to_bits(), m.se.to_bits());
    let unchanged = rows.iter().all(|row| {
        bits(&row.correctness_over_noise) == bits(&rows[0].correctness_over_noise)
            && bits(&row.robustness) == bits(&rows[0].robustness)
    });
    let base = rows[0].stability_total.mean;
    let at_one = rows[2].stability_total.mean;
    r.line(
        11,
        "explainer sweep keeps model measures fixed and stabilizes attributions",
        unchanged && at_one < base,
        format!("model measures bitwise unchanged: {unchanged}; stability {at_one:.4} at lambda 1 vs {base:.4} at 0"),
    );
}

fn hash_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let digest = Sha256::digest(std::fs::read(&path).unwrap()).to_vec();
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), digest);
            }
        }
    }
    out
}

/// Runs the commands twice with a reduced configuration and compares every
/// output file.
fn criterion_12(r: &mut Report) {
    let tmp = tempfile::tempdir().unwrap();
    let config = serde_json::json!({
        "dataset": repo_root().join("data/winequality-red.csv"),
        "model": {"hidden_sizes": [8], "epochs": 30, "ig_steps": 10, "sweep_lambdas": []},
        "explainer": {"n_samples": 200, "validation_size": 40},
        "simulation": {"n_samples": 30, "ig_steps": 20},
        "display": {"n_samples": 200},
        "stimuli": {"k_per_instance": 20, "n_hypotheticals": 30, "n_clusters": 4, "n_total": 10, "n_practice": 2}
    });
    let config_path = tmp.path().join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    let mut trees = Vec::new();
    let mut failures = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        for cmd in ["train", "simulate", "stimuli"] {
            let status = Command::new(env!("CARGO_BIN_EXE_uncertain-attr"))
                .arg("--config")
                .arg(&config_path)
                .arg("--out")
                .arg(&out)
                .arg(cmd)
                .output()
                .unwrap();
            if !status.status.success() {
                failures.push(format!("{cmd} exited {:?}", status.status.code()));
            }
        }
        trees.push(hash_tree(&out));
    }
    let identical = trees[0] == trees[1];
    r.line(
        12,
        "train, simulate and stimuli reruns are byte-identical",
        failures.is_empty() && identical && !trees[0].is_empty(),
        format!(
            "{} files compared, identical {identical}, command failures {failures:?}",
            trees[0].len()
        ),
    );
}

fn main() {
    let mut r = Report { failed: 0 };
    let w = wine();

    criterion_7(&mut r);

    let t = Instant::now();
    let nn = train_mlp(&w.train, &TrainConfig::default()).unwrap().0;
    println!("trained baseline network in {}", secs(t.elapsed()));
    criterion_1(&mut r, &w, &nn);
    criterion_2(&mut r, &w, &nn);
    criterion_3(&mut r, &w, &nn);
    criterion_9(&mut r, &w, &nn);
    criterion_11(&mut r, &w, &nn);
    criterion_10(&mut r, &w, &nn);

    let t = Instant::now();
    let regnn = train_regularized_mlp(
        &w.train,
        &w.spec,
        &TrainConfig {
            lambda: 1.0,
            ..Default::default()
        },
    )
    .unwrap()
    .0;
    let regnn_time = t.elapsed();
    println!("trained regularized network in {}", secs(regnn_time));
    criterion_8(&mut r, &w, &[("nn", &nn), ("regnn", &regnn)]);
    criteria_4_to_6(&mut r, &w, &nn, &regnn, regnn_time);

    criterion_12(&mut r);

    println!("{} criteria failed", r.failed);
    if r.failed > 0 {
        std::process::exit(1);
    }
}
