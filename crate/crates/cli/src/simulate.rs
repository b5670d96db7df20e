use serde::Serialize;
use uncertain_attr::data::UncertaintyLevel;
use uncertain_attr::metrics::{
    explainer_sweep, predictor_sweep, write_records_csv, write_sweep_csv, FaithfulnessCurve, FaithfulnessRecord,
    SweepConfig, SweepRow, Technique,
};
use uncertain_attr::predictor::MlpPredictor;
use uncertain_attr::simulation::{
    run_simulation, select_suppression_lambda, write_distances_csv, DistanceMedians, SimulationConfig,
};

use crate::config::{RunConfig, SIMULATE_STREAM, SWEEP_STREAM};
use crate::svg::{line_chart, Curve};
use crate::workspace::{write_csv, write_file, write_json, Workspace};

pub fn simulation_config(config: &RunConfig, seed: u64) -> SimulationConfig {
    SimulationConfig {
        n_samples: config.simulation.n_samples,
        seed,
        lime: config.lime(),
        ig_steps: config.simulation.ig_steps,
        n_bins: config.simulation.n_bins,
    }
}

#[derive(Serialize)]
struct TechniqueSummary {
    technique: Technique,
    f0_min: f64,
    f0_max: f64,
    mean_f0: f64,
    mean_expected_f: f64,
    /// Share of instances with `expected_f >= f0`.
    share_not_improved: f64,
}

#[derive(Serialize)]
struct Summary {
    level: UncertaintyLevel,
    instances: usize,
    n_samples: usize,
    seed: u64,
    suppress_lambda: f64,
    /// Mean expected faithfulness per candidate on the validation slice;
    /// empty when the strength was fixed in the config.
    lambda_selection: Vec<(f64, f64)>,
    regnn_lambda: f64,
    explainer_trend: f64,
    predictor_trend: f64,
    techniques: Vec<TechniqueSummary>,
    distance_medians: DistanceMedians,
}

fn summarize(t: Technique, records: &[FaithfulnessRecord]) -> TechniqueSummary {
    let n = records.len() as f64;
    TechniqueSummary {
        technique: t,
        f0_min: records.iter().map(|r| r.f0).fold(f64::INFINITY, f64::min),
        f0_max: records.iter().map(|r| r.f0).fold(f64::NEG_INFINITY, f64::max),
        mean_f0: records.iter().map(|r| r.f0).sum::<f64>() / n,
        mean_expected_f: records.iter().map(|r| r.expected_f).sum::<f64>() / n,
        share_not_improved: records.iter().filter(|r| r.expected_f >= r.f0).count() as f64 / n,
    }
}

fn curve_figure(curve: &FaithfulnessCurve, title: &str) -> String {
    let labels: Vec<String> = curve.bin_centers.iter().map(|c| format!("{c:.2e}")).collect();
    line_chart(&Curve {
        title,
        x_labels: &labels,
        y: &curve.prob_improved,
        se: &curve.standard_error,
        x_caption: "baseline F0 (bin mean)",
        y_caption: "Prob(E[F] regularized < F0 baseline)",
    })
}

fn sweep_models(ws: &Workspace, level: UncertaintyLevel, nn: MlpPredictor) -> anyhow::Result<Vec<MlpPredictor>> {
    let mut lambdas = ws.config.model.sweep_lambdas.clone();
    lambdas.push(ws.config.model.regnn_lambda);
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    let mut models = vec![nn];
    for l in lambdas {
        models.push(ws.load_model(&ws.regnn_path(level, l))?);
    }
    Ok(models)
}

fn write_sweep(ws: &Workspace, dir: &std::path::Path, name: &str, rows: &[SweepRow]) -> anyhow::Result<()> {
    let names = ws.display_names();
    write_csv(&dir.join(format!("{name}.csv")), |w| write_sweep_csv(rows, &names, w))?;
    write_json(&dir.join(format!("{name}.json")), &rows)
}

pub fn run(ws: &Workspace, levels: &[UncertaintyLevel], sweep: bool) -> anyhow::Result<()> {
    let config = &ws.config;
    let nn = ws.load_model(&ws.nn_path())?;
    let sim = simulation_config(config, config.stage_seed(SIMULATE_STREAM));
    for &level in levels {
        let spec = ws.spec(level)?;
        let regnn = ws.load_model(&ws.regnn_path(level, config.model.regnn_lambda))?;
        let (lambda, selection) = match config.explainer.suppress_lambda {
            Some(l) => (l, Vec::new()),
            None => select_suppression_lambda(&nn, &ws.validation(), &spec, &config.explainer.lambda_candidates, &sim)?,
        };
        eprintln!("simulating {level} uncertainty on {} instances (suppression lambda {lambda})", ws.test.len());
        let res = run_simulation(&nn, &regnn, &ws.test, &spec, lambda, &sim)?;
        let dir = ws.out().join("simulate").join(level.to_string());
        for t in Technique::ALL {
            write_csv(&dir.join(format!("records_{t}.csv")), |w| write_records_csv(&res.records_for(t), w))?;
        }
        write_json(&dir.join("records.json"), &res.records)?;
        write_csv(&dir.join("curve_reg_lime_vs_lime.csv"), |w| res.explainer_curve.write_csv(w))?;
        write_csv(&dir.join("curve_ig_regnn_vs_ig_nn.csv"), |w| res.predictor_curve.write_csv(w))?;
        write_json(
            &dir.join("curves.json"),
            &serde_json::json!({
                "reg_lime_vs_lime": res.explainer_curve,
                "ig_regnn_vs_ig_nn": res.predictor_curve,
            }),
        )?;
        write_file(
            &dir.join("curve_reg_lime_vs_lime.svg"),
            curve_figure(&res.explainer_curve, &format!("Regularized explainer vs LIME ({level})")),
        )?;
        write_file(
            &dir.join("curve_ig_regnn_vs_ig_nn.svg"),
            curve_figure(&res.predictor_curve, &format!("IG of regularized vs baseline network ({level})")),
        )?;
        write_csv(&dir.join("distances.csv"), |w| write_distances_csv(&res.distances, w))?;
        let summary = Summary {
            level,
            instances: ws.test.len(),
            n_samples: sim.n_samples,
            seed: sim.seed,
            suppress_lambda: lambda,
            lambda_selection: selection,
            regnn_lambda: res.regnn_lambda,
            explainer_trend: res.explainer_curve.trend(),
            predictor_trend: res.predictor_curve.trend(),
            techniques: Technique::ALL.iter().map(|&t| summarize(t, &res.records_for(t))).collect(),
            distance_medians: res.distance_medians.clone(),
        };
        write_json(&dir.join("summary.json"), &summary)?;

        if sweep {
            let sweep_config = SweepConfig {
                n_samples: config.simulation.n_samples,
                seed: config.stage_seed(SWEEP_STREAM),
                lime: config.lime(),
                ig_steps: config.simulation.ig_steps,
            };
            eprintln!("sweeping explainer and predictor penalties ({level})");
            let rows = explainer_sweep(&nn, &ws.test, &spec, &config.explainer.sweep_lambdas, &sweep_config)?;
            write_sweep(ws, &dir, "sweep_explainer", &rows)?;
            let models = sweep_models(ws, level, nn.clone())?;
            let refs: Vec<&MlpPredictor> = models.iter().collect();
            let rows = predictor_sweep(&refs, &nn, &ws.test, &spec, &sweep_config)?;
            write_sweep(ws, &dir, "sweep_predictor", &rows)?;
        }
        eprintln!("wrote {}", dir.display());
    }
    Ok(())
}
