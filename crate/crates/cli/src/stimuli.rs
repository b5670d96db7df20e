use serde::Serialize;
use uncertain_attr::data::UncertaintyLevel;
use uncertain_attr::simulation::select_suppression_lambda;
use uncertain_attr::stimuli::{
    select_stimuli, to_display, write_display_csv, Selection, SelectionCounts, StimulusConfig,
};

use crate::config::{STIMULI_STREAM, SIMULATE_STREAM};
use crate::simulate::simulation_config;
use crate::workspace::{write_csv, write_json, Workspace};
use crate::EmptyResult;

#[derive(Serialize)]
struct Summary {
    level: UncertaintyLevel,
    seed: u64,
    suppress_lambda: f64,
    counts: SelectionCounts,
    practice: usize,
    main: usize,
    main_accept: usize,
    main_reject: usize,
    closeness_mean: f64,
    closeness_sd: f64,
}

pub fn run(ws: &Workspace, level: Option<UncertaintyLevel>, window: Option<(f64, f64)>) -> anyhow::Result<()> {
    let config = &ws.config;
    let level = level.unwrap_or(config.uncertainty.level);
    let spec = ws.spec(level)?;
    let nn = ws.load_model(&ws.nn_path())?;
    let s = &config.stimuli;
    let suppress_lambda = match s.suppress_lambda.or(config.explainer.suppress_lambda) {
        Some(l) => l,
        None => {
            // same selection as `simulate`, so both commands agree
            let sim = simulation_config(config, config.stage_seed(SIMULATE_STREAM));
            select_suppression_lambda(&nn, &ws.validation(), &spec, &config.explainer.lambda_candidates, &sim)?.0
        }
    };
    let stim = StimulusConfig {
        k_per_instance: s.k_per_instance,
        seed: config.stage_seed(STIMULI_STREAM),
        lime: config.lime(),
        suppress_lambda,
        n_hypotheticals: s.n_hypotheticals,
        window: window.unwrap_or(s.window),
        threshold: s.threshold,
        n_clusters: s.n_clusters,
        n_total: s.n_total,
        n_practice: s.n_practice,
    };
    eprintln!("perturbing {} test instances x {}", ws.test.len(), stim.k_per_instance);
    let (set, counts) = match select_stimuli(&nn, &ws.test, &spec, &stim)? {
        Selection::Selected(set, counts) => (set, counts),
        Selection::Empty(c) => {
            return Err(EmptyResult(format!(
                "no stimulus survived the filters: {} candidates, {} inside the window ({}, {}), {} on the same side of {} as their label",
                c.candidates, c.in_window, stim.window.0, stim.window.1, c.side_consistent, stim.threshold
            ))
            .into())
        }
    };
    let display = to_display(&set, &ws.test, &spec, &ws.display_names(), stim.threshold)?;
    let dir = ws.out().join("stimuli");
    write_json(&dir.join("stimuli.json"), &display)?;
    write_csv(&dir.join("stimuli.csv"), |w| write_display_csv(&display, w))?;
    let (_, internal_threshold) = stim.internal_window();
    let (main_accept, main_reject) = set.main_balance(internal_threshold);
    write_json(
        &dir.join("summary.json"),
        &Summary {
            level,
            seed: stim.seed,
            suppress_lambda,
            counts,
            practice: set.practice.len(),
            main: set.main.len(),
            main_accept,
            main_reject,
            closeness_mean: display.closeness_mean,
            closeness_sd: display.closeness_sd,
        },
    )?;
    eprintln!(
        "selected {} practice + {} main stimuli ({main_accept} accept / {main_reject} reject), mean closeness {:.2}",
        set.practice.len(),
        set.main.len(),
        display.closeness_mean
    );
    Ok(())
}
