use serde::Serialize;
use uncertain_attr::data::UncertaintyLevel;
use uncertain_attr::explainer::{fit_lime, fit_regularized_lime, LinearExplanation};
use uncertain_attr::metrics::Technique;
use uncertain_attr::predictor::{integrated_gradients, IgAttribution, MlpPredictor, Predictor};
use uncertain_attr::propagate::{
    attribution_distribution_with_grid, sample_hypotheticals, AttributionDistribution, Density, DensityEstimate,
    HypotheticalSet, ScoreSummary,
};
use uncertain_attr::rng::derive_seed;
use uncertain_attr::simulation::select_suppression_lambda;
use uncertain_attr::stimuli::DISPLAY_SCALE;

use crate::config::{EXPLAIN_STREAM, SIMULATE_STREAM};
use crate::simulate::simulation_config;
use crate::svg::{Spread, Tornado, UncertaintyStyle};
use crate::workspace::{write_file, write_json, Workspace};
use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Propagation {
    /// One surrogate fitted at the instance; only its inputs vary.
    Fixed,
    /// The surrogate is refitted at every hypothetical.
    Refit,
}

pub struct ExplainArgs {
    pub instance: usize,
    pub techniques: Vec<Technique>,
    pub style: UncertaintyStyle,
    pub propagation: Propagation,
    pub emit_samples: bool,
    pub level: Option<UncertaintyLevel>,
}

/// Parses a comma-separated technique list; `all` selects every technique.
pub fn parse_techniques(s: &str) -> anyhow::Result<Vec<Technique>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part == "all" {
            out.extend(Technique::ALL);
            continue;
        }
        let t = Technique::ALL.into_iter().find(|t| t.as_str() == part).ok_or_else(|| {
            let valid: Vec<&str> = Technique::ALL.iter().map(|t| t.as_str()).collect();
            UsageError(format!("unknown technique `{part}`; valid names: {}, all", valid.join(", ")))
        })?;
        out.push(t);
    }
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(UsageError("no technique given".into()).into());
    }
    Ok(out)
}

#[derive(Serialize)]
#[serde(untagged)]
enum Explanation {
    Linear(LinearExplanation),
    Ig(IgAttribution),
}

#[derive(Serialize)]
struct DisplayValues {
    subscores: Vec<f64>,
    subscore_ci: Vec<f64>,
    predicted_score: f64,
    score_ci: f64,
}

#[derive(Serialize)]
struct TechniqueReport {
    technique: Technique,
    model: String,
    explanation: Explanation,
    attributions: Vec<f64>,
    distribution: AttributionDistribution,
    /// Model output over the hypotheticals.
    score: ScoreSummary,
    predicted_score: f64,
    display: DisplayValues,
}

#[derive(Serialize)]
struct ExplanationReport {
    instance: usize,
    level: UncertaintyLevel,
    features: Vec<String>,
    display_names: Vec<String>,
    readings: Vec<f64>,
    sigma: Vec<f64>,
    actual_score: f64,
    suppress_lambda: Option<f64>,
    regnn_lambda: f64,
    propagation: Propagation,
    n_hypotheticals: usize,
    seed: u64,
    display_scale: f64,
    techniques: Vec<TechniqueReport>,
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

fn to_display(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| round1(x * DISPLAY_SCALE)).collect()
}

fn display_density(d: &DensityEstimate) -> DensityEstimate {
    match d {
        DensityEstimate::Point { value } => DensityEstimate::Point { value: value * DISPLAY_SCALE },
        DensityEstimate::Smooth(s) => DensityEstimate::Smooth(Density {
            grid: s.grid.iter().map(|g| g * DISPLAY_SCALE).collect(),
            density: s.density.iter().map(|p| p / DISPLAY_SCALE).collect(),
            bandwidth: s.bandwidth * DISPLAY_SCALE,
        }),
    }
}

struct Context<'a> {
    ws: &'a Workspace,
    nn: &'a MlpPredictor,
    regnn: Option<&'a MlpPredictor>,
    regnn_name: String,
    x0: Vec<f64>,
    hyp: HypotheticalSet,
    nbhd_seed: u64,
    suppress_lambda: Option<f64>,
    args: &'a ExplainArgs,
}

impl Context<'_> {
    fn fit(&self, t: Technique, x: &[f64], seed: u64) -> uncertain_attr::Result<LinearExplanation> {
        let lime = self.ws.config.lime();
        let nbhd = lime.neighborhood(x, seed)?;
        match t {
            Technique::RegLime => fit_regularized_lime(self.nn, &nbhd, &self.hyp.spec, self.suppress_lambda.expect("selected when requested")),
            _ => fit_lime(self.nn, &nbhd, lime.baseline_lambda),
        }
    }

    fn report(&self, t: Technique) -> anyhow::Result<TechniqueReport> {
        let grid = self.ws.config.display.grid_size;
        let steps = self.ws.config.simulation.ig_steps;
        let (model, model_name, explanation, attributions, distribution) = match t {
            Technique::Lime | Technique::RegLime => {
                let expl = self.fit(t, &self.x0, self.nbhd_seed)?;
                let attrs = expl.attributions(&self.x0)?;
                let dist = match self.args.propagation {
                    Propagation::Fixed => {
                        attribution_distribution_with_grid(|_, x| expl.attributions(x), &self.hyp, grid)?
                    }
                    Propagation::Refit => attribution_distribution_with_grid(
                        |k, x| self.fit(t, x, derive_seed(self.nbhd_seed, k as u64 + 1))?.attributions(x),
                        &self.hyp,
                        grid,
                    )?,
                };
                (self.nn, "nn".to_string(), Explanation::Linear(expl), attrs, dist)
            }
            Technique::IgNn | Technique::IgRegnn => {
                let (model, name) = if t == Technique::IgNn {
                    (self.nn, "nn".to_string())
                } else {
                    (self.regnn.expect("loaded when requested"), self.regnn_name.clone())
                };
                let baseline = vec![0.0; self.x0.len()];
                let ig = integrated_gradients(model, &self.x0, &baseline, steps)?;
                let attrs = ig.attributions.clone();
                let dist = attribution_distribution_with_grid(
                    |_, x| Ok(integrated_gradients(model, x, &baseline, steps)?.attributions),
                    &self.hyp,
                    grid,
                )?;
                (model, name, Explanation::Ig(ig), attrs, dist)
            }
        };
        let scores: Vec<f64> = self.hyp.samples.rows().map(|x| model.predict_point(x)).collect();
        let score = ScoreSummary::of(&scores);
        let predicted = model.predict(&self.x0)?;
        let display = DisplayValues {
            subscores: to_display(&attributions),
            subscore_ci: to_display(&distribution.ci90_halfwidth),
            predicted_score: round1(predicted * DISPLAY_SCALE),
            score_ci: round1(score.ci90_halfwidth * DISPLAY_SCALE),
        };
        let distribution = if self.args.emit_samples { distribution } else { distribution.without_samples() };
        Ok(TechniqueReport {
            technique: t,
            model: model_name,
            explanation,
            attributions,
            distribution,
            score,
            predicted_score: predicted,
            display,
        })
    }
}

fn spreads(r: &TechniqueReport, style: UncertaintyStyle) -> Vec<Spread> {
    match style {
        UncertaintyStyle::Ci => r.distribution.ci90_halfwidth.iter().map(|h| Spread::Interval(h * DISPLAY_SCALE)).collect(),
        UncertaintyStyle::Violin => {
            r.distribution.density_grid.iter().map(|d| Spread::Density(display_density(d))).collect()
        }
    }
}

/// Baseline/Show/Suppress/ShowSuppress charts of one explanation family,
/// drawn on a common axis.
fn family_figures(
    ws: &Workspace,
    dir: &std::path::Path,
    family: &str,
    base: Option<&TechniqueReport>,
    reg: Option<&TechniqueReport>,
    style: UncertaintyStyle,
) -> anyhow::Result<()> {
    let names = ws.display_names();
    let mut charts: Vec<(&str, Vec<f64>, Option<Vec<Spread>>, String)> = Vec::new();
    for (r, plain, shown) in [(base, "baseline", "show"), (reg, "suppress", "show_suppress")] {
        let Some(r) = r else { continue };
        let values: Vec<f64> = r.attributions.iter().map(|a| a * DISPLAY_SCALE).collect();
        let caption = format!("predicted score {:.1}", r.display.predicted_score);
        let caption_ci = format!("predicted score {:.1} ± {:.1}", r.display.predicted_score, r.display.score_ci);
        charts.push((plain, values.clone(), None, caption));
        charts.push((shown, values, Some(spreads(r, style)), caption_ci));
    }
    let tornados: Vec<(&str, Tornado<'_>)> = charts
        .iter()
        .map(|(variant, values, spreads, caption)| {
            (*variant, Tornado { title: variant, features: &names, values, spreads: spreads.as_deref(), caption })
        })
        .collect();
    let range = tornados.iter().map(|(_, t)| t.extent()).fold(0.0, f64::max);
    for (variant, t) in &tornados {
        let title = format!("{family}: {variant}");
        let t = Tornado { title: &title, ..*t };
        write_file(&dir.join(format!("{family}_{variant}.svg")), t.render(range))?;
    }
    Ok(())
}

pub fn run(ws: &Workspace, args: &ExplainArgs) -> anyhow::Result<()> {
    if args.instance >= ws.test.len() {
        return Err(UsageError(format!(
            "instance {} is out of range; the test split has {} rows",
            args.instance,
            ws.test.len()
        ))
        .into());
    }
    let config = &ws.config;
    let level = args.level.unwrap_or(config.uncertainty.level);
    let spec = ws.spec(level)?;
    let nn = ws.load_model(&ws.nn_path())?;
    let regnn_path = ws.regnn_path(level, config.model.regnn_lambda);
    let regnn = if args.techniques.contains(&Technique::IgRegnn) { Some(ws.load_model(&regnn_path)?) } else { None };
    let suppress_lambda = match config.explainer.suppress_lambda {
        Some(l) => Some(l),
        None if args.techniques.contains(&Technique::RegLime) => {
            // same selection as `simulate`, so both commands agree
            let sim = simulation_config(config, config.stage_seed(SIMULATE_STREAM));
            Some(select_suppression_lambda(&nn, &ws.validation(), &spec, &config.explainer.lambda_candidates, &sim)?.0)
        }
        None => None,
    };
    let seed = config.stage_seed(EXPLAIN_STREAM);
    let i = args.instance as u64;
    let x0 = ws.test.features.row(args.instance).to_vec();
    let hyp = sample_hypotheticals(&x0, &spec, config.display.n_samples, derive_seed(seed, 2 * i + 1))?;
    let ctx = Context {
        ws,
        nn: &nn,
        regnn: regnn.as_ref(),
        regnn_name: regnn_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        x0: x0.clone(),
        hyp,
        nbhd_seed: derive_seed(seed, 2 * i),
        suppress_lambda,
        args,
    };
    let reports: Vec<TechniqueReport> = args.techniques.iter().map(|&t| ctx.report(t)).collect::<anyhow::Result<_>>()?;

    let dir = ws.out().join("explain").join(format!("instance_{}", args.instance));
    let find = |t: Technique| reports.iter().find(|r| r.technique == t);
    if find(Technique::Lime).is_some() || find(Technique::RegLime).is_some() {
        family_figures(ws, &dir, "lime", find(Technique::Lime), find(Technique::RegLime), args.style)?;
    }
    if find(Technique::IgNn).is_some() || find(Technique::IgRegnn).is_some() {
        family_figures(ws, &dir, "ig", find(Technique::IgNn), find(Technique::IgRegnn), args.style)?;
    }
    let report = ExplanationReport {
        instance: args.instance,
        level,
        features: ws.train.feature_names.clone(),
        display_names: ws.display_names(),
        readings: ws.train.scaler.inverse_row(&x0),
        sigma: spec.sigma.clone(),
        actual_score: ws.test.labels[args.instance],
        suppress_lambda,
        regnn_lambda: config.model.regnn_lambda,
        propagation: args.propagation,
        n_hypotheticals: config.display.n_samples,
        seed,
        display_scale: DISPLAY_SCALE,
        techniques: reports,
    };
    write_json(&dir.join("report.json"), &report)?;
    eprintln!("wrote {}", dir.display());
    Ok(())
}
