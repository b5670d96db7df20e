//! Controlled stimulus selection: perturb test instances, keep the ones near
//! the decision threshold whose prediction agrees with the label, cluster
//! them, and draw a class-balanced stratified sample.

use std::io::Write;

use kodama::Method;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{StandardizedDataset, UncertaintySpec};
use crate::error::{check_dim, Error, Result};
use crate::explainer::{fit_lime, fit_regularized_lime, LimeConfig, LinearExplanation};
use crate::matrix::Matrix;
use crate::predictor::Predictor;
use crate::propagate::sample_hypotheticals;
use crate::rng;
use crate::stats;

/// Internal labels are multiplied by this for display.
pub const DISPLAY_SCALE: f64 = 10.0;

/// Two-sided 90% normal quantile, used for reading intervals.
const Z90: f64 = 1.6448536269514722;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusCandidate {
    pub base_instance_id: usize,
    /// Index of the perturbation within its base instance.
    pub perturbation: usize,
    /// Standardized features of the hypothetical instance.
    pub perturbed_features: Vec<f64>,
    pub predicted_score: f64,
    pub actual_score: f64,
    pub attribution: Vec<f64>,
    pub attribution_ci: Vec<f64>,
    pub suppressed_attribution: Vec<f64>,
    pub suppressed_attribution_ci: Vec<f64>,
    pub score_ci: f64,
}

impl StimulusCandidate {
    pub fn is_accept(&self, threshold: f64) -> bool {
        self.predicted_score > threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StimulusConfig {
    pub k_per_instance: usize,
    pub seed: u64,
    pub lime: LimeConfig,
    /// Strength of the suppressed surrogate shown next to the baseline one.
    pub suppress_lambda: f64,
    /// Hypotheticals used for the interval of each candidate.
    pub n_hypotheticals: usize,
    /// Open score window on the display scale.
    pub window: (f64, f64),
    /// Decision threshold on the display scale.
    pub threshold: f64,
    pub n_clusters: usize,
    pub n_total: usize,
    pub n_practice: usize,
}

impl Default for StimulusConfig {
    fn default() -> Self {
        Self {
            k_per_instance: 50,
            seed: 0,
            lime: LimeConfig::default(),
            suppress_lambda: 1.0,
            n_hypotheticals: 150,
            window: (40.0, 60.0),
            threshold: 50.0,
            n_clusters: 10,
            n_total: 34,
            n_practice: 4,
        }
    }
}

impl StimulusConfig {
    /// Window and threshold on the label scale.
    pub fn internal_window(&self) -> ((f64, f64), f64) {
        ((self.window.0 / DISPLAY_SCALE, self.window.1 / DISPLAY_SCALE), self.threshold / DISPLAY_SCALE)
    }
}

fn column_ci(rows: &[Vec<f64>], d: usize) -> Vec<f64> {
    (0..d).map(|j| stats::ci90_halfwidth(&rows.iter().map(|r| r[j]).collect::<Vec<_>>())).collect()
}

fn interval_of(expl: &LinearExplanation, hyp: &Matrix) -> Result<Vec<f64>> {
    let rows: Vec<Vec<f64>> = hyp.rows().map(|x| expl.attributions(x)).collect::<Result<_>>()?;
    Ok(column_ci(&rows, expl.dim()))
}

fn check_perturb_args<P: Predictor + ?Sized>(
    model: &P,
    test_set: &StandardizedDataset,
    spec: &UncertaintySpec,
    config: &StimulusConfig,
) -> Result<()> {
    if config.k_per_instance == 0 {
        return Err(Error::arg("k_per_instance must be >= 1"));
    }
    if config.n_hypotheticals < 2 {
        return Err(Error::arg("need at least 2 hypotheticals per candidate"));
    }
    check_dim(test_set.dim(), spec.dim())?;
    check_dim(test_set.dim(), model.input_dim())
}

/// Perturbed points with their prediction; explanation fields left empty.
fn perturb_points<P: Predictor + ?Sized>(
    model: &P,
    test_set: &StandardizedDataset,
    spec: &UncertaintySpec,
    config: &StimulusConfig,
) -> Result<Vec<StimulusCandidate>> {
    let k = config.k_per_instance;
    let mut out = Vec::with_capacity(k * test_set.len());
    for i in 0..test_set.len() {
        let seed = rng::derive_seed(config.seed, 3 * i as u64);
        let perturbed = sample_hypotheticals(test_set.features.row(i), spec, k, seed)?;
        for (j, x) in perturbed.samples.rows().enumerate() {
            let predicted = model.predict_point(x);
            if !predicted.is_finite() {
                return Err(Error::Propagation { sample: j, reason: "model output is not finite".into() });
            }
            out.push(StimulusCandidate {
                base_instance_id: i,
                perturbation: j,
                perturbed_features: x.to_vec(),
                predicted_score: predicted,
                actual_score: test_set.labels[i],
                attribution: Vec::new(),
                attribution_ci: Vec::new(),
                suppressed_attribution: Vec::new(),
                suppressed_attribution_ci: Vec::new(),
                score_ci: 0.0,
            });
        }
    }
    Ok(out)
}

/// Fills the explanation and interval fields of a perturbed point. Seeds
/// depend only on the candidate's own indices, so explaining a subset gives
/// the same values as explaining everything.
fn explain_candidate<P: Predictor + ?Sized>(
    model: &P,
    spec: &UncertaintySpec,
    config: &StimulusConfig,
    c: &mut StimulusCandidate,
) -> Result<()> {
    let base = c.base_instance_id as u64;
    let j = c.perturbation as u64;
    let x = &c.perturbed_features;
    let nbhd = config.lime.neighborhood(x, rng::derive_seed(rng::derive_seed(config.seed, 3 * base + 1), j))?;
    let lime = fit_lime(model, &nbhd, config.lime.baseline_lambda)?;
    let reg = fit_regularized_lime(model, &nbhd, spec, config.suppress_lambda)?;
    let hyp_seed = rng::derive_seed(rng::derive_seed(config.seed, 3 * base + 2), j);
    let hyp = sample_hypotheticals(x, spec, config.n_hypotheticals, hyp_seed)?;
    let scores: Vec<f64> = hyp.samples.rows().map(|s| model.predict_point(s)).collect();
    if let Some(k) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Propagation { sample: k, reason: "model output is not finite".into() });
    }
    c.attribution = lime.attributions(x)?;
    c.attribution_ci = interval_of(&lime, &hyp.samples)?;
    c.suppressed_attribution = reg.attributions(x)?;
    c.suppressed_attribution_ci = interval_of(&reg, &hyp.samples)?;
    c.score_ci = stats::ci90_halfwidth(&scores);
    Ok(())
}

fn explain_all<P: Predictor + ?Sized>(
    model: &P,
    spec: &UncertaintySpec,
    config: &StimulusConfig,
    cands: &mut [StimulusCandidate],
) -> Result<()> {
    cands.par_iter_mut().try_for_each(|c| explain_candidate(model, spec, config, c))
}

/// `k` Gaussian perturbations of every test instance, each explained by the
/// baseline and the suppressed surrogate, with 90% intervals from fresh
/// hypotheticals around the perturbed point.
pub fn perturb_candidates<P: Predictor + ?Sized>(
    model: &P,
    test_set: &StandardizedDataset,
    spec: &UncertaintySpec,
    config: &StimulusConfig,
) -> Result<Vec<StimulusCandidate>> {
    check_perturb_args(model, test_set, spec, config)?;
    let mut cands = perturb_points(model, test_set, spec, config)?;
    explain_all(model, spec, config, &mut cands)?;
    Ok(cands)
}

/// Sizes after each filter stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterCounts {
    pub candidates: usize,
    pub in_window: usize,
    pub side_consistent: usize,
}

fn side(v: f64, threshold: f64) -> i8 {
    if v > threshold {
        1
    } else if v < threshold {
        -1
    } else {
        0
    }
}

/// Keeps candidates with `low < predicted < high` whose prediction and label
/// lie strictly on the same side of `threshold`. An empty result is not an
/// error; check [`FilterCounts`].
pub fn filter_candidates(
    cands: &[StimulusCandidate],
    score_window: (f64, f64),
    threshold: f64,
) -> Result<(Vec<StimulusCandidate>, FilterCounts)> {
    let (low, high) = score_window;
    if !(low < threshold && threshold < high) {
        return Err(Error::arg(format!("need low < threshold < high, got {low} < {threshold} < {high}")));
    }
    let in_window: Vec<&StimulusCandidate> =
        cands.iter().filter(|c| low < c.predicted_score && c.predicted_score < high).collect();
    let kept: Vec<StimulusCandidate> = in_window
        .iter()
        .filter(|c| {
            let s = side(c.predicted_score, threshold);
            s != 0 && s == side(c.actual_score, threshold)
        })
        .map(|c| (*c).clone())
        .collect();
    let counts = FilterCounts { candidates: cands.len(), in_window: in_window.len(), side_consistent: kept.len() };
    Ok((kept, counts))
}

/// Columns z-scored independently; constant columns become zero.
fn zscore_columns(m: &mut Matrix) {
    for j in 0..m.ncols() {
        let col = m.column(j);
        let mu = stats::mean(&col);
        let sd = stats::sd_population(&col);
        for i in 0..m.nrows() {
            let v = if sd > 0.0 { (m.get(i, j) - mu) / sd } else { 0.0 };
            m.set(i, j, v);
        }
    }
}

/// The clustering representation of each candidate.
pub fn cluster_features(cands: &[StimulusCandidate]) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = cands
        .iter()
        .map(|c| {
            let mut r = c.perturbed_features.clone();
            r.extend(&c.attribution);
            r.push(c.predicted_score);
            r.extend(&c.attribution_ci);
            r.push(c.score_ci);
            r.push(c.actual_score);
            r
        })
        .collect();
    let mut m = Matrix::from_rows(&rows)?;
    zscore_columns(&mut m);
    Ok(m)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Ward agglomerative clustering of the rows of `points`, cut at `k`
/// clusters. Labels are numbered by first appearance.
pub fn ward_clusters(points: &Matrix, k: usize) -> Result<Vec<usize>> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::arg(format!("cannot form {k} clusters from {n} points")));
    }
    if n == 1 {
        return Ok(vec![0]);
    }
    let mut condensed = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d2: f64 = points.row(i).iter().zip(points.row(j)).map(|(a, b)| (a - b).powi(2)).sum();
            condensed.push(d2.sqrt());
        }
    }
    let dendrogram = kodama::linkage(&mut condensed, n, Method::Ward);
    // node ids follow the usual convention: leaves 0..n, merge s creates n + s
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    for (s, step) in dendrogram.steps().iter().take(n - k).enumerate() {
        parent[step.cluster1] = n + s;
        parent[step.cluster2] = n + s;
    }
    let mut labels = Vec::with_capacity(n);
    let mut seen: Vec<usize> = Vec::with_capacity(k);
    for i in 0..n {
        let root = find(&mut parent, i);
        let label = match seen.iter().position(|&r| r == root) {
            Some(l) => l,
            None => {
                seen.push(root);
                seen.len() - 1
            }
        };
        labels.push(label);
    }
    Ok(labels)
}

/// Ward clusters over [`cluster_features`].
pub fn cluster_candidates(cands: &[StimulusCandidate], k_clusters: usize) -> Result<Vec<usize>> {
    if k_clusters > cands.len() || cands.is_empty() {
        return Err(Error::arg(format!("cannot form {k_clusters} clusters from {} candidates", cands.len())));
    }
    ward_clusters(&cluster_features(cands)?, k_clusters)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusSet {
    pub practice: Vec<StimulusCandidate>,
    pub main: Vec<StimulusCandidate>,
    /// Cluster of each stimulus, practice first, then main.
    pub cluster_labels: Vec<usize>,
    pub seed: u64,
}

impl StimulusSet {
    pub fn len(&self) -> usize {
        self.practice.len() + self.main.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(accept, reject)` counts of the main trials.
    pub fn main_balance(&self, threshold: f64) -> (usize, usize) {
        let accept = self.main.iter().filter(|c| c.is_accept(threshold)).count();
        (accept, self.main.len() - accept)
    }

    /// Mean and sd of `|predicted - threshold|` over the main trials.
    pub fn closeness(&self, threshold: f64) -> (f64, f64) {
        let d: Vec<f64> = self.main.iter().map(|c| (c.predicted_score - threshold).abs()).collect();
        (stats::mean(&d), stats::sd_sample(&d))
    }
}

/// Largest-remainder apportionment of `total` over `sizes`; ties go to the
/// lower index.
pub fn largest_remainder(sizes: &[usize], total: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return vec![0; sizes.len()];
    }
    let mut alloc: Vec<usize> = sizes.iter().map(|&s| s * total / n).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| (sizes[b] * total % n).cmp(&(sizes[a] * total % n)).then(a.cmp(&b)));
    let missing = total - alloc.iter().sum::<usize>();
    for &c in order.iter().take(missing) {
        alloc[c] += 1;
    }
    alloc
}

/// Fills `want` units into clusters, preferring those whose share of the
/// allocation is still furthest from `target`, never exceeding `avail`.
fn fill(target: &[f64], avail: &[usize], want: usize) -> Option<Vec<usize>> {
    let mut got: Vec<usize> = target.iter().zip(avail).map(|(t, &a)| (t.floor() as usize).min(a)).collect();
    let mut have: usize = got.iter().sum();
    while have > want {
        // floors can only overshoot when the targets sum past `want`
        let c = (0..got.len()).filter(|&c| got[c] > 0).max_by(|&a, &b| {
            (got[a] as f64 - target[a]).total_cmp(&(got[b] as f64 - target[b])).then(b.cmp(&a))
        })?;
        got[c] -= 1;
        have -= 1;
    }
    while have < want {
        let c = (0..got.len())
            .filter(|&c| got[c] < avail[c])
            .max_by(|&a, &b| (target[a] - got[a] as f64).total_cmp(&(target[b] - got[b] as f64)).then(b.cmp(&a)))?;
        got[c] += 1;
        have += 1;
    }
    Some(got)
}

/// Class-balanced stratified sample of `n_total` candidates.
///
/// Clusters receive a largest-remainder share of `n_total` proportional to
/// their size; within that share, half the draws are rejects (predicted
/// below `threshold`). When a cluster lacks one class, the shortfall moves to
/// the clusters with the most room. The first `n_practice` stimuli (balanced
/// as well) form the practice block.
pub fn stratified_select(
    cands: &[StimulusCandidate],
    labels: &[usize],
    n_total: usize,
    n_practice: usize,
    threshold: f64,
    seed: u64,
) -> Result<StimulusSet> {
    check_dim(cands.len(), labels.len())?;
    if n_practice > n_total {
        return Err(Error::arg("practice block larger than the selection"));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut accept: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut reject: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, (c, &l)) in cands.iter().zip(labels).enumerate() {
        if c.is_accept(threshold) {
            accept[l].push(i);
        } else {
            reject[l].push(i);
        }
    }
    let sizes: Vec<usize> = (0..k).map(|c| accept[c].len() + reject[c].len()).collect();
    let alloc = largest_remainder(&sizes, n_total);
    let need_reject = n_total / 2;
    let need_accept = n_total - need_reject;
    let avail_reject: Vec<usize> = reject.iter().map(Vec::len).collect();
    let avail_accept: Vec<usize> = accept.iter().map(Vec::len).collect();
    let balance_error = || Error::Balance {
        needed_accept: need_accept,
        needed_reject: need_reject,
        available_accept: avail_accept.iter().sum(),
        available_reject: avail_reject.iter().sum(),
    };
    if n_total > cands.len() {
        return Err(balance_error());
    }
    let reject_target: Vec<f64> = alloc.iter().map(|&a| a as f64 / 2.0).collect();
    let n_reject = fill(&reject_target, &avail_reject, need_reject).ok_or_else(balance_error)?;
    let accept_target: Vec<f64> = alloc.iter().zip(&n_reject).map(|(&a, &r)| a as f64 - r as f64).collect();
    let n_accept = fill(&accept_target, &avail_accept, need_accept).ok_or_else(balance_error)?;

    let mut r = rng::seeded(seed);
    let mut picked: Vec<usize> = Vec::with_capacity(n_total);
    for c in 0..k {
        for (pool, take) in [(&mut reject[c], n_reject[c]), (&mut accept[c], n_accept[c])] {
            pool.shuffle(&mut r);
            picked.extend(&pool[..take]);
        }
    }
    picked.shuffle(&mut r);

    let practice_reject = n_practice / 2;
    let practice_accept = n_practice - practice_reject;
    let (mut pa, mut pr) = (0, 0);
    let mut practice = Vec::with_capacity(n_practice);
    let mut main = Vec::with_capacity(n_total - n_practice);
    for &i in &picked {
        let is_accept = cands[i].is_accept(threshold);
        if is_accept && pa < practice_accept {
            pa += 1;
            practice.push(i);
        } else if !is_accept && pr < practice_reject {
            pr += 1;
            practice.push(i);
        } else {
            main.push(i);
        }
    }
    let cluster_labels = practice.iter().chain(&main).map(|&i| labels[i]).collect();
    Ok(StimulusSet {
        practice: practice.into_iter().map(|i| cands[i].clone()).collect(),
        main: main.into_iter().map(|i| cands[i].clone()).collect(),
        cluster_labels,
        seed,
    })
}

/// Candidate counts at every stage of [`select_stimuli`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionCounts {
    pub filter: FilterCounts,
    pub clusters: usize,
}

#[derive(Debug)]
pub enum Selection {
    Selected(StimulusSet, SelectionCounts),
    /// Nothing survived the filters.
    Empty(FilterCounts),
}

/// Perturb, filter, cluster and sample with one configuration.
pub fn select_stimuli<P: Predictor + ?Sized>(
    model: &P,
    test_set: &StandardizedDataset,
    spec: &UncertaintySpec,
    config: &StimulusConfig,
) -> Result<Selection> {
    check_perturb_args(model, test_set, spec, config)?;
    // the filters only look at scores, so explain the survivors alone
    let cands = perturb_points(model, test_set, spec, config)?;
    let (window, threshold) = config.internal_window();
    let (mut kept, counts) = filter_candidates(&cands, window, threshold)?;
    if kept.is_empty() {
        return Ok(Selection::Empty(counts));
    }
    explain_all(model, spec, config, &mut kept)?;
    let clusters = config.n_clusters.min(kept.len());
    let labels = cluster_candidates(&kept, clusters)?;
    let set = stratified_select(&kept, &labels, config.n_total, config.n_practice, threshold, config.seed)?;
    Ok(Selection::Selected(set, SelectionCounts { filter: counts, clusters }))
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

/// One stimulus as a participant would see it: raw readings with their
/// uncertainty, subscores and scores on the 0 to 100 scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplayStimulus {
    pub block: String,
    pub trial: usize,
    pub cluster: usize,
    pub base_instance_id: usize,
    pub perturbation: usize,
    pub readings: Vec<f64>,
    pub reading_ci: Vec<f64>,
    pub subscores: Vec<f64>,
    pub subscore_ci: Vec<f64>,
    pub suppressed_subscores: Vec<f64>,
    pub suppressed_subscore_ci: Vec<f64>,
    pub predicted_score: f64,
    pub score_ci: f64,
    pub actual_score: f64,
    pub decision: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplayStimulusSet {
    pub features: Vec<String>,
    pub seed: u64,
    pub threshold: f64,
    pub closeness_mean: f64,
    pub closeness_sd: f64,
    pub stimuli: Vec<DisplayStimulus>,
}

/// Maps a selection to the display scale. `test_set` supplies the scaler
/// that turns standardized features back into readings.
pub fn to_display(
    set: &StimulusSet,
    test_set: &StandardizedDataset,
    spec: &UncertaintySpec,
    display_names: &[String],
    threshold: f64,
) -> Result<DisplayStimulusSet> {
    check_dim(test_set.dim(), display_names.len())?;
    check_dim(test_set.dim(), spec.dim())?;
    let scaler = &test_set.scaler;
    let reading_ci: Vec<f64> = spec.sigma.iter().zip(&scaler.sds).map(|(s, sd)| round3(Z90 * s * sd)).collect();
    let scale = |v: &[f64]| v.iter().map(|a| round1(a * DISPLAY_SCALE)).collect::<Vec<_>>();
    let internal_threshold = threshold / DISPLAY_SCALE;
    let mut stimuli = Vec::with_capacity(set.len());
    let blocks = set.practice.iter().map(|c| ("practice", c)).chain(set.main.iter().map(|c| ("main", c)));
    for (n, ((block, c), &cluster)) in blocks.zip(&set.cluster_labels).enumerate() {
        let trial = if block == "practice" { n } else { n - set.practice.len() };
        stimuli.push(DisplayStimulus {
            block: block.to_string(),
            trial,
            cluster,
            base_instance_id: c.base_instance_id,
            perturbation: c.perturbation,
            readings: scaler.inverse_row(&c.perturbed_features).into_iter().map(round3).collect(),
            reading_ci: reading_ci.clone(),
            subscores: scale(&c.attribution),
            subscore_ci: scale(&c.attribution_ci),
            suppressed_subscores: scale(&c.suppressed_attribution),
            suppressed_subscore_ci: scale(&c.suppressed_attribution_ci),
            predicted_score: round1(c.predicted_score * DISPLAY_SCALE),
            score_ci: round1(c.score_ci * DISPLAY_SCALE),
            actual_score: round1(c.actual_score * DISPLAY_SCALE),
            decision: if c.is_accept(internal_threshold) { "accept" } else { "reject" }.to_string(),
        });
    }
    let (mean, sd) = set.closeness(internal_threshold);
    Ok(DisplayStimulusSet {
        features: display_names.to_vec(),
        seed: set.seed,
        threshold,
        closeness_mean: round2(mean * DISPLAY_SCALE),
        closeness_sd: round2(sd * DISPLAY_SCALE),
        stimuli,
    })
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Readings keep three decimals; acidities and sulphates are small numbers.
fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

pub fn write_display_csv<W: Write>(set: &DisplayStimulusSet, mut w: W) -> std::io::Result<()> {
    write!(w, "block,trial,cluster,base_instance_id,perturbation")?;
    let groups = ["reading", "reading_ci", "subscore", "subscore_ci", "suppressed_subscore", "suppressed_subscore_ci"];
    for g in groups {
        for f in &set.features {
            write!(w, ",{g}[{f}]")?;
        }
    }
    writeln!(w, ",predicted_score,score_ci,actual_score,decision")?;
    for s in &set.stimuli {
        write!(w, "{},{},{},{},{}", s.block, s.trial, s.cluster, s.base_instance_id, s.perturbation)?;
        for v in [&s.readings, &s.reading_ci, &s.subscores, &s.subscore_ci, &s.suppressed_subscores, &s.suppressed_subscore_ci] {
            for x in v.iter() {
                write!(w, ",{x}")?;
            }
        }
        writeln!(w, ",{},{},{},{}", s.predicted_score, s.score_ci, s.actual_score, s.decision)?;
    }
    Ok(())
}
