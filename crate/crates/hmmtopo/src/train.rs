//! Baum-Welch training: flat initialization, forward-backward posteriors,
//! embedded re-estimation over whole utterances, and mixture splitting.
//!
//! Re-estimation is embedded: each utterance's transcript models are
//! concatenated and trained jointly, so no pre-segmentation is needed.
//! Utterances shorter than the shortest path through their concatenated
//! model are skipped (and counted), never truncated.

use std::collections::BTreeMap;

use crate::config::KvFile;
use crate::emission::{Gaussian, GmmEmission};
use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::logprob::{log_add, log_sum_exp_raw};
use crate::manifest::Corpus;
use crate::model::{CompositeModel, HmmModel, ModelSet, Node};
use crate::parallel::parallel_map;

/// Knobs for Baum-Welch training.
#[derive(Debug, Clone)]
pub struct TrainingConfig {
    /// Iteration cap per splitting stage.
    pub max_iterations: usize,
    /// Relative log-likelihood gain below which a stage stops.
    pub tolerance: f64,
    /// Mixture component targets, one per splitting stage (non-decreasing).
    pub schedule: Vec<usize>,
    /// Mean offset of a split, in per-dimension standard deviations.
    pub split_perturbation: f64,
    /// Variance floor as a fraction of the corpus global variance.
    pub var_floor_scale: f64,
    /// Mixture weight floor (weights renormalized after flooring).
    pub weight_floor: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            max_iterations: 20,
            tolerance: 1e-4,
            schedule: vec![1, 2],
            split_perturbation: 0.2,
            var_floor_scale: 1e-4,
            weight_floor: crate::emission::WEIGHT_FLOOR,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tolerance <= 0.0 {
            return Err(Error::Usage("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Usage("max_iterations must be >= 1".into()));
        }
        if self.schedule.is_empty() || self.schedule.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Usage(
                "mixture schedule must be non-empty and non-decreasing".into(),
            ));
        }
        if self.weight_floor < crate::emission::WEIGHT_FLOOR {
            return Err(Error::Usage(format!(
                "weight floor below the model invariant floor {}",
                crate::emission::WEIGHT_FLOOR
            )));
        }
        Ok(())
    }

    pub fn from_kv(mut kv: KvFile) -> Result<TrainingConfig> {
        let d = TrainingConfig::default();
        let cfg = TrainingConfig {
            max_iterations: kv.take_parsed("max_iterations", d.max_iterations)?,
            tolerance: kv.take_parsed("tolerance", d.tolerance)?,
            schedule: kv.take_list("schedule", d.schedule)?,
            split_perturbation: kv.take_parsed("split_perturbation", d.split_perturbation)?,
            var_floor_scale: kv.take_parsed("var_floor_scale", d.var_floor_scale)?,
            weight_floor: kv.take_parsed("weight_floor", d.weight_floor)?,
        };
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

// ---------------------------------------------------------------------------
// Forward-backward
// ---------------------------------------------------------------------------

/// State and edge posteriors of one utterance against one model.
#[derive(Debug, Clone)]
pub struct Posteriors {
    /// `gamma[t][i]`: probability of occupying emitting state `i` at frame
    /// `t`. Every row sums to 1.
    pub gamma: Vec<Vec<f64>>,
    /// Emitting-to-emitting support edges, row-major.
    pub edges: Vec<(usize, usize)>,
    /// `xi[t][e]`: probability of taking `edges[e]` between frames `t` and
    /// `t + 1`. Marginalizing over targets recovers `gamma[t]`.
    pub xi: Vec<Vec<f64>>,
}

struct EdgeLists {
    /// Outgoing emitting edges per state: `(target, ln a)`.
    out: Vec<Vec<(usize, f64)>>,
    /// Incoming emitting edges per state: `(source, ln a)`.
    inc: Vec<Vec<(usize, f64)>>,
    /// Flat edge list, row-major, aligned with `Posteriors::edges`.
    flat: Vec<(usize, usize, f64)>,
    /// `ln a(entry → i)` per state.
    entry: Vec<f64>,
    /// `ln a(i → exit)` per state.
    exit: Vec<f64>,
}

impl EdgeLists {
    fn new(model: &HmmModel) -> EdgeLists {
        let n = model.n_states();
        let t = model.transitions();
        let mut out = vec![Vec::new(); n];
        let mut inc = vec![Vec::new(); n];
        let mut flat = Vec::new();
        for i in 0..n {
            for (to, ln_a) in t.successors(Node::Emit(i)) {
                if let Node::Emit(j) = to {
                    out[i].push((j, ln_a));
                    inc[j].push((i, ln_a));
                    flat.push((i, j, ln_a));
                }
            }
        }
        let entry = (0..n).map(|i| t.ln_at(Node::Entry, Node::Emit(i))).collect();
        let exit = (0..n).map(|i| t.ln_at(Node::Emit(i), Node::Exit)).collect();
        EdgeLists {
            out,
            inc,
            flat,
            entry,
            exit,
        }
    }
}

/// Emission log densities for every (frame, state).
fn density_table(model: &HmmModel, features: &FeatureSequence) -> Result<Vec<Vec<f64>>> {
    if features.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: features.dim(),
        });
    }
    let n = model.n_states();
    let mut frame = vec![0.0f64; features.dim()];
    let mut table = Vec::with_capacity(features.frames());
    for t in 0..features.frames() {
        features.frame_f64(t, &mut frame);
        let row: Vec<f64> = (0..n)
            .map(|i| model.emissions()[i].log_density_unchecked(&frame))
            .collect();
        table.push(row);
    }
    Ok(table)
}

fn alignment_infeasible(model: &HmmModel, frames: usize) -> Error {
    Error::AlignmentInfeasible {
        frames,
        min_frames: model.transitions().min_path_frames().unwrap_or(usize::MAX),
    }
}

/// Exact forward-backward in the log domain.
///
/// Returns the state/edge posteriors and the total log-likelihood (the
/// forward termination value). Works on any valid model, including a
/// transcript's concatenated model.
pub fn forward_backward(
    model: &HmmModel,
    features: &FeatureSequence,
) -> Result<(Posteriors, f64)> {
    let edges = EdgeLists::new(model);
    let b = density_table(model, features)?;
    forward_backward_inner(model, &edges, &b, features.frames())
}

fn forward_backward_inner(
    model: &HmmModel,
    edges: &EdgeLists,
    b: &[Vec<f64>],
    frames: usize,
) -> Result<(Posteriors, f64)> {
    let n = model.n_states();
    let neg_inf = f64::NEG_INFINITY;

    // Forward.
    let mut alpha = vec![vec![neg_inf; n]; frames];
    for i in 0..n {
        alpha[0][i] = edges.entry[i] + b[0][i];
    }
    for t in 1..frames {
        for j in 0..n {
            let mut acc = neg_inf;
            for &(i, ln_a) in &edges.inc[j] {
                acc = log_add(acc, alpha[t - 1][i] + ln_a);
            }
            alpha[t][j] = acc + b[t][j];
        }
    }
    let terms: Vec<f64> = (0..n).map(|i| alpha[frames - 1][i] + edges.exit[i]).collect();
    let ll = log_sum_exp_raw(&terms);
    if ll == neg_inf {
        return Err(alignment_infeasible(model, frames));
    }

    // Backward.
    let mut beta = vec![vec![neg_inf; n]; frames];
    for i in 0..n {
        beta[frames - 1][i] = edges.exit[i];
    }
    for t in (0..frames - 1).rev() {
        for i in 0..n {
            let mut acc = neg_inf;
            for &(j, ln_a) in &edges.out[i] {
                acc = log_add(acc, ln_a + b[t + 1][j] + beta[t + 1][j]);
            }
            beta[t][i] = acc;
        }
    }

    // Posteriors.
    let mut gamma = vec![vec![0.0; n]; frames];
    for t in 0..frames {
        for i in 0..n {
            gamma[t][i] = (alpha[t][i] + beta[t][i] - ll).exp();
        }
    }
    let mut xi = Vec::with_capacity(frames.saturating_sub(1));
    for t in 0..frames - 1 {
        let row: Vec<f64> = edges
            .flat
            .iter()
            .map(|&(i, j, ln_a)| (alpha[t][i] + ln_a + b[t + 1][j] + beta[t + 1][j] - ll).exp())
            .collect();
        xi.push(row);
    }

    let posteriors = Posteriors {
        gamma,
        edges: edges.flat.iter().map(|&(i, j, _)| (i, j)).collect(),
        xi,
    };
    Ok((posteriors, ll))
}

// ---------------------------------------------------------------------------
// Accumulators
// ---------------------------------------------------------------------------

/// Per-model sufficient statistics gathered from one or more utterances.
#[derive(Debug, Clone)]
pub struct ModelStats {
    /// Linear-domain transition counts, `(n + 2)²` row-major in node order.
    pub trans: Vec<f64>,
    /// `occ[state][component]`: zeroth-order occupancy.
    pub occ: Vec<Vec<f64>>,
    /// `first[state][component][dim]`: Σ r·x.
    pub first: Vec<Vec<Vec<f64>>>,
    /// `second[state][component][dim]`: Σ r·x².
    pub second: Vec<Vec<Vec<f64>>>,
}

impl ModelStats {
    fn zeros(model: &HmmModel) -> ModelStats {
        let n = model.n_states();
        let side = n + 2;
        let occ = model.emissions().iter().map(|e| vec![0.0; e.m()]).collect();
        let first = model
            .emissions()
            .iter()
            .map(|e| vec![vec![0.0; e.dim()]; e.m()])
            .collect();
        let second = model
            .emissions()
            .iter()
            .map(|e| vec![vec![0.0; e.dim()]; e.m()])
            .collect();
        ModelStats {
            trans: vec![0.0; side * side],
            occ,
            first,
            second,
        }
    }

    fn add(&mut self, other: &ModelStats) {
        for (a, b) in self.trans.iter_mut().zip(&other.trans) {
            *a += b;
        }
        for (a, b) in self.occ.iter_mut().zip(&other.occ) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.first.iter_mut().zip(&other.first) {
            for (x, y) in a.iter_mut().zip(b) {
                for (u, v) in x.iter_mut().zip(y) {
                    *u += v;
                }
            }
        }
        for (a, b) in self.second.iter_mut().zip(&other.second) {
            for (x, y) in a.iter_mut().zip(b) {
                for (u, v) in x.iter_mut().zip(y) {
                    *u += v;
                }
            }
        }
    }
}

/// One utterance's contribution to the E-step.
#[derive(Debug, Clone)]
pub struct UttStats {
    /// Dense over the model set; untouched models hold zeros.
    pub per_model: Vec<ModelStats>,
    pub log_likelihood: f64,
}

/// Mergeable E-step accumulator.
///
/// Holds per-utterance parts keyed by utterance index; `merge` is an exact
/// disjoint map union, so merging is associative and order-independent.
/// Floating-point summation happens once, in utterance order, inside
/// [`finalize`](Self::finalize) — training on a corpus and merging
/// accumulators from a partition of it give bit-identical results.
#[derive(Debug, Clone, Default)]
pub struct Accumulators {
    parts: BTreeMap<usize, UttStats>,
}

/// Summed statistics ready for re-estimation.
#[derive(Debug, Clone)]
pub struct SufficientStats {
    pub per_model: Vec<ModelStats>,
    pub total_log_likelihood: f64,
    pub utterance_count: usize,
}

impl Accumulators {
    pub fn new() -> Accumulators {
        Accumulators::default()
    }

    pub fn insert(&mut self, utterance_index: usize, stats: UttStats) -> Result<()> {
        if self.parts.insert(utterance_index, stats).is_some() {
            return Err(Error::Usage(format!(
                "utterance {utterance_index} accumulated twice"
            )));
        }
        Ok(())
    }

    pub fn merge(mut self, other: Accumulators) -> Result<Accumulators> {
        for (k, v) in other.parts {
            self.insert(k, v)?;
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn finalize(&self, models: &ModelSet) -> SufficientStats {
        let mut per_model: Vec<ModelStats> =
            models.models().iter().map(ModelStats::zeros).collect();
        let mut total_ll = 0.0;
        for stats in self.parts.values() {
            for (acc, part) in per_model.iter_mut().zip(&stats.per_model) {
                acc.add(part);
            }
            total_ll += stats.log_likelihood;
        }
        SufficientStats {
            per_model,
            total_log_likelihood: total_ll,
            utterance_count: self.parts.len(),
        }
    }
}

/// E-step for one utterance: align against the concatenated transcript
/// model and fold the posteriors back onto each word's parameters.
pub(crate) fn accumulate_utterance(
    models: &ModelSet,
    word_indices: &[usize],
    features: &FeatureSequence,
) -> Result<UttStats> {
    let composite = CompositeModel::concat(models, word_indices)?;
    let edges = EdgeLists::new(&composite.model);
    let b = density_table(&composite.model, features)?;
    let frames = features.frames();
    let (post, ll) = forward_backward_inner(&composite.model, &edges, &b, frames)?;

    let mut per_model: Vec<ModelStats> = models.models().iter().map(ModelStats::zeros).collect();
    let n = composite.model.n_states();

    // Transition counts from edge posteriors.
    let mut edge_totals = vec![0.0f64; post.edges.len()];
    for row in &post.xi {
        for (tot, &v) in edge_totals.iter_mut().zip(row) {
            *tot += v;
        }
    }
    // The flat edge order of `post.edges` matches `transitions().edges()`
    // restricted to emitting pairs; walk the full edge list to reuse the
    // origin decomposition.
    let all_edges = composite.model.transitions().edges();
    let mut emit_edge = 0usize;
    for (idx, &(from, to, _)) in all_edges.iter().enumerate() {
        let count = match (from, to) {
            (Node::Emit(i), Node::Emit(j)) => {
                debug_assert_eq!(post.edges[emit_edge], (i, j));
                let c = edge_totals[emit_edge];
                emit_edge += 1;
                c
            }
            // Entry and exit posteriors are the boundary gamma rows.
            (Node::Entry, Node::Emit(j)) => post.gamma[0][j],
            (Node::Emit(i), Node::Exit) => post.gamma[frames - 1][i],
            _ => 0.0,
        };
        if count == 0.0 {
            continue;
        }
        for &(word_pos, f, t) in &composite.edge_origins[idx].parts {
            let model_idx = word_indices[word_pos];
            let m = models.get(model_idx);
            let side = m.n_states() + 2;
            let stats = &mut per_model[model_idx];
            stats.trans[f.index(m.n_states()) * side + t.index(m.n_states())] += count;
        }
    }

    // Emission statistics with per-component responsibilities.
    let mut frame = vec![0.0f64; features.dim()];
    let mut joints: Vec<f64> = Vec::new();
    for t in 0..frames {
        features.frame_f64(t, &mut frame);
        for s in 0..n {
            let g = post.gamma[t][s];
            if g == 0.0 {
                continue;
            }
            let (word_pos, local_state) = composite.state_origin[s];
            let model_idx = word_indices[word_pos];
            let emission = &models.get(model_idx).emissions()[local_state];
            let stats = &mut per_model[model_idx];
            if emission.m() == 1 {
                stats.occ[local_state][0] += g;
                for d in 0..frame.len() {
                    stats.first[local_state][0][d] += g * frame[d];
                    stats.second[local_state][0][d] += g * frame[d] * frame[d];
                }
            } else {
                emission.component_log_joint(&frame, &mut joints);
                let total = log_sum_exp_raw(&joints);
                for (m, &joint) in joints.iter().enumerate() {
                    let r = g * (joint - total).exp();
                    if r == 0.0 {
                        continue;
                    }
                    stats.occ[local_state][m] += r;
                    for d in 0..frame.len() {
                        stats.first[local_state][m][d] += r * frame[d];
                        stats.second[local_state][m][d] += r * frame[d] * frame[d];
                    }
                }
            }
        }
    }

    Ok(UttStats {
        per_model,
        log_likelihood: ll,
    })
}

// ---------------------------------------------------------------------------
// M-step
// ---------------------------------------------------------------------------

/// Occupancy below which a state or component keeps its old parameters.
const MIN_OCCUPANCY: f64 = 1e-8;

fn reestimate_model(
    model: &HmmModel,
    stats: &ModelStats,
    var_floor: &[f64],
    weight_floor: f64,
) -> Result<HmmModel> {
    let n = model.n_states();
    let side = n + 2;
    let mut out = model.clone();

    // Transitions: re-estimate each row over its existing support.
    for from in model.transitions().nodes() {
        if from == Node::Exit {
            continue;
        }
        let fi = from.index(n);
        let support = model.transitions().support(from);
        if support.is_empty() {
            continue;
        }
        let total: f64 = support
            .iter()
            .map(|to| stats.trans[fi * side + to.index(n)])
            .sum();
        if total <= MIN_OCCUPANCY {
            continue; // unoccupied row keeps its old parameters
        }
        for to in support {
            let c = stats.trans[fi * side + to.index(n)];
            let p = c / total;
            out.transitions_mut()
                .set_ln(from, to, if p > 0.0 { p.ln() } else { f64::NEG_INFINITY });
        }
    }

    // Emissions.
    for s in 0..n {
        let emission = &model.emissions()[s];
        let m = emission.m();
        let total_occ: f64 = stats.occ[s].iter().sum();
        if total_occ <= MIN_OCCUPANCY {
            continue;
        }
        let mut weights = Vec::with_capacity(m);
        let mut comps = Vec::with_capacity(m);
        for c in 0..m {
            let occ = stats.occ[s][c];
            if occ <= MIN_OCCUPANCY {
                // Starved component: keep its Gaussian, floor its weight.
                weights.push(weight_floor);
                comps.push(emission.components()[c].clone());
                continue;
            }
            let mean: Vec<f64> = stats.first[s][c].iter().map(|v| v / occ).collect();
            let var: Vec<f64> = stats.second[s][c]
                .iter()
                .zip(&mean)
                .zip(var_floor)
                .map(|((sq, mu), floor)| (sq / occ - mu * mu).max(*floor))
                .collect();
            weights.push((occ / total_occ).max(weight_floor));
            comps.push(Gaussian::new(mean, var)?);
        }
        let wsum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= wsum;
        }
        out.set_emission(s, GmmEmission::new(weights, comps)?);
    }

    out.ensure_valid()?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Flat initialization
// ---------------------------------------------------------------------------

/// Flat-initialize one class: a left-to-right chain whose states all carry
/// the corpus-global single Gaussian and equiprobable allowed transitions.
pub fn flat_init(corpus: &Corpus, n_states: usize, label: &str) -> Result<HmmModel> {
    if corpus.is_empty() {
        return Err(Error::Usage("empty corpus".into()));
    }
    if !corpus
        .utterances
        .iter()
        .any(|u| u.transcript.iter().any(|l| l == label))
    {
        return Err(Error::Usage(format!(
            "no training material for label `{label}`"
        )));
    }
    let stats = corpus.global_stats()?;
    let g = Gaussian::new(stats.mean, stats.var)?;
    let emissions = vec![GmmEmission::single(g); n_states];
    HmmModel::left_to_right(label, emissions)
}

/// Flat-initialize every label in the corpus vocabulary.
pub fn flat_init_all(corpus: &Corpus, n_states: usize) -> Result<ModelSet> {
    let mut labels: Vec<String> = Vec::new();
    for u in &corpus.utterances {
        for l in &u.transcript {
            if !labels.contains(l) {
                labels.push(l.clone());
            }
        }
    }
    let models = labels
        .iter()
        .map(|l| flat_init(corpus, n_states, l))
        .collect::<Result<Vec<_>>>()?;
    ModelSet::new(models)
}

// ---------------------------------------------------------------------------
// Mixture splitting
// ---------------------------------------------------------------------------

/// Grow a state's mixture to `target_m` components by repeatedly splitting
/// the heaviest component: weights halve, means move ±`perturbation`
/// standard deviations apart, variances are copied. States already at or
/// past the target are left unchanged.
pub fn split_mixtures(model: &HmmModel, target_m: usize, perturbation: f64) -> Result<HmmModel> {
    let mut out = model.clone();
    for s in 0..model.n_states() {
        let mut weights: Vec<f64> = out.emissions()[s].weights().to_vec();
        let mut comps: Vec<Gaussian> = out.emissions()[s].components().to_vec();
        while comps.len() < target_m {
            let k = weights
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap();
            let w = weights[k] / 2.0;
            let base = comps[k].clone();
            let offset: Vec<f64> = base.var().iter().map(|v| perturbation * v.sqrt()).collect();
            let lo: Vec<f64> = base.mean().iter().zip(&offset).map(|(m, o)| m - o).collect();
            let hi: Vec<f64> = base.mean().iter().zip(&offset).map(|(m, o)| m + o).collect();
            weights[k] = w;
            comps[k] = Gaussian::new(lo, base.var().to_vec())?;
            weights.push(w);
            comps.push(Gaussian::new(hi, base.var().to_vec())?);
        }
        out.set_emission(s, GmmEmission::new(weights, comps)?);
    }
    Ok(out)
}

fn split_set(models: &ModelSet, target_m: usize, perturbation: f64) -> Result<ModelSet> {
    let split: Vec<HmmModel> = models
        .models()
        .iter()
        .map(|m| split_mixtures(m, target_m, perturbation))
        .collect::<Result<_>>()?;
    ModelSet::new(split)
}

// ---------------------------------------------------------------------------
// Training driver
// ---------------------------------------------------------------------------

/// One row of the training log-likelihood trace. The log-likelihood is the
/// E-step value for the parameters entering the iteration, so it is
/// non-decreasing within a stage; splitting between stages intentionally
/// perturbs parameters and restarts the comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub stage: usize,
    pub iteration: usize,
    pub log_likelihood: f64,
    pub skipped: usize,
}

#[derive(Debug, Clone, Default)]
pub struct TrainTrace {
    pub rows: Vec<TraceRow>,
}

impl TrainTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,iteration,total_log_likelihood,skipped\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.9e},{}\n",
                r.stage, r.iteration, r.log_likelihood, r.skipped
            ));
        }
        out
    }
}

struct EStep {
    acc: Accumulators,
    skipped: usize,
}

fn e_step(
    models: &ModelSet,
    corpus: &Corpus,
    transcripts: &[Vec<usize>],
    jobs: usize,
) -> Result<EStep> {
    let items: Vec<usize> = (0..corpus.len()).collect();
    let results = parallel_map(&items, jobs, |&u| {
        accumulate_utterance(models, &transcripts[u], &corpus.utterances[u].features)
    });
    let mut acc = Accumulators::new();
    let mut skipped = 0usize;
    for (u, r) in results.into_iter().enumerate() {
        match r {
            Ok(stats) => acc.insert(u, stats)?,
            Err(Error::AlignmentInfeasible { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if acc.is_empty() {
        return Err(Error::AllUtterancesSkipped(skipped));
    }
    Ok(EStep { acc, skipped })
}

/// Embedded Baum-Welch re-estimation over a transcribed corpus.
///
/// With `allow_splitting`, the mixture schedule runs stage by stage:
/// grow every state's mixture to the stage target, then iterate to
/// convergence. Without it, a single stage trains the models as they are.
pub fn baum_welch_train(
    models: &ModelSet,
    corpus: &Corpus,
    config: &TrainingConfig,
    allow_splitting: bool,
    jobs: usize,
) -> Result<(ModelSet, TrainTrace)> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Usage("empty corpus".into()));
    }
    let transcripts: Vec<Vec<usize>> = corpus
        .utterances
        .iter()
        .map(|u| models.resolve(&u.transcript))
        .collect::<Result<_>>()?;

    let global = corpus.global_stats()?;
    let var_floor: Vec<f64> = global.var.iter().map(|v| v * config.var_floor_scale).collect();

    let mut current = models.clone();
    let mut trace = TrainTrace::default();

    let stages: Vec<Option<usize>> = if allow_splitting {
        config.schedule.iter().map(|&m| Some(m)).collect()
    } else {
        vec![None]
    };

    for (stage, target) in stages.into_iter().enumerate() {
        if let Some(m) = target {
            current = split_set(&current, m, config.split_perturbation)?;
        }
        let mut prev_ll: Option<f64> = None;
        for iteration in 0..config.max_iterations {
            let estep = e_step(&current, corpus, &transcripts, jobs)?;
            let stats = estep.acc.finalize(&current);
            let ll = stats.total_log_likelihood;
            trace.rows.push(TraceRow {
                stage,
                iteration,
                log_likelihood: ll,
                skipped: estep.skipped,
            });
            if let Some(prev) = prev_ll {
                let gain = (ll - prev) / prev.abs().max(1e-12);
                if gain < config.tolerance {
                    break;
                }
            }
            prev_ll = Some(ll);

            let updated: Vec<HmmModel> = current
                .models()
                .iter()
                .zip(&stats.per_model)
                .map(|(m, s)| reestimate_model(m, s, &var_floor, config.weight_floor))
                .collect::<Result<_>>()?;
            current = ModelSet::new(updated)?;
        }
    }

    Ok((current, trace))
}
