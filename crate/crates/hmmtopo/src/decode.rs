//! Token-passing Viterbi decoding over isolated-word and word-loop
//! recognition networks.
//!
//! Decoding is strictly max-product: a token carries the best path score
//! `Σ ln a + Σ ln b` into each state, and only states linked by a nonzero
//! transition ever receive one. Ties break toward the lowest
//! `(model index, state index)` predecessor, and at exact score ties a
//! within-word edge is preferred over a word-boundary crossing, so results
//! are deterministic.

use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::model::{HmmModel, ModelSet, Node};

/// Network wiring mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkMode {
    /// Exactly one word: no exit→entry edges.
    Isolated,
    /// Connected words: every exit feeds every entry, paying the word
    /// insertion penalty per traversal.
    Loop,
}

/// A compiled recognition graph over a set of class models.
///
/// Edges are the models' internal support edges plus, in loop mode,
/// exit→entry connections carrying `insertion_log_penalty`.
#[derive(Debug, Clone)]
pub struct RecognitionNetwork {
    models: Vec<HmmModel>,
    mode: NetworkMode,
    insertion_log_penalty: f64,
    /// Per global state: owning model index.
    state_model: Vec<usize>,
    /// Per global state: state index within its model.
    state_local: Vec<usize>,
    /// Incoming within-model edges per global state: `(source, ln a)`,
    /// sorted by source so ties resolve to the lowest index.
    in_edges: Vec<Vec<(usize, f64)>>,
    /// `ln a(entry → state)` per global state.
    entry_score: Vec<f64>,
    /// `ln a(state → exit)` per global state.
    exit_score: Vec<f64>,
}

/// Compile a recognition network.
pub fn build_network(
    models: &ModelSet,
    mode: NetworkMode,
    insertion_log_penalty: f64,
) -> Result<RecognitionNetwork> {
    if !insertion_log_penalty.is_finite() {
        return Err(Error::Usage("insertion penalty must be finite".into()));
    }
    let dim = models.dim();
    for m in models.models() {
        m.ensure_valid()?;
        if m.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: m.dim(),
            });
        }
    }

    let total: usize = models.models().iter().map(|m| m.n_states()).sum();
    let mut state_model = Vec::with_capacity(total);
    let mut state_local = Vec::with_capacity(total);
    let mut in_edges = vec![Vec::new(); total];
    let mut entry_score = vec![f64::NEG_INFINITY; total];
    let mut exit_score = vec![f64::NEG_INFINITY; total];

    let mut base = 0usize;
    for (mi, m) in models.models().iter().enumerate() {
        let n = m.n_states();
        for s in 0..n {
            state_model.push(mi);
            state_local.push(s);
            entry_score[base + s] = m.transitions().ln_at(Node::Entry, Node::Emit(s));
            exit_score[base + s] = m.transitions().ln_at(Node::Emit(s), Node::Exit);
        }
        for i in 0..n {
            for (to, ln_a) in m.transitions().successors(Node::Emit(i)) {
                if let Node::Emit(j) = to {
                    in_edges[base + j].push((base + i, ln_a));
                }
            }
        }
        base += n;
    }
    for edges in &mut in_edges {
        edges.sort_by_key(|&(src, _)| src);
    }

    Ok(RecognitionNetwork {
        models: models.models().to_vec(),
        mode,
        insertion_log_penalty,
        state_model,
        state_local,
        in_edges,
        entry_score,
        exit_score,
    })
}

impl RecognitionNetwork {
    pub fn mode(&self) -> NetworkMode {
        self.mode
    }

    pub fn insertion_log_penalty(&self) -> f64 {
        self.insertion_log_penalty
    }

    pub fn models(&self) -> &[HmmModel] {
        &self.models
    }

    fn n_states(&self) -> usize {
        self.state_model.len()
    }

    fn density(&self, state: usize, frame: &[f64]) -> f64 {
        let m = &self.models[self.state_model[state]];
        m.emissions()[self.state_local[state]].log_density_unchecked(frame)
    }
}

/// The best-path decode of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Word sequence, one entry per model traversal.
    pub transcript: Vec<String>,
    /// Per-frame `(model index, state index)` along the best path.
    pub path: Vec<(usize, usize)>,
    /// Frame at which each transcript word starts; `word_starts[0] == 0`.
    pub word_starts: Vec<usize>,
    /// Total path log score.
    pub score: f64,
}

const NO_PRED: u32 = u32::MAX;

/// Max-product token passing. Returns `None` when no feasible path exists
/// (every token at negative infinity): a decode failure, not a crash.
pub fn token_decode(network: &RecognitionNetwork, features: &FeatureSequence) -> Option<DecodeResult> {
    let n = network.n_states();
    let frames = features.frames();
    let dim = features.dim();
    debug_assert!(network.models.iter().all(|m| m.dim() == dim));

    let mut frame = vec![0.0f64; dim];
    let mut score = vec![f64::NEG_INFINITY; n];
    // Backpointers: predecessor state and whether a word boundary was
    // crossed entering this frame.
    let mut bp_prev = vec![vec![NO_PRED; n]; frames];
    let mut bp_cross = vec![vec![false; n]; frames];

    features.frame_f64(0, &mut frame);
    for j in 0..n {
        if network.entry_score[j] != f64::NEG_INFINITY {
            score[j] = network.entry_score[j] + network.density(j, &frame);
        }
    }

    let mut next = vec![f64::NEG_INFINITY; n];
    for t in 1..frames {
        features.frame_f64(t, &mut frame);

        // Best word-exit token of the previous frame, lowest state on ties.
        let mut best_exit = f64::NEG_INFINITY;
        let mut best_exit_state = NO_PRED;
        if network.mode == NetworkMode::Loop {
            for i in 0..n {
                let v = score[i] + network.exit_score[i];
                if v > best_exit {
                    best_exit = v;
                    best_exit_state = i as u32;
                }
            }
        }

        for j in 0..n {
            // Within-word candidates; in_edges are sorted by source, so a
            // strict `>` keeps the lowest predecessor on ties.
            let mut best = f64::NEG_INFINITY;
            let mut pred = NO_PRED;
            for &(i, ln_a) in &network.in_edges[j] {
                let v = score[i] + ln_a;
                if v > best {
                    best = v;
                    pred = i as u32;
                }
            }
            let mut crossed = false;
            if network.mode == NetworkMode::Loop
                && best_exit != f64::NEG_INFINITY
                && network.entry_score[j] != f64::NEG_INFINITY
            {
                let v = best_exit + network.insertion_log_penalty + network.entry_score[j];
                // Prefer the lower predecessor on exact ties; a within-word
                // edge wins over a boundary from the same predecessor.
                if v > best || (v == best && best_exit_state < pred) {
                    best = v;
                    pred = best_exit_state;
                    crossed = true;
                }
            }
            next[j] = if best == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                best + network.density(j, &frame)
            };
            bp_prev[t][j] = pred;
            bp_cross[t][j] = crossed;
        }
        std::mem::swap(&mut score, &mut next);
    }

    // Termination at a word exit; lowest state on ties.
    let mut best_final = f64::NEG_INFINITY;
    let mut last = NO_PRED;
    for j in 0..n {
        let v = score[j] + network.exit_score[j];
        if v > best_final {
            best_final = v;
            last = j as u32;
        }
    }
    if best_final == f64::NEG_INFINITY {
        return None;
    }

    // Traceback.
    let mut states = vec![0usize; frames];
    let mut crossings = vec![false; frames];
    let mut cur = last as usize;
    for t in (0..frames).rev() {
        states[t] = cur;
        if t > 0 {
            crossings[t] = bp_cross[t][cur];
            cur = bp_prev[t][cur] as usize;
        }
    }

    let mut transcript = Vec::new();
    let mut word_starts = Vec::new();
    for t in 0..frames {
        if t == 0 || crossings[t] {
            transcript.push(network.models[network.state_model[states[t]]].label().to_string());
            word_starts.push(t);
        }
    }
    let path: Vec<(usize, usize)> = states
        .iter()
        .map(|&s| (network.state_model[s], network.state_local[s]))
        .collect();

    let result = DecodeResult {
        transcript,
        path,
        word_starts,
        score: best_final,
    };
    debug_assert!(
        verify_path_support(network, &result),
        "decoded path left the transition support"
    );
    Some(result)
}

/// Check that every step of a decoded path runs along a support edge or a
/// word-boundary crossing. Used by tests and debug builds.
pub fn verify_path_support(network: &RecognitionNetwork, result: &DecodeResult) -> bool {
    for t in 1..result.path.len() {
        let (pm, ps) = result.path[t - 1];
        let (cm, cs) = result.path[t];
        let crossing = result.word_starts.contains(&t);
        if crossing {
            let prev = &network.models[pm];
            let curm = &network.models[cm];
            if prev.transitions().ln_at(Node::Emit(ps), Node::Exit) == f64::NEG_INFINITY
                || curm.transitions().ln_at(Node::Entry, Node::Emit(cs)) == f64::NEG_INFINITY
            {
                return false;
            }
        } else {
            if pm != cm {
                return false;
            }
            let m = &network.models[pm];
            if m.transitions().ln_at(Node::Emit(ps), Node::Emit(cs)) == f64::NEG_INFINITY {
                return false;
            }
        }
    }
    true
}

/// Recompute a decode score from its path: per-frame emission terms plus
/// the transition terms along the path. Test support for the score
/// decomposition invariant.
pub fn recompute_path_score(
    network: &RecognitionNetwork,
    features: &FeatureSequence,
    result: &DecodeResult,
) -> f64 {
    let mut frame = vec![0.0f64; features.dim()];
    let mut total = 0.0;
    for t in 0..result.path.len() {
        let (mi, si) = result.path[t];
        let model = &network.models[mi];
        features.frame_f64(t, &mut frame);
        total += model.emissions()[si].log_density_unchecked(&frame);
        if t == 0 {
            total += model.transitions().ln_at(Node::Entry, Node::Emit(si));
        } else {
            let (pm, ps) = result.path[t - 1];
            if result.word_starts.contains(&t) {
                let prev = &network.models[pm];
                total += prev.transitions().ln_at(Node::Emit(ps), Node::Exit)
                    + network.insertion_log_penalty
                    + model.transitions().ln_at(Node::Entry, Node::Emit(si));
            } else {
                total += model.transitions().ln_at(Node::Emit(ps), Node::Emit(si));
            }
        }
    }
    let (lm, ls) = *result.path.last().expect("non-empty path");
    total += network.models[lm].transitions().ln_at(Node::Emit(ls), Node::Exit);
    total
}

/// Single-model Viterbi: best state path and score, or `None` if the model
/// cannot align the utterance.
pub fn viterbi_best_path(model: &HmmModel, features: &FeatureSequence) -> Option<(f64, Vec<usize>)> {
    let single = ModelSet::new(vec![model.clone()]).ok()?;
    let network = build_network(&single, NetworkMode::Isolated, 0.0).ok()?;
    token_decode(&network, features).map(|r| {
        let path = r.path.iter().map(|&(_, s)| s).collect();
        (r.score, path)
    })
}

/// Isolated-word classification result.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolatedResult {
    pub label: String,
    /// Per-model Viterbi scores in model order; negative infinity marks an
    /// infeasible model.
    pub scores: Vec<(String, f64)>,
}

/// Score every model against the utterance and return the best label.
/// Ties go to the lexicographically smallest label.
pub fn classify_isolated(models: &ModelSet, features: &FeatureSequence) -> Result<IsolatedResult> {
    let mut scores = Vec::with_capacity(models.len());
    for m in models.models() {
        let s = viterbi_best_path(m, features)
            .map(|(score, _)| score)
            .unwrap_or(f64::NEG_INFINITY);
        scores.push((m.label().to_string(), s));
    }
    let mut best: Option<(&str, f64)> = None;
    for (label, s) in &scores {
        if *s == f64::NEG_INFINITY {
            continue;
        }
        best = match best {
            None => Some((label, *s)),
            Some((bl, bs)) => {
                if *s > bs || (*s == bs && label.as_str() < bl) {
                    Some((label, *s))
                } else {
                    Some((bl, bs))
                }
            }
        };
    }
    match best {
        Some((label, _)) => Ok(IsolatedResult {
            label: label.to_string(),
            scores,
        }),
        None => Err(Error::ClassificationFailure),
    }
}
