//! HMM model structure: labeled states, a row-stochastic transition matrix
//! over `{entry, emitting states, exit}`, and one emission mixture per
//! emitting state.
//!
//! Entry and exit are non-emitting. The topology of a model is the support
//! graph of its transition matrix: the set of edges with nonzero
//! probability. Most operations in this crate transform that support.

use std::fmt;

use crate::emission::{GmmEmission, WEIGHT_FLOOR};
use crate::error::{Error, Result};
use crate::logprob::LogProb;

/// A node of the transition graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Entry,
    /// Emitting state, indexed from 0.
    Emit(usize),
    Exit,
}

impl Node {
    /// Matrix index: entry = 0, emitting i = i + 1, exit = n + 1.
    pub(crate) fn index(self, n: usize) -> usize {
        match self {
            Node::Entry => 0,
            Node::Emit(i) => {
                debug_assert!(i < n);
                i + 1
            }
            Node::Exit => n + 1,
        }
    }

    pub(crate) fn from_index(idx: usize, n: usize) -> Node {
        if idx == 0 {
            Node::Entry
        } else if idx == n + 1 {
            Node::Exit
        } else {
            Node::Emit(idx - 1)
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Entry => write!(f, "entry"),
            Node::Emit(i) => write!(f, "state {i}"),
            Node::Exit => write!(f, "exit"),
        }
    }
}

/// Row-stochastic transition matrix over `(N + 2)` nodes, stored in the
/// log domain. The support set of a row (its nonzero columns) is the
/// model's topology.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    /// `(n + 2) * (n + 2)` log probabilities, row-major.
    ln: Vec<f64>,
}

impl TransitionMatrix {
    /// All-zero (empty support) matrix over `n` emitting states.
    pub fn new(n: usize) -> Self {
        let side = n + 2;
        TransitionMatrix {
            n,
            ln: vec![f64::NEG_INFINITY; side * side],
        }
    }

    pub fn n_emitting(&self) -> usize {
        self.n
    }

    fn side(&self) -> usize {
        self.n + 2
    }

    pub fn prob(&self, from: Node, to: Node) -> LogProb {
        let v = self.ln[from.index(self.n) * self.side() + to.index(self.n)];
        LogProb::new(v).expect("stored transition is a valid log probability")
    }

    #[inline]
    pub(crate) fn ln_at(&self, from: Node, to: Node) -> f64 {
        self.ln[from.index(self.n) * self.side() + to.index(self.n)]
    }

    pub fn set_linear(&mut self, from: Node, to: Node, p: f64) -> Result<()> {
        let lp = LogProb::from_linear(p)?;
        let (i, j) = (from.index(self.n), to.index(self.n));
        let side = self.side();
        self.ln[i * side + j] = lp.ln();
        Ok(())
    }

    pub(crate) fn set_ln(&mut self, from: Node, to: Node, ln_p: f64) {
        let (i, j) = (from.index(self.n), to.index(self.n));
        let side = self.side();
        self.ln[i * side + j] = ln_p;
    }

    /// All nodes in matrix order: entry, emitting states, exit.
    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        (0..self.side()).map(|i| Node::from_index(i, self.n))
    }

    /// The support set φ of a row: targets with nonzero probability, in
    /// node order.
    pub fn support(&self, from: Node) -> Vec<Node> {
        let i = from.index(self.n);
        (0..self.side())
            .filter(|&j| self.ln[i * self.side() + j] != f64::NEG_INFINITY)
            .map(|j| Node::from_index(j, self.n))
            .collect()
    }

    /// Nonzero outgoing edges of a row as `(target, ln p)`.
    pub fn successors(&self, from: Node) -> Vec<(Node, f64)> {
        let i = from.index(self.n);
        (0..self.side())
            .filter_map(|j| {
                let v = self.ln[i * self.side() + j];
                (v != f64::NEG_INFINITY).then(|| (Node::from_index(j, self.n), v))
            })
            .collect()
    }

    /// Every nonzero edge `(from, to, ln p)`, row-major.
    pub fn edges(&self) -> Vec<(Node, Node, f64)> {
        let mut out = Vec::new();
        for i in 0..self.side() {
            for j in 0..self.side() {
                let v = self.ln[i * self.side() + j];
                if v != f64::NEG_INFINITY {
                    out.push((Node::from_index(i, self.n), Node::from_index(j, self.n), v));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.ln.iter().filter(|&&v| v != f64::NEG_INFINITY).count()
    }

    /// Linear row sum, for stochasticity checks.
    pub fn row_sum(&self, from: Node) -> f64 {
        let i = from.index(self.n);
        self.ln[i * self.side()..(i + 1) * self.side()]
            .iter()
            .map(|&v| v.exp())
            .sum()
    }

    /// Nodes reachable from `start` along the support graph.
    pub fn reachable_from(&self, start: Node) -> Vec<Node> {
        let side = self.side();
        let mut seen = vec![false; side];
        let mut queue = vec![start.index(self.n)];
        seen[start.index(self.n)] = true;
        while let Some(i) = queue.pop() {
            for j in 0..side {
                if !seen[j] && self.ln[i * side + j] != f64::NEG_INFINITY {
                    seen[j] = true;
                    queue.push(j);
                }
            }
        }
        (0..side)
            .filter(|&j| seen[j])
            .map(|j| Node::from_index(j, self.n))
            .collect()
    }

    /// Minimum number of emitting states on any entry→exit path, or None
    /// if exit is unreachable. This is the shortest utterance the model
    /// can align.
    pub fn min_path_frames(&self) -> Option<usize> {
        let side = self.side();
        let (entry, exit) = (0usize, self.n + 1);
        let mut dist = vec![usize::MAX; side];
        dist[entry] = 0;
        let mut queue = std::collections::VecDeque::from([entry]);
        while let Some(i) = queue.pop_front() {
            for j in 0..side {
                if self.ln[i * side + j] != f64::NEG_INFINITY && dist[j] == usize::MAX {
                    // Entering any node other than exit consumes one frame.
                    dist[j] = dist[i] + usize::from(j != exit);
                    queue.push_back(j);
                }
            }
        }
        (dist[exit] != usize::MAX).then_some(dist[exit])
    }
}

/// A single invariant violation found by [`HmmModel::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// The row or state the violation names, when there is one.
    pub node: Option<Node>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Some(n) => write!(f, "{n}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

fn violation(node: Option<Node>, message: impl Into<String>) -> Violation {
    Violation {
        node,
        message: message.into(),
    }
}

/// One class model: a label, a transition matrix over `{entry, 1..N, exit}`,
/// and an emission mixture per emitting state.
///
/// `state_names` are stable identifiers that survive pruning; flattening
/// names each produced state after its source `(state, component)` pair so
/// later stages can map states back.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    label: String,
    state_names: Vec<String>,
    transitions: TransitionMatrix,
    emissions: Vec<GmmEmission>,
}

impl HmmModel {
    pub fn new(
        label: impl Into<String>,
        transitions: TransitionMatrix,
        emissions: Vec<GmmEmission>,
    ) -> Result<Self> {
        let state_names = (0..transitions.n_emitting())
            .map(|i| i.to_string())
            .collect();
        Self::with_state_names(label, state_names, transitions, emissions)
    }

    pub fn with_state_names(
        label: impl Into<String>,
        state_names: Vec<String>,
        transitions: TransitionMatrix,
        emissions: Vec<GmmEmission>,
    ) -> Result<Self> {
        let model = HmmModel {
            label: label.into(),
            state_names,
            transitions,
            emissions,
        };
        let violations = model.validate();
        if violations.is_empty() {
            Ok(model)
        } else {
            Err(Error::invalid_model(&model.label, &violations))
        }
    }

    /// Build without validating. For internal stages that construct a model
    /// incrementally and validate at the end.
    pub(crate) fn new_unchecked(
        label: String,
        state_names: Vec<String>,
        transitions: TransitionMatrix,
        emissions: Vec<GmmEmission>,
    ) -> Self {
        HmmModel {
            label,
            state_names,
            transitions,
            emissions,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn state_name(&self, i: usize) -> &str {
        &self.state_names[i]
    }

    pub fn transitions(&self) -> &TransitionMatrix {
        &self.transitions
    }

    pub(crate) fn transitions_mut(&mut self) -> &mut TransitionMatrix {
        &mut self.transitions
    }

    pub fn emissions(&self) -> &[GmmEmission] {
        &self.emissions
    }

    pub(crate) fn set_emission(&mut self, i: usize, e: GmmEmission) {
        self.emissions[i] = e;
    }

    /// Number of emitting states.
    pub fn n_states(&self) -> usize {
        self.transitions.n_emitting()
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.emissions.first().map_or(0, |e| e.dim())
    }

    /// Total Gaussian count: `Σ_i M_i`. The budget a flattened model must
    /// preserve.
    pub fn gaussian_count(&self) -> usize {
        self.emissions.iter().map(|e| e.m()).sum()
    }

    /// Check every structural invariant; one record per violation.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.transitions.n_emitting();

        if self.emissions.len() != n {
            out.push(violation(
                None,
                format!(
                    "emission count {} does not match state count {n}",
                    self.emissions.len()
                ),
            ));
        }
        if self.state_names.len() != n {
            out.push(violation(
                None,
                format!(
                    "state name count {} does not match state count {n}",
                    self.state_names.len()
                ),
            ));
        }
        {
            let mut sorted = self.state_names.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != self.state_names.len() {
                out.push(violation(None, "state names are not unique"));
            }
        }

        // Emission invariants.
        let dim = self.dim();
        for (i, e) in self.emissions.iter().enumerate() {
            if e.dim() != dim {
                out.push(violation(
                    Some(Node::Emit(i)),
                    format!("emission dimension {} differs from model {dim}", e.dim()),
                ));
            }
            let wsum: f64 = e.weights().iter().sum();
            if (wsum - 1.0).abs() > 1e-10 {
                out.push(violation(
                    Some(Node::Emit(i)),
                    format!("mixture weights sum to {wsum}"),
                ));
            }
            for (m, &w) in e.weights().iter().enumerate() {
                if w < WEIGHT_FLOOR * (1.0 - 1e-9) {
                    out.push(violation(
                        Some(Node::Emit(i)),
                        format!("weight[{m}] = {w} below floor {WEIGHT_FLOOR}"),
                    ));
                }
            }
            for (m, c) in e.components().iter().enumerate() {
                for (d, &v) in c.var().iter().enumerate() {
                    if !(v.is_finite() && v > 0.0) {
                        out.push(violation(
                            Some(Node::Emit(i)),
                            format!("component {m} variance[{d}] = {v} not positive"),
                        ));
                    }
                }
            }
        }

        // Transition invariants.
        for node in self.transitions.nodes() {
            let sum = self.transitions.row_sum(node);
            let has_edges = !self.transitions.support(node).is_empty();
            if node == Node::Exit {
                if has_edges {
                    out.push(violation(Some(node), "exit state has outgoing transitions"));
                }
                continue;
            }
            if has_edges && (sum - 1.0).abs() > 1e-10 {
                out.push(violation(
                    Some(node),
                    format!("row sums to {sum}, expected 1"),
                ));
            }
        }
        if !self.transitions.prob(Node::Entry, Node::Entry).is_zero() {
            out.push(violation(Some(Node::Entry), "entry has a self-loop"));
        }
        if !self.transitions.prob(Node::Entry, Node::Exit).is_zero() {
            out.push(violation(
                Some(Node::Entry),
                "direct entry→exit transition (empty-word path) is not allowed",
            ));
        }
        for node in self.transitions.nodes() {
            if node != Node::Entry && !self.transitions.prob(node, Node::Entry).is_zero() {
                out.push(violation(Some(node), "transition into entry"));
            }
        }

        // Exit must be reachable from entry through the support graph.
        if !self
            .transitions
            .reachable_from(Node::Entry)
            .contains(&Node::Exit)
        {
            out.push(violation(
                Some(Node::Exit),
                "exit is not reachable from entry",
            ));
        }

        out
    }

    /// Validate and convert violations into an error.
    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid_model(&self.label, &v))
        }
    }

    /// A left-to-right chain: each state loops on itself or advances to its
    /// successor with probability 1/2; the last state advances to exit.
    pub fn left_to_right(
        label: impl Into<String>,
        emissions: Vec<GmmEmission>,
    ) -> Result<Self> {
        let n = emissions.len();
        if n == 0 {
            return Err(Error::Usage("left-to-right chain needs >= 1 state".into()));
        }
        let mut t = TransitionMatrix::new(n);
        t.set_linear(Node::Entry, Node::Emit(0), 1.0)?;
        for i in 0..n {
            let next = if i + 1 < n {
                Node::Emit(i + 1)
            } else {
                Node::Exit
            };
            t.set_linear(Node::Emit(i), Node::Emit(i), 0.5)?;
            t.set_linear(Node::Emit(i), next, 0.5)?;
        }
        HmmModel::new(label, t, emissions)
    }
}

/// An ordered collection of class models with unique labels.
///
/// Model index order is the order of this set; decoding tie rules and all
/// reports depend on it, so it is fixed at construction (sorted by label).
#[derive(Debug, Clone)]
pub struct ModelSet {
    models: Vec<HmmModel>,
}

impl ModelSet {
    pub fn new(mut models: Vec<HmmModel>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Usage("model set is empty".into()));
        }
        models.sort_by(|a, b| a.label().cmp(b.label()));
        for pair in models.windows(2) {
            if pair[0].label() == pair[1].label() {
                return Err(Error::Usage(format!(
                    "duplicate model label `{}`",
                    pair[0].label()
                )));
            }
        }
        let dim = models[0].dim();
        for m in &models {
            m.ensure_valid()?;
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.dim(),
                });
            }
        }
        Ok(ModelSet { models })
    }

    pub fn models(&self) -> &[HmmModel] {
        &self.models
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.models[0].dim()
    }

    pub fn get(&self, idx: usize) -> &HmmModel {
        &self.models[idx]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.models
            .binary_search_by(|m| m.label().cmp(label))
            .ok()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.models.iter().map(|m| m.label()).collect()
    }

    /// Resolve a transcript into model indices.
    pub fn resolve(&self, transcript: &[String]) -> Result<Vec<usize>> {
        transcript
            .iter()
            .map(|l| {
                self.index_of(l)
                    .ok_or_else(|| Error::ModelNotFound(l.clone()))
            })
            .collect()
    }
}

/// Where a composite edge's posterior mass belongs in the source models.
///
/// A within-word edge maps to one original edge; a junction edge between
/// consecutive words decomposes into `(i → exit)` of the earlier word and
/// `(entry → j)` of the later one.
#[derive(Debug, Clone)]
pub(crate) struct EdgeOrigin {
    /// `(word position in the transcript, from-node, to-node)`.
    pub parts: Vec<(usize, Node, Node)>,
}

/// A transcript's models concatenated into one alignment model.
///
/// Word boundaries are pass-through: a token leaving word w through its
/// exit enters word w+1's first states on the same frame, so the composite
/// junction probability is `a_w(i→exit) · a_{w+1}(entry→j)`.
#[derive(Debug)]
pub(crate) struct CompositeModel {
    pub model: HmmModel,
    /// Per composite emitting state: `(word position, state within word)`.
    pub state_origin: Vec<(usize, usize)>,
    /// Per composite support edge (in `transitions.edges()` order), the
    /// original edges it stands for.
    pub edge_origins: Vec<EdgeOrigin>,
}

impl CompositeModel {
    pub fn concat(models: &ModelSet, word_indices: &[usize]) -> Result<CompositeModel> {
        if word_indices.is_empty() {
            return Err(Error::Usage("empty transcript".into()));
        }
        let words: Vec<&HmmModel> = word_indices.iter().map(|&i| models.get(i)).collect();

        let total: usize = words.iter().map(|m| m.n_states()).sum();
        let mut bases = Vec::with_capacity(words.len());
        let mut acc = 0;
        for m in &words {
            bases.push(acc);
            acc += m.n_states();
        }

        let mut t = TransitionMatrix::new(total);
        let mut state_origin = Vec::with_capacity(total);
        let mut emissions = Vec::with_capacity(total);
        let mut state_names = Vec::with_capacity(total);
        for (w, m) in words.iter().enumerate() {
            for s in 0..m.n_states() {
                state_origin.push((w, s));
                emissions.push(m.emissions()[s].clone());
                state_names.push(format!("w{w}.{}", m.state_name(s)));
            }
        }

        // Within-word edges.
        for (w, m) in words.iter().enumerate() {
            let base = bases[w];
            for i in 0..m.n_states() {
                for (to, ln_p) in m.transitions().successors(Node::Emit(i)) {
                    match to {
                        Node::Emit(j) => {
                            t.set_ln(Node::Emit(base + i), Node::Emit(base + j), ln_p)
                        }
                        Node::Exit => {
                            if w + 1 == words.len() {
                                t.set_ln(Node::Emit(base + i), Node::Exit, ln_p);
                            }
                            // Junction edges are added below.
                        }
                        Node::Entry => unreachable!("validated models have no edges into entry"),
                    }
                }
            }
        }
        // Entry into the first word.
        for (to, ln_p) in words[0].transitions().successors(Node::Entry) {
            if let Node::Emit(j) = to {
                t.set_ln(Node::Entry, Node::Emit(bases[0] + j), ln_p);
            }
        }
        // Junctions between consecutive words.
        for w in 0..words.len() - 1 {
            let (cur, next) = (words[w], words[w + 1]);
            let exit_edges: Vec<(usize, f64)> = (0..cur.n_states())
                .filter_map(|i| {
                    let v = cur.transitions().ln_at(Node::Emit(i), Node::Exit);
                    (v != f64::NEG_INFINITY).then_some((i, v))
                })
                .collect();
            let entry_edges: Vec<(usize, f64)> = (0..next.n_states())
                .filter_map(|j| {
                    let v = next.transitions().ln_at(Node::Entry, Node::Emit(j));
                    (v != f64::NEG_INFINITY).then_some((j, v))
                })
                .collect();
            for &(i, ln_exit) in &exit_edges {
                for &(j, ln_entry) in &entry_edges {
                    t.set_ln(
                        Node::Emit(bases[w] + i),
                        Node::Emit(bases[w + 1] + j),
                        ln_exit + ln_entry,
                    );
                }
            }
        }

        let label = words
            .iter()
            .map(|m| m.label())
            .collect::<Vec<_>>()
            .join(" ");
        let model = HmmModel::new_unchecked(label, state_names, t, emissions);

        // Decompose each composite edge back onto original edges.
        let mut edge_origins = Vec::new();
        for (from, to, _) in model.transitions.edges() {
            let origin = match (from, to) {
                (Node::Entry, Node::Emit(j)) => {
                    let (w, s) = state_origin[j];
                    debug_assert_eq!(w, 0);
                    EdgeOrigin {
                        parts: vec![(w, Node::Entry, Node::Emit(s))],
                    }
                }
                (Node::Emit(i), Node::Exit) => {
                    let (w, s) = state_origin[i];
                    EdgeOrigin {
                        parts: vec![(w, Node::Emit(s), Node::Exit)],
                    }
                }
                (Node::Emit(i), Node::Emit(j)) => {
                    let (wi, si) = state_origin[i];
                    let (wj, sj) = state_origin[j];
                    if wi == wj {
                        EdgeOrigin {
                            parts: vec![(wi, Node::Emit(si), Node::Emit(sj))],
                        }
                    } else {
                        debug_assert_eq!(wi + 1, wj);
                        EdgeOrigin {
                            parts: vec![
                                (wi, Node::Emit(si), Node::Exit),
                                (wj, Node::Entry, Node::Emit(sj)),
                            ],
                        }
                    }
                }
                _ => unreachable!("composite has no other edge kinds"),
            };
            edge_origins.push(origin);
        }

        Ok(CompositeModel {
            model,
            state_origin,
            edge_origins,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emission::Gaussian;

    fn gmm1(mean: f64) -> GmmEmission {
        GmmEmission::single(Gaussian::new(vec![mean], vec![1.0]).unwrap())
    }

    #[test]
    fn left_to_right_rows_are_equiprobable() {
        let m = HmmModel::left_to_right("w", vec![gmm1(0.0), gmm1(1.0), gmm1(2.0)]).unwrap();
        for i in 0..3 {
            let row = m.transitions().successors(Node::Emit(i));
            assert_eq!(row.len(), 2);
            for (_, ln_p) in row {
                assert!((ln_p.exp() - 0.5).abs() < 1e-12);
            }
        }
        assert!(m.validate().is_empty());
    }

    #[test]
    fn single_state_chain_is_half_half() {
        let m = HmmModel::left_to_right("w", vec![gmm1(0.0)]).unwrap();
        assert!((m.transitions().prob(Node::Emit(0), Node::Emit(0)).linear() - 0.5).abs() < 1e-12);
        assert!((m.transitions().prob(Node::Emit(0), Node::Exit).linear() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_stochastic_row_is_reported() {
        let mut t = TransitionMatrix::new(1);
        t.set_linear(Node::Entry, Node::Emit(0), 1.0).unwrap();
        t.set_linear(Node::Emit(0), Node::Emit(0), 0.5).unwrap();
        t.set_linear(Node::Emit(0), Node::Exit, 0.4).unwrap();
        let m = HmmModel::new_unchecked(
            "w".into(),
            vec!["0".into()],
            t,
            vec![gmm1(0.0)],
        );
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].node, Some(Node::Emit(0)));
        assert!(v[0].message.contains("row sums to 0.9"));
    }

    #[test]
    fn unreachable_exit_is_reported() {
        let mut t = TransitionMatrix::new(2);
        t.set_linear(Node::Entry, Node::Emit(0), 1.0).unwrap();
        t.set_linear(Node::Emit(0), Node::Emit(0), 1.0).unwrap();
        // State 1 reaches exit but nothing reaches state 1.
        t.set_linear(Node::Emit(1), Node::Exit, 1.0).unwrap();
        let m = HmmModel::new_unchecked(
            "w".into(),
            vec!["0".into(), "1".into()],
            t,
            vec![gmm1(0.0), gmm1(1.0)],
        );
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("exit is not reachable"));
    }

    #[test]
    fn min_path_frames_counts_emitting_hops() {
        let m = HmmModel::left_to_right("w", vec![gmm1(0.0), gmm1(1.0), gmm1(2.0)]).unwrap();
        assert_eq!(m.transitions().min_path_frames(), Some(3));
    }

    #[test]
    fn model_set_sorts_and_rejects_duplicates() {
        let b = HmmModel::left_to_right("b", vec![gmm1(0.0)]).unwrap();
        let a = HmmModel::left_to_right("a", vec![gmm1(1.0)]).unwrap();
        let set = ModelSet::new(vec![b.clone(), a.clone()]).unwrap();
        assert_eq!(set.labels(), vec!["a", "b"]);
        assert_eq!(set.index_of("b"), Some(1));
        assert!(ModelSet::new(vec![a.clone(), a]).is_err());
    }

    #[test]
    fn composite_junction_probabilities_multiply() {
        let w1 = HmmModel::left_to_right("u", vec![gmm1(0.0), gmm1(1.0)]).unwrap();
        let w2 = HmmModel::left_to_right("v", vec![gmm1(2.0)]).unwrap();
        let set = ModelSet::new(vec![w1, w2]).unwrap();
        let iu = set.index_of("u").unwrap();
        let iv = set.index_of("v").unwrap();
        let comp = CompositeModel::concat(&set, &[iu, iv]).unwrap();
        assert_eq!(comp.model.n_states(), 3);
        // u's state 1 exits with p=0.5, v's entry enters its state with p=1.
        let ln = comp
            .model
            .transitions()
            .ln_at(Node::Emit(1), Node::Emit(2));
        assert!((ln.exp() - 0.5).abs() < 1e-12);
        // Last word keeps its exit edge.
        let ln_exit = comp.model.transitions().ln_at(Node::Emit(2), Node::Exit);
        assert!((ln_exit.exp() - 0.5).abs() < 1e-12);
        // Junction edge decomposes into two original edges.
        let edges = comp.model.transitions().edges();
        let pos = edges
            .iter()
            .position(|&(f, t, _)| f == Node::Emit(1) && t == Node::Emit(2))
            .unwrap();
        assert_eq!(comp.edge_origins[pos].parts.len(), 2);
    }
}
