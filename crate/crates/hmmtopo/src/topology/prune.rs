//! Transition pruning: zero every edge at or below a threshold, keep each
//! row's best edge so no state is left without a successor, renormalize
//! the survivors, and drop states that fell off the entry-reachable graph.
//!
//! Two guards keep the result a usable model at any threshold:
//!
//! * the maximum-probability edge of each row always survives;
//! * if the kept graph still cannot reach exit from entry, the threshold
//!   is lowered to the largest edge probability that restores
//!   reachability (edges at that probability are kept inclusively).
//!
//! Both guards are deterministic, and both preserve the nesting law: for
//! ε₁ ≤ ε₂ the surviving edge set at ε₂ is a subset of the one at ε₁.

use crate::error::{Error, Result};
use crate::model::{HmmModel, Node, TransitionMatrix};

/// Edges kept by one candidate threshold: strictly-above `epsilon`, or at
/// least `at_least` when the reachability guard engaged, plus per-row
/// argmax edges.
struct KeepSet {
    /// `keep[i][j]` over matrix indices.
    keep: Vec<Vec<bool>>,
}

fn row_argmax(t: &TransitionMatrix, from: Node) -> Option<Node> {
    let mut best: Option<(Node, f64)> = None;
    for (to, ln_p) in t.successors(from) {
        let better = match best {
            None => true,
            Some((_, b)) => ln_p > b, // ties keep the lowest column
        };
        if better {
            best = Some((to, ln_p));
        }
    }
    best.map(|(n, _)| n)
}

fn keep_set(model: &HmmModel, min_keep_ln: f64, inclusive: bool) -> KeepSet {
    let t = model.transitions();
    let n = model.n_states();
    let side = n + 2;
    let mut keep = vec![vec![false; side]; side];
    for from in t.nodes() {
        if from == Node::Exit {
            continue;
        }
        for (to, ln_p) in t.successors(from) {
            let kept = if inclusive {
                ln_p >= min_keep_ln
            } else {
                ln_p > min_keep_ln
            };
            if kept {
                keep[from.index(n)][to.index(n)] = true;
            }
        }
        if let Some(best) = row_argmax(t, from) {
            keep[from.index(n)][best.index(n)] = true;
        }
    }
    KeepSet { keep }
}

fn exit_reachable(model: &HmmModel, keep: &KeepSet) -> bool {
    let n = model.n_states();
    let side = n + 2;
    let (entry, exit) = (Node::Entry.index(n), Node::Exit.index(n));
    let mut seen = vec![false; side];
    let mut stack = vec![entry];
    seen[entry] = true;
    while let Some(i) = stack.pop() {
        for j in 0..side {
            if keep.keep[i][j] && !seen[j] {
                if j == exit {
                    return true;
                }
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    false
}

/// Apply the pruning rule at threshold `epsilon` in (0, 1).
pub fn prune(model: &HmmModel, epsilon: f64) -> Result<HmmModel> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Usage(format!(
            "pruning threshold {epsilon} must lie in (0, 1)"
        )));
    }
    model.ensure_valid()?;
    let t = model.transitions();
    let n = model.n_states();

    let mut kept = keep_set(model, epsilon.ln(), false);
    if !exit_reachable(model, &kept) {
        // Reachability guard: walk candidate thresholds (the distinct edge
        // probabilities at or below epsilon) downward until exit reconnects.
        let mut candidates: Vec<f64> = Vec::new();
        for from in t.nodes() {
            if from == Node::Exit {
                continue;
            }
            for (_, ln_p) in t.successors(from) {
                if ln_p <= epsilon.ln() && !candidates.contains(&ln_p) {
                    candidates.push(ln_p);
                }
            }
        }
        candidates.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut found = false;
        for &ln_p in &candidates {
            kept = keep_set(model, ln_p, true);
            if exit_reachable(model, &kept) {
                found = true;
                break;
            }
        }
        if !found {
            // Keeping every edge reproduces the (valid) input.
            kept = keep_set(model, f64::NEG_INFINITY, true);
        }
    }

    // States reachable from entry under the kept edges survive.
    let side = n + 2;
    let entry = Node::Entry.index(n);
    let mut reachable = vec![false; side];
    reachable[entry] = true;
    let mut stack = vec![entry];
    while let Some(i) = stack.pop() {
        for j in 0..side {
            if kept.keep[i][j] && !reachable[j] {
                reachable[j] = true;
                stack.push(j);
            }
        }
    }

    let survivors: Vec<usize> = (0..n)
        .filter(|&i| reachable[Node::Emit(i).index(n)])
        .collect();
    let mut new_index = vec![usize::MAX; n];
    for (new_i, &old_i) in survivors.iter().enumerate() {
        new_index[old_i] = new_i;
    }

    let remap = |node: Node| -> Option<Node> {
        match node {
            Node::Entry => Some(Node::Entry),
            Node::Exit => Some(Node::Exit),
            Node::Emit(i) => {
                (new_index[i] != usize::MAX).then(|| Node::Emit(new_index[i]))
            }
        }
    };

    let mut out = TransitionMatrix::new(survivors.len());
    for from in t.nodes() {
        if from == Node::Exit || remap(from).is_none() {
            continue;
        }
        if matches!(from, Node::Emit(i) if !reachable[Node::Emit(i).index(n)]) {
            continue;
        }
        let row: Vec<(Node, f64)> = t
            .successors(from)
            .into_iter()
            .filter(|(to, _)| kept.keep[from.index(n)][to.index(n)])
            .collect();
        let full_row = row.len() == t.successors(from).len();
        let new_from = remap(from).expect("checked above");
        if full_row {
            // Nothing pruned from this row: renormalization is a no-op and
            // the probabilities are kept bit-identical.
            for (to, ln_p) in row {
                let new_to = remap(to).expect("kept targets are reachable");
                out.set_ln(new_from, new_to, ln_p);
            }
        } else {
            let sum: f64 = row.iter().map(|(_, ln_p)| ln_p.exp()).sum();
            for (to, ln_p) in row {
                let new_to = remap(to).expect("kept targets are reachable");
                out.set_ln(new_from, new_to, (ln_p.exp() / sum).ln());
            }
        }
    }

    let names: Vec<String> = survivors
        .iter()
        .map(|&i| model.state_name(i).to_string())
        .collect();
    let emissions = survivors
        .iter()
        .map(|&i| model.emissions()[i].clone())
        .collect();
    HmmModel::with_state_names(model.label(), names, out, emissions)
}
