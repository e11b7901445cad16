//! Mixture flattening: a GMM state is an HMM of single-Gaussian states, so
//! a left-to-right mixture model unfolds into a lattice with one emitting
//! state per (state, component) pair and the component weights moved onto
//! the transitions.

use crate::emission::GmmEmission;
use crate::error::Result;
use crate::model::{HmmModel, Node, TransitionMatrix};

/// How the flattened transition rows are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlattenMode {
    /// Uniform over each row's allowed edges. The lattice is then a blank
    /// slate for re-training; this is the mode the learning pipeline uses.
    Equiprobable,
    /// Edge into component k of state j carries `a(i→j) · w_{j,k}`, which
    /// reproduces the source model's likelihood exactly. Used as the
    /// exactness oracle for the construction.
    WeightPreserving,
}

/// Unfold every mixture component into its own emitting state.
///
/// For each source edge i→j, the lattice connects every component state of
/// i to every component state of j (entry and exit edges included). The
/// produced states are named `<source state name>.<component>`, and the
/// total Gaussian count is unchanged.
pub fn flatten_model(model: &HmmModel, mode: FlattenMode) -> Result<HmmModel> {
    model.ensure_valid()?;
    let n = model.n_states();

    // Flat state layout: components of state 0, then state 1, ...
    let mut base = Vec::with_capacity(n);
    let mut total = 0usize;
    for e in model.emissions() {
        base.push(total);
        total += e.m();
    }

    let mut names = Vec::with_capacity(total);
    let mut emissions = Vec::with_capacity(total);
    for (i, e) in model.emissions().iter().enumerate() {
        for (k, comp) in e.components().iter().enumerate() {
            names.push(format!("{}.{}", model.state_name(i), k));
            emissions.push(GmmEmission::single(comp.clone()));
        }
    }

    let mut t = TransitionMatrix::new(total);
    let src = model.transitions();
    let flat_nodes = |j: usize| -> Vec<usize> {
        let m = model.emissions()[j].m();
        (0..m).map(|k| base[j] + k).collect()
    };

    for from in src.nodes() {
        if from == Node::Exit {
            continue;
        }
        let successors = src.successors(from);
        if successors.is_empty() {
            continue;
        }
        // Expand each source row into the rows of its component states.
        let from_states: Vec<Option<usize>> = match from {
            Node::Entry => vec![None],
            Node::Emit(i) => flat_nodes(i).into_iter().map(Some).collect(),
            Node::Exit => unreachable!(),
        };
        for fs in from_states {
            let from_node = match fs {
                None => Node::Entry,
                Some(s) => Node::Emit(s),
            };
            // Gather this flat row's targets with weight-preserving mass.
            let mut targets: Vec<(Node, f64)> = Vec::new();
            for &(to, ln_a) in &successors {
                match to {
                    Node::Exit => targets.push((Node::Exit, ln_a)),
                    Node::Emit(j) => {
                        let weights = model.emissions()[j].weights();
                        for (k, &w) in weights.iter().enumerate() {
                            targets.push((Node::Emit(base[j] + k), ln_a + w.ln()));
                        }
                    }
                    Node::Entry => unreachable!("no edges into entry"),
                }
            }
            match mode {
                FlattenMode::WeightPreserving => {
                    for (to, ln_p) in targets {
                        t.set_ln(from_node, to, ln_p);
                    }
                }
                FlattenMode::Equiprobable => {
                    let p = (targets.len() as f64).recip().ln();
                    for (to, _) in targets {
                        t.set_ln(from_node, to, p);
                    }
                }
            }
        }
    }

    HmmModel::with_state_names(model.label(), names, t, emissions)
}
