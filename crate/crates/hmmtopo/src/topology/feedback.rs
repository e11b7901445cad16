//! Emission feedback: seed a fresh flattened lattice with the emissions a
//! pruned model learned, reactivating every pruned transition.

use crate::error::{Error, Result};
use crate::model::{HmmModel, Node};

/// Carry trained emissions back onto the full lattice.
///
/// The output has `fresh_flat`'s topology with every row equiprobable over
/// its support. For each state of `trained_pruned` (matched by state name,
/// which pruning preserves) the emission replaces the lattice one; states
/// the pruned model dropped keep their initialization emissions.
pub fn feedback_emissions(trained_pruned: &HmmModel, fresh_flat: &HmmModel) -> Result<HmmModel> {
    if trained_pruned.label() != fresh_flat.label() {
        return Err(Error::StateMappingMismatch(format!(
            "label `{}` does not match `{}`",
            trained_pruned.label(),
            fresh_flat.label()
        )));
    }
    if trained_pruned.dim() != fresh_flat.dim() {
        return Err(Error::DimensionMismatch {
            expected: fresh_flat.dim(),
            got: trained_pruned.dim(),
        });
    }

    let mut out = fresh_flat.clone();

    // Reactivate: equiprobable over the lattice support.
    let nodes: Vec<Node> = out.transitions().nodes().collect();
    for from in nodes {
        if from == Node::Exit {
            continue;
        }
        let succ = out.transitions().support(from);
        if succ.is_empty() {
            continue;
        }
        let ln_p = (succ.len() as f64).recip().ln();
        for to in succ {
            out.transitions_mut().set_ln(from, to, ln_p);
        }
    }

    for (i, name) in trained_pruned.state_names().iter().enumerate() {
        let target = fresh_flat
            .state_names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| {
                Error::StateMappingMismatch(format!(
                    "pruned state `{name}` has no counterpart in the lattice"
                ))
            })?;
        out.set_emission(target, trained_pruned.emissions()[i].clone());
    }

    out.ensure_valid()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emission::{Gaussian, GmmEmission};
    use crate::model::TransitionMatrix;
    use crate::topology::{flatten_model, prune, FlattenMode};

    fn gmm1(mean: f64) -> GmmEmission {
        GmmEmission::single(Gaussian::new(vec![mean], vec![1.0]).unwrap())
    }

    fn lattice() -> HmmModel {
        let g1 = Gaussian::new(vec![0.0], vec![1.0]).unwrap();
        let g2 = Gaussian::new(vec![2.0], vec![1.0]).unwrap();
        let e = GmmEmission::new(vec![0.5, 0.5], vec![g1, g2]).unwrap();
        let base = HmmModel::left_to_right("w", vec![e.clone(), e]).unwrap();
        flatten_model(&base, FlattenMode::Equiprobable).unwrap()
    }

    /// The lattice with trained-looking transitions that starve state
    /// "0.1", so pruning drops it.
    fn trained_then_pruned() -> (HmmModel, HmmModel) {
        let flat = lattice();
        let mut t = TransitionMatrix::new(4);
        // States: 0="0.0", 1="0.1", 2="1.0", 3="1.1".
        t.set_linear(Node::Entry, Node::Emit(0), 0.9).unwrap();
        t.set_linear(Node::Entry, Node::Emit(1), 0.1).unwrap();
        for i in [0usize, 1] {
            t.set_linear(Node::Emit(i), Node::Emit(i), 0.5).unwrap();
            t.set_linear(Node::Emit(i), Node::Emit(2), 0.4).unwrap();
            t.set_linear(Node::Emit(i), Node::Emit(3), 0.1).unwrap();
        }
        for i in [2usize, 3] {
            t.set_linear(Node::Emit(i), Node::Emit(i), 0.5).unwrap();
            t.set_linear(Node::Emit(i), Node::Exit, 0.5).unwrap();
        }
        let trained = HmmModel::with_state_names(
            "w",
            flat.state_names().to_vec(),
            t,
            flat.emissions().to_vec(),
        )
        .unwrap();
        let pruned = prune(&trained, 0.2).unwrap();
        assert!(pruned.n_states() < flat.n_states(), "fixture must drop a state");
        (pruned, flat)
    }

    #[test]
    fn identical_topologies_take_trained_emissions_with_equiprobable_rows() {
        let flat = lattice();
        // "Train": shift every emission mean.
        let mut trained = flat.clone();
        for i in 0..trained.n_states() {
            let g = Gaussian::new(vec![10.0 + i as f64], vec![2.0]).unwrap();
            trained.set_emission(i, GmmEmission::single(g));
        }
        // Perturb its transitions so we can see them reset.
        let out = feedback_emissions(&trained, &flat).unwrap();
        assert_eq!(out.n_states(), flat.n_states());
        for i in 0..out.n_states() {
            assert_eq!(
                out.emissions()[i].components()[0].mean()[0],
                10.0 + i as f64
            );
            let succ = out.transitions().successors(Node::Emit(i));
            if succ.is_empty() {
                continue;
            }
            let expect = (succ.len() as f64).recip();
            for (_, ln_p) in succ {
                assert!((ln_p.exp() - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dropped_states_keep_lattice_emissions() {
        let (pruned, flat) = trained_then_pruned();
        let mut trained = pruned.clone();
        for i in 0..trained.n_states() {
            trained.set_emission(i, gmm1(-7.0));
        }
        let out = feedback_emissions(&trained, &flat).unwrap();
        let surviving: Vec<&String> = trained.state_names().iter().collect();
        for (i, name) in flat.state_names().iter().enumerate() {
            let got = out.emissions()[i].components()[0].mean()[0];
            if surviving.contains(&name) {
                assert_eq!(got, -7.0, "{name} takes the trained emission");
            } else {
                assert_eq!(
                    got,
                    flat.emissions()[i].components()[0].mean()[0],
                    "{name} keeps its lattice emission"
                );
            }
        }
    }

    #[test]
    fn every_row_is_equiprobable_over_the_lattice_support() {
        let (pruned, flat) = trained_then_pruned();
        assert!(pruned.transitions().edge_count() < flat.transitions().edge_count());
        let out = feedback_emissions(&pruned, &flat).unwrap();
        assert_eq!(
            out.transitions().edge_count(),
            flat.transitions().edge_count(),
            "all pruned transitions are reactivated"
        );
    }

    #[test]
    fn unknown_state_name_is_a_mapping_error() {
        let flat = lattice();
        let mut t = TransitionMatrix::new(1);
        t.set_linear(Node::Entry, Node::Emit(0), 1.0).unwrap();
        t.set_linear(Node::Emit(0), Node::Emit(0), 0.5).unwrap();
        t.set_linear(Node::Emit(0), Node::Exit, 0.5).unwrap();
        let stranger = HmmModel::with_state_names(
            "w",
            vec!["nowhere".into()],
            t,
            vec![gmm1(0.0)],
        )
        .unwrap();
        assert!(matches!(
            feedback_emissions(&stranger, &flat),
            Err(Error::StateMappingMismatch(_))
        ));
    }
}
