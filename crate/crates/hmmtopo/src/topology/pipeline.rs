//! The end-to-end topology learning pipeline:
//!
//! 1. flat-initialize left-to-right class models;
//! 2. Baum-Welch with mixture splitting (the conventional baseline);
//! 3. flatten each baseline model into an equiprobable lattice;
//! 4. Baum-Welch without splitting;
//! 5–7. prune over the threshold grid and keep the best on training data;
//! 8. optionally feed the kept emissions back onto the fresh lattice,
//!    retrain, and sweep again.
//!
//! The final answer is the best-on-training model set seen at any round.
//! The flattened system carries exactly as many Gaussians as the baseline
//! (states × components), so any accuracy difference is attributable to
//! topology, not model size.

use crate::error::{Error, Result};
use crate::manifest::Corpus;
use crate::model::{HmmModel, ModelSet};
use crate::topology::{
    feedback_emissions, flatten_model, sweep_threshold, FlattenMode, SweepConfig,
};
use crate::train::{baum_welch_train, flat_init_all, TrainTrace, TrainingConfig};

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Emitting states per baseline left-to-right model.
    pub baseline_states: usize,
    pub train: TrainingConfig,
    pub sweep: SweepConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            baseline_states: 3,
            train: TrainingConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

/// One sweep round's summary (round 0 is the initial sweep, later rounds
/// are feedback iterations).
#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub round: usize,
    pub chosen_epsilon: f64,
    pub train_accuracy: f64,
    pub edges_kept: usize,
    pub tie_break: bool,
    /// `(epsilon, accuracy, edges)` per grid point.
    pub per_epsilon: Vec<(f64, f64, usize)>,
}

/// Everything the pipeline decided and measured.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub baseline_trace: TrainTrace,
    pub flat_trace: TrainTrace,
    /// Per class: `(label, baseline Gaussians, lattice Gaussians)`. The two
    /// counts are equal by construction; the record proves it.
    pub gaussian_budget: Vec<(String, usize, usize)>,
    pub rounds: Vec<SweepSummary>,
    /// Round whose kept models are the final answer.
    pub best_round: usize,
    pub best_accuracy: f64,
    /// Per class: `(label, final states, final support edges)`.
    pub final_shape: Vec<(String, usize, usize)>,
}

impl Provenance {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("gaussian budget (label, baseline, lattice)\n");
        for (l, b, f) in &self.gaussian_budget {
            out.push_str(&format!("  {l} {b} {f}{}\n", if b == f { "" } else { "  MISMATCH" }));
        }
        out.push_str("rounds (round, epsilon, train accuracy, edges)\n");
        for r in &self.rounds {
            out.push_str(&format!(
                "  {} {:.6} {:.6} {}{}\n",
                r.round,
                r.chosen_epsilon,
                r.train_accuracy,
                r.edges_kept,
                if r.tie_break { "  tie->smallest" } else { "" }
            ));
        }
        out.push_str(&format!(
            "best round {} accuracy {:.6}\n",
            self.best_round, self.best_accuracy
        ));
        out.push_str("final shape (label, states, edges)\n");
        for (l, s, e) in &self.final_shape {
            out.push_str(&format!("  {l} {s} {e}\n"));
        }
        out
    }

    pub fn rounds_csv(&self) -> String {
        let mut out = String::from("round,epsilon,train_accuracy,edges_kept\n");
        for r in &self.rounds {
            for (e, a, k) in &r.per_epsilon {
                out.push_str(&format!("{},{:.6},{:.6},{}\n", r.round, e, a, k));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    /// Conventional mixture-model baseline (steps 1–2).
    pub baseline: ModelSet,
    /// Fresh equiprobable lattice (step 3), the feedback target.
    pub lattice: ModelSet,
    /// Lattice after Baum-Welch (step 4).
    pub lattice_trained: ModelSet,
    /// Kept pruned models, best across all rounds.
    pub final_models: ModelSet,
    pub provenance: Provenance,
}

fn flatten_set(models: &ModelSet) -> Result<ModelSet> {
    let flat: Vec<HmmModel> = models
        .models()
        .iter()
        .map(|m| flatten_model(m, FlattenMode::Equiprobable))
        .collect::<Result<_>>()?;
    ModelSet::new(flat)
}

fn summarize(round: usize, sweep: &crate::topology::SweepResult) -> SweepSummary {
    let kept = sweep.kept_record();
    SweepSummary {
        round,
        chosen_epsilon: kept.epsilon,
        train_accuracy: kept.accuracy,
        edges_kept: kept.edges_kept,
        tie_break: sweep.tie_break,
        per_epsilon: sweep
            .records
            .iter()
            .map(|r| (r.epsilon, r.accuracy, r.edges_kept))
            .collect(),
    }
}

/// Run the whole pipeline on a transcribed corpus.
pub fn run_pipeline(corpus: &Corpus, config: &PipelineConfig, jobs: usize) -> Result<PipelineOutcome> {
    config.train.validate()?;
    config.sweep.validate()?;
    if config.baseline_states == 0 {
        return Err(Error::Usage("baseline needs at least one state".into()));
    }

    // Steps 1–2: flat init and conventional training with splitting.
    let init = flat_init_all(corpus, config.baseline_states)?;
    let (baseline, baseline_trace) =
        baum_welch_train(&init, corpus, &config.train, true, jobs)?;

    // Step 3: flatten; the Gaussian budget must carry over exactly.
    let lattice = flatten_set(&baseline)?;
    let mut gaussian_budget = Vec::new();
    for (b, f) in baseline.models().iter().zip(lattice.models()) {
        if b.gaussian_count() != f.gaussian_count() {
            return Err(Error::Usage(format!(
                "flattening changed the Gaussian budget for `{}`: {} -> {}",
                b.label(),
                b.gaussian_count(),
                f.gaussian_count()
            )));
        }
        gaussian_budget.push((b.label().to_string(), b.gaussian_count(), f.gaussian_count()));
    }

    // Step 4: train the lattice without splitting.
    let (lattice_trained, flat_trace) =
        baum_welch_train(&lattice, corpus, &config.train, false, jobs)?;

    // Steps 5–7: initial sweep.
    let sweep0 = sweep_threshold(&lattice_trained, corpus, &config.sweep, &config.train, jobs)?;
    let mut rounds = vec![summarize(0, &sweep0)];
    let mut best_round = 0usize;
    let mut best_accuracy = sweep0.kept_record().accuracy;
    let mut best_models = sweep0.kept_record().models.clone();
    let mut current_kept = best_models.clone();

    // Step 8: feedback rounds.
    for round in 1..=config.sweep.feedback_iterations {
        let reseeded: Vec<HmmModel> = current_kept
            .iter()
            .zip(lattice.models())
            .map(|(kept, flat)| feedback_emissions(kept, flat))
            .collect::<Result<_>>()?;
        let reseeded = ModelSet::new(reseeded)?;
        let (retrained, _) = baum_welch_train(&reseeded, corpus, &config.train, false, jobs)?;
        let sweep = sweep_threshold(&retrained, corpus, &config.sweep, &config.train, jobs)?;
        rounds.push(summarize(round, &sweep));
        let record = sweep.kept_record();
        current_kept = record.models.clone();
        if record.accuracy > best_accuracy {
            best_accuracy = record.accuracy;
            best_round = round;
            best_models = record.models.clone();
        }
    }

    let final_models = ModelSet::new(best_models)?;
    let final_shape = final_models
        .models()
        .iter()
        .map(|m| {
            (
                m.label().to_string(),
                m.n_states(),
                m.transitions().edge_count(),
            )
        })
        .collect();

    Ok(PipelineOutcome {
        baseline,
        lattice,
        lattice_trained,
        final_models,
        provenance: Provenance {
            baseline_trace,
            flat_trace,
            gaussian_budget,
            rounds,
            best_round,
            best_accuracy,
            final_shape,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{sample_corpus, SyntheticSpec};

    fn tiny_corpus(seed: u64) -> Corpus {
        let spec = SyntheticSpec {
            vocab_size: 2,
            train_utterances: 30,
            test_utterances: 1,
            words_min: 1,
            words_max: 3,
            seed,
            ..SyntheticSpec::default()
        };
        let synth = sample_corpus(&spec).unwrap();
        Corpus {
            utterances: synth.train.utterances.clone(),
        }
    }

    fn fast_config(feedback: usize) -> PipelineConfig {
        PipelineConfig {
            baseline_states: 2,
            train: TrainingConfig {
                max_iterations: 4,
                schedule: vec![1, 2],
                ..TrainingConfig::default()
            },
            sweep: SweepConfig {
                grid: vec![0.05, 0.15, 0.3],
                feedback_iterations: feedback,
                ..SweepConfig::default()
            },
        }
    }

    #[test]
    fn zero_feedback_equals_a_single_sweep() {
        let corpus = tiny_corpus(31);
        let out = run_pipeline(&corpus, &fast_config(0), 1).unwrap();
        assert_eq!(out.provenance.rounds.len(), 1);
        assert_eq!(out.provenance.best_round, 0);
        // The final models are the round-0 kept models verbatim.
        let sweep = sweep_threshold(
            &out.lattice_trained,
            &corpus,
            &fast_config(0).sweep,
            &fast_config(0).train,
            1,
        )
        .unwrap();
        for (a, b) in out.final_models.models().iter().zip(&sweep.kept_record().models) {
            assert_eq!(
                crate::textfmt::model_to_string(a),
                crate::textfmt::model_to_string(b)
            );
        }
    }

    #[test]
    fn kept_accuracy_never_decreases_with_more_feedback() {
        let corpus = tiny_corpus(32);
        let zero = run_pipeline(&corpus, &fast_config(0), 1).unwrap();
        let two = run_pipeline(&corpus, &fast_config(2), 1).unwrap();
        assert!(
            two.provenance.best_accuracy >= zero.provenance.best_accuracy,
            "keep-best is a running max: {} vs {}",
            two.provenance.best_accuracy,
            zero.provenance.best_accuracy
        );
        assert_eq!(two.provenance.rounds.len(), 3);
    }

    #[test]
    fn gaussian_budget_is_matched_per_class() {
        let corpus = tiny_corpus(33);
        let out = run_pipeline(&corpus, &fast_config(0), 1).unwrap();
        for (b, l) in out.baseline.models().iter().zip(out.lattice.models()) {
            assert_eq!(b.gaussian_count(), l.gaussian_count());
            assert_eq!(l.gaussian_count(), l.n_states(), "lattice is single-Gaussian");
        }
        for (label, baseline, lattice) in &out.provenance.gaussian_budget {
            assert_eq!(baseline, lattice, "{label}");
        }
    }

    #[test]
    fn pipeline_is_deterministic_across_job_counts() {
        let corpus = tiny_corpus(34);
        let a = run_pipeline(&corpus, &fast_config(1), 1).unwrap();
        let b = run_pipeline(&corpus, &fast_config(1), 4).unwrap();
        assert_eq!(a.provenance.to_text(), b.provenance.to_text());
        assert_eq!(a.provenance.rounds_csv(), b.provenance.rounds_csv());
        for (x, y) in a.final_models.models().iter().zip(b.final_models.models()) {
            assert_eq!(
                crate::textfmt::model_to_string(x),
                crate::textfmt::model_to_string(y)
            );
        }
    }

    #[test]
    fn every_stage_output_validates() {
        let corpus = tiny_corpus(35);
        let out = run_pipeline(&corpus, &fast_config(1), 1).unwrap();
        for set in [
            &out.baseline,
            &out.lattice,
            &out.lattice_trained,
            &out.final_models,
        ] {
            for m in set.models() {
                assert!(m.validate().is_empty(), "{} failed validation", m.label());
            }
        }
    }
}
