//! Threshold sweep: prune every class model at each candidate ε, decode
//! the training set, and keep the best-scoring model set.

use crate::config::KvFile;
use crate::decode::{build_network, token_decode, NetworkMode};
use crate::error::{Error, Result};
use crate::manifest::Corpus;
use crate::model::{HmmModel, ModelSet};
use crate::parallel::parallel_map;
use crate::score::{align, pool, AlignmentCounts};
use crate::topology::prune;
use crate::train::{baum_welch_train, TrainingConfig};

/// Sweep and feedback settings.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Candidate thresholds, strictly ascending, all in (0, 1).
    pub grid: Vec<f64>,
    /// Re-train each pruned model set before scoring it. Off by default:
    /// the grid scan leans on the steady threshold/performance relation,
    /// and retraining per candidate multiplies the cost.
    pub retrain_after_prune: bool,
    /// Emission feedback rounds after the first sweep.
    pub feedback_iterations: usize,
    /// Word insertion log penalty for training-set decoding.
    pub insertion_log_penalty: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            grid: vec![0.02, 0.04, 0.07, 0.1, 0.14, 0.18, 0.22, 0.27, 0.33, 0.4],
            retrain_after_prune: false,
            feedback_iterations: 0,
            insertion_log_penalty: 0.0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Usage("empty threshold grid".into()));
        }
        for w in self.grid.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Usage("threshold grid must be strictly ascending".into()));
            }
        }
        if self.grid.iter().any(|&e| !(0.0..1.0).contains(&e) || e == 0.0) {
            return Err(Error::Usage("thresholds must lie in (0, 1)".into()));
        }
        if !self.insertion_log_penalty.is_finite() {
            return Err(Error::Usage("insertion penalty must be finite".into()));
        }
        Ok(())
    }

    pub fn from_kv(mut kv: KvFile) -> Result<SweepConfig> {
        let d = SweepConfig::default();
        let cfg = SweepConfig {
            grid: kv.take_list("grid", d.grid)?,
            retrain_after_prune: kv.take_bool("retrain_after_prune", d.retrain_after_prune)?,
            feedback_iterations: kv.take_parsed("feedback_iterations", d.feedback_iterations)?,
            insertion_log_penalty: kv
                .take_parsed("insertion_log_penalty", d.insertion_log_penalty)?,
        };
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One grid point's outcome.
#[derive(Debug, Clone)]
pub struct EpsilonRecord {
    pub epsilon: f64,
    /// Training-set accuracy, `1 − WER`; decode failures count as full
    /// errors, never as crashes.
    pub accuracy: f64,
    /// Surviving support edges summed over the class models.
    pub edges_kept: usize,
    pub decode_failures: usize,
    pub models: Vec<HmmModel>,
}

/// The whole sweep with its keep-best decision.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub records: Vec<EpsilonRecord>,
    /// Index of the kept record: highest accuracy, ties to the smallest ε.
    pub kept: usize,
    /// True when a later ε tied the kept accuracy.
    pub tie_break: bool,
}

impl SweepResult {
    pub fn kept_record(&self) -> &EpsilonRecord {
        &self.records[self.kept]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,train_accuracy,edges_kept,decode_failures,kept\n");
        for (i, r) in self.records.iter().enumerate() {
            out.push_str(&format!(
                "{:.6},{:.6},{},{},{}\n",
                r.epsilon,
                r.accuracy,
                r.edges_kept,
                r.decode_failures,
                usize::from(i == self.kept)
            ));
        }
        out
    }
}

/// Decode a transcribed corpus with a word-loop network and return pooled
/// alignment counts plus the number of utterances that failed to decode.
pub fn decode_and_score(
    models: &ModelSet,
    corpus: &Corpus,
    insertion_log_penalty: f64,
    jobs: usize,
) -> Result<(AlignmentCounts, usize)> {
    let network = build_network(models, NetworkMode::Loop, insertion_log_penalty)?;
    let items: Vec<usize> = (0..corpus.len()).collect();
    let decoded = parallel_map(&items, jobs, |&u| {
        token_decode(&network, &corpus.utterances[u].features)
    });
    let mut counts = Vec::with_capacity(corpus.len());
    let mut failures = 0usize;
    for (u, d) in decoded.iter().enumerate() {
        let reference = &corpus.utterances[u].transcript;
        match d {
            Some(result) => counts.push(align(reference, &result.transcript)),
            None => {
                failures += 1;
                counts.push(AlignmentCounts::full_error(reference.len()));
            }
        }
    }
    Ok((pool(counts.iter()), failures))
}

/// Prune every class model over the ascending grid, score each candidate
/// set on the training corpus, and keep the best.
pub fn sweep_threshold(
    flat_models: &ModelSet,
    corpus: &Corpus,
    config: &SweepConfig,
    train_config: &TrainingConfig,
    jobs: usize,
) -> Result<SweepResult> {
    config.validate()?;
    let mut records = Vec::with_capacity(config.grid.len());
    for &epsilon in &config.grid {
        let pruned: Vec<HmmModel> = flat_models
            .models()
            .iter()
            .map(|m| prune(m, epsilon))
            .collect::<Result<_>>()?;
        let mut set = ModelSet::new(pruned)?;
        if config.retrain_after_prune {
            let (retrained, _) = baum_welch_train(&set, corpus, train_config, false, jobs)?;
            set = retrained;
        }
        let (counts, decode_failures) =
            decode_and_score(&set, corpus, config.insertion_log_penalty, jobs)?;
        let accuracy = 1.0 - counts.errors() as f64 / counts.ref_len as f64;
        let edges_kept = set.models().iter().map(|m| m.transitions().edge_count()).sum();
        records.push(EpsilonRecord {
            epsilon,
            accuracy,
            edges_kept,
            decode_failures,
            models: set.models().to_vec(),
        });
    }

    let mut kept = 0usize;
    for (i, r) in records.iter().enumerate() {
        if r.accuracy > records[kept].accuracy {
            kept = i;
        }
    }
    let tie_break = records
        .iter()
        .enumerate()
        .any(|(i, r)| i != kept && r.accuracy == records[kept].accuracy);

    Ok(SweepResult {
        records,
        kept,
        tie_break,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::Corpus;
    use crate::synth::{sample_corpus, SyntheticSpec};
    use crate::topology::{flatten_model, FlattenMode};
    use crate::train::flat_init_all;

    fn small_setup() -> (ModelSet, Corpus) {
        let spec = SyntheticSpec {
            vocab_size: 2,
            train_utterances: 24,
            test_utterances: 1,
            words_min: 1,
            words_max: 3,
            seed: 21,
            ..SyntheticSpec::default()
        };
        let synth = sample_corpus(&spec).unwrap();
        let corpus = Corpus {
            utterances: synth.train.utterances.clone(),
        };
        let init = flat_init_all(&corpus, 2).unwrap();
        let cfg = TrainingConfig {
            max_iterations: 5,
            schedule: vec![1, 2],
            ..TrainingConfig::default()
        };
        let (baseline, _) = baum_welch_train(&init, &corpus, &cfg, true, 1).unwrap();
        let flat: Vec<HmmModel> = baseline
            .models()
            .iter()
            .map(|m| flatten_model(m, FlattenMode::Equiprobable).unwrap())
            .collect();
        let flat = ModelSet::new(flat).unwrap();
        let (trained, _) = baum_welch_train(&flat, &corpus, &cfg, false, 1).unwrap();
        (trained, corpus)
    }

    #[test]
    fn single_point_grid_keeps_that_point() {
        let (models, corpus) = small_setup();
        let cfg = SweepConfig {
            grid: vec![0.1],
            ..SweepConfig::default()
        };
        let r = sweep_threshold(&models, &corpus, &cfg, &TrainingConfig::default(), 1).unwrap();
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.kept, 0);
        assert_eq!(r.kept_record().epsilon, 0.1);
    }

    #[test]
    fn ties_keep_the_smallest_epsilon() {
        let (models, corpus) = small_setup();
        // Adjacent tiny thresholds almost surely prune identically.
        let cfg = SweepConfig {
            grid: vec![1e-9, 2e-9],
            ..SweepConfig::default()
        };
        let r = sweep_threshold(&models, &corpus, &cfg, &TrainingConfig::default(), 1).unwrap();
        assert_eq!(
            r.records[0].accuracy, r.records[1].accuracy,
            "test setup expects a tie"
        );
        assert_eq!(r.kept, 0, "smallest epsilon wins the tie");
        assert!(r.tie_break);
    }

    #[test]
    fn grid_must_be_ascending_and_in_range() {
        let bad1 = SweepConfig {
            grid: vec![0.2, 0.1],
            ..SweepConfig::default()
        };
        assert!(bad1.validate().is_err());
        let bad2 = SweepConfig {
            grid: vec![0.0, 0.5],
            ..SweepConfig::default()
        };
        assert!(bad2.validate().is_err());
    }

    #[test]
    fn sweep_is_deterministic() {
        let (models, corpus) = small_setup();
        let cfg = SweepConfig {
            grid: vec![0.05, 0.15, 0.3],
            ..SweepConfig::default()
        };
        let tc = TrainingConfig::default();
        let a = sweep_threshold(&models, &corpus, &cfg, &tc, 1).unwrap();
        let b = sweep_threshold(&models, &corpus, &cfg, &tc, 4).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.kept, b.kept);
    }
}
