// Scratch experiment for tuning the matched-budget comparison. Not a test
// of correctness; run with --nocapture to see the numbers.

use hmmtopo::diagnose::imbalance_coefficients;
use hmmtopo::manifest::Corpus;
use hmmtopo::score::wer;
use hmmtopo::synth::{sample_corpus, SyntheticSpec};
use hmmtopo::topology::{decode_and_score, run_pipeline, PipelineConfig, SweepConfig};
use hmmtopo::train::{baum_welch_train, flat_init_all, TrainingConfig};

#[test]
#[ignore]
fn matchup() {
    let t0 = std::time::Instant::now();
    for seed in [11u64, 22, 33, 44, 55] {
        let spec = SyntheticSpec {
            seed,
            ..SyntheticSpec::default()
        };
        let synth = sample_corpus(&spec).unwrap();
        let train = Corpus {
            utterances: synth.train.utterances.clone(),
        };
        let test = Corpus {
            utterances: synth.test.utterances.clone(),
        };

        let tcfg = TrainingConfig {
            max_iterations: 15,
            tolerance: 1e-4,
            schedule: vec![1, 2],
            ..TrainingConfig::default()
        };

        // Oracle: the ground-truth generators themselves.
        let (oracle_counts, oracle_fail) = decode_and_score(&synth.models, &test, 0.0, 4).unwrap();

        // Baseline: left-to-right, 3 states x 2 components.
        let init = flat_init_all(&train, 3).unwrap();
        let (baseline, _) = baum_welch_train(&init, &train, &tcfg, true, 4).unwrap();
        let (base_counts, base_fail) = decode_and_score(&baseline, &test, 0.0, 4).unwrap();

        // Pipeline with the same budget (6 Gaussians per class).
        let pcfg = PipelineConfig {
            baseline_states: 3,
            train: tcfg.clone(),
            sweep: SweepConfig {
                feedback_iterations: 1,
                ..SweepConfig::default()
            },
        };
        let out = run_pipeline(&train, &pcfg, 4).unwrap();
        let (pipe_counts, pipe_fail) = decode_and_score(&out.final_models, &test, 0.0, 4).unwrap();

        println!(
            "seed {seed}: oracle WER {:.4} ({oracle_fail} fail) | baseline WER {:.4} ({base_fail} fail) | pipeline WER {:.4} ({pipe_fail} fail) | eps {:.3} round {}",
            wer(&oracle_counts).unwrap(),
            wer(&base_counts).unwrap(),
            wer(&pipe_counts).unwrap(),
            out.provenance.rounds[out.provenance.best_round].chosen_epsilon,
            out.provenance.best_round,
        );

        // Imbalance on the trained baseline and a richer-mixture system.
        let rep = imbalance_coefficients(&baseline, &train, 4).unwrap();
        println!(
            "  imbalance (3x2): var a {:.4} var b {:.2} ratio {:.1} samples {} infeasible {}",
            rep.var_ln_alpha,
            rep.var_ln_beta,
            rep.var_ln_beta / rep.var_ln_alpha.max(1e-300),
            rep.sample_count(),
            rep.infeasible_steps
        );
        let rich_cfg = TrainingConfig {
            max_iterations: 10,
            schedule: vec![1, 2, 4, 8],
            ..TrainingConfig::default()
        };
        let (rich, _) = baum_welch_train(&init, &train, &rich_cfg, true, 4).unwrap();
        let rep2 = imbalance_coefficients(&rich, &train, 4).unwrap();
        println!(
            "  imbalance (3x8): var a {:.4} var b {:.2} ratio {:.1} samples {} infeasible {}",
            rep2.var_ln_alpha,
            rep2.var_ln_beta,
            rep2.var_ln_beta / rep2.var_ln_alpha.max(1e-300),
            rep2.sample_count(),
            rep2.infeasible_steps
        );
    }
    println!("total {:?}", t0.elapsed());
}
