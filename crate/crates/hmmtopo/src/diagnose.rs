//! Transition/emission discriminability imbalance.
//!
//! Along forward-backward ideal paths, each taken transition `s(t) → i` is
//! compared against every competitor `k` in the same row's support:
//!
//! ```text
//! ln α = ln a(s(t) → k) − ln a(s(t) → i)     (transition ratio)
//! ln β = ln b_i(O_{t+1}) − ln b_k(O_{t+1})   (emission ratio)
//! ```
//!
//! The variances of the two sample sets estimate the dynamic ranges of the
//! transition and emission discriminability forces. On trained systems the
//! emission variance dwarfs the transition variance, which is what makes
//! transition weights behave like binary support flags during decoding —
//! and why topology (the support set itself) is worth learning.

use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::manifest::Corpus;
use crate::model::{CompositeModel, ModelSet, Node};
use crate::parallel::parallel_map;
use crate::train::forward_backward;

/// Samples and summary statistics of the imbalance experiment.
#[derive(Debug, Clone)]
pub struct ImbalanceReport {
    /// Paired `(ln α, ln β)` samples, one per (transition, competitor).
    pub samples: Vec<(f64, f64)>,
    pub mean_ln_alpha: f64,
    pub mean_ln_beta: f64,
    /// Population variances of the log-domain samples.
    pub var_ln_alpha: f64,
    pub var_ln_beta: f64,
    /// Ideal-path steps whose adjacent states were not linked by a nonzero
    /// transition (per-frame argmax can produce those); they are skipped.
    pub infeasible_steps: usize,
}

fn mean_var(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

impl ImbalanceReport {
    fn from_samples(samples: Vec<(f64, f64)>, infeasible_steps: usize) -> Result<ImbalanceReport> {
        if samples.is_empty() {
            return Err(Error::Diagnostic(
                "no valid (transition, competitor) samples".into(),
            ));
        }
        let (mean_ln_alpha, var_ln_alpha) = mean_var(samples.iter().map(|s| s.0));
        let (mean_ln_beta, var_ln_beta) = mean_var(samples.iter().map(|s| s.1));
        Ok(ImbalanceReport {
            samples,
            mean_ln_alpha,
            mean_ln_beta,
            var_ln_alpha,
            var_ln_beta,
            infeasible_steps,
        })
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    /// `ln` of the linear-domain standard deviation implied by treating the
    /// log-domain samples as normal (so the linear variable is lognormal):
    /// `ln std X = μ + σ²/2 + ln(exp(σ²) − 1)/2` for `ln X ~ N(μ, σ²)`.
    fn ln_linear_std(mean: f64, var: f64) -> f64 {
        // ln(expm1(v)) without overflow; for large v it is v itself.
        let ln_expm1 = if var > 30.0 { var } else { var.exp_m1().ln() };
        mean + var / 2.0 + 0.5 * ln_expm1
    }

    /// `ln [std(β) / std(α)]` in the linear domain, under the lognormal
    /// reading documented above.
    pub fn ln_linear_std_ratio(&self) -> f64 {
        Self::ln_linear_std(self.mean_ln_beta, self.var_ln_beta)
            - Self::ln_linear_std(self.mean_ln_alpha, self.var_ln_alpha)
    }

    /// Linear-domain ratio; may be infinite when the imbalance is extreme.
    pub fn linear_std_ratio(&self) -> f64 {
        self.ln_linear_std_ratio().exp()
    }

    pub fn to_text(&self) -> String {
        format!(
            "samples            {}\ninfeasible steps   {}\nvar ln(alpha)      {:.6}\nvar ln(beta)       {:.6}\nmean ln(alpha)     {:.6}\nmean ln(beta)      {:.6}\nlinear std ratio   {:.6e}  (ln {:.6})\n",
            self.sample_count(),
            self.infeasible_steps,
            self.var_ln_alpha,
            self.var_ln_beta,
            self.mean_ln_alpha,
            self.mean_ln_beta,
            self.linear_std_ratio(),
            self.ln_linear_std_ratio(),
        )
    }

    pub fn samples_csv(&self) -> String {
        let mut out = String::from("ln_alpha,ln_beta\n");
        for (a, b) in &self.samples {
            out.push_str(&format!("{a:.9e},{b:.9e}\n"));
        }
        out
    }
}

/// Per-frame argmax of the forward-backward state posterior over the
/// transcript's concatenated model; ties go to the lowest state index.
pub fn ideal_path(models: &ModelSet, transcript: &[String], features: &FeatureSequence) -> Result<Vec<usize>> {
    let indices = models.resolve(transcript)?;
    let composite = CompositeModel::concat(models, &indices)?;
    ideal_path_composite(&composite, features)
}

fn ideal_path_composite(
    composite: &CompositeModel,
    features: &FeatureSequence,
) -> Result<Vec<usize>> {
    let (post, _) = forward_backward(&composite.model, features)?;
    Ok(post
        .gamma
        .iter()
        .map(|row| {
            let mut best = 0usize;
            for (i, &g) in row.iter().enumerate() {
                if g > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect())
}

struct UttSamples {
    samples: Vec<(f64, f64)>,
    infeasible: usize,
}

fn utterance_samples(
    models: &ModelSet,
    indices: &[usize],
    features: &FeatureSequence,
) -> Result<UttSamples> {
    let composite = CompositeModel::concat(models, indices)?;
    let path = ideal_path_composite(&composite, features)?;
    let t = composite.model.transitions();
    let mut frame = vec![0.0f64; features.dim()];
    let mut samples = Vec::new();
    let mut infeasible = 0usize;

    for step in 0..path.len().saturating_sub(1) {
        let s = path[step];
        let i = path[step + 1];
        let ln_a_i = t.ln_at(Node::Emit(s), Node::Emit(i));
        if ln_a_i == f64::NEG_INFINITY {
            infeasible += 1;
            continue;
        }
        features.frame_f64(step + 1, &mut frame);
        let ln_b_i = composite.model.emissions()[i].log_density_unchecked(&frame);
        for (to, ln_a_k) in t.successors(Node::Emit(s)) {
            let k = match to {
                Node::Emit(k) if k != i => k,
                _ => continue,
            };
            let ln_b_k = composite.model.emissions()[k].log_density_unchecked(&frame);
            samples.push((ln_a_k - ln_a_i, ln_b_i - ln_b_k));
        }
    }
    Ok(UttSamples {
        samples,
        infeasible,
    })
}

/// Run the imbalance experiment over a transcribed corpus.
pub fn imbalance_coefficients(
    models: &ModelSet,
    corpus: &Corpus,
    jobs: usize,
) -> Result<ImbalanceReport> {
    if corpus.is_empty() {
        return Err(Error::Usage("empty corpus".into()));
    }
    let transcripts: Vec<Vec<usize>> = corpus
        .utterances
        .iter()
        .map(|u| models.resolve(&u.transcript))
        .collect::<Result<_>>()?;
    let items: Vec<usize> = (0..corpus.len()).collect();
    let results = parallel_map(&items, jobs, |&u| {
        utterance_samples(models, &transcripts[u], &corpus.utterances[u].features)
    });

    let mut samples = Vec::new();
    let mut infeasible = 0usize;
    for r in results {
        match r {
            Ok(mut s) => {
                samples.append(&mut s.samples);
                infeasible += s.infeasible;
            }
            Err(Error::AlignmentInfeasible { .. }) => infeasible += 1,
            Err(e) => return Err(e),
        }
    }
    ImbalanceReport::from_samples(samples, infeasible)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emission::{Gaussian, GmmEmission};
    use crate::logprob::log_sum_exp_raw;
    use crate::manifest::Utterance;
    use crate::model::{HmmModel, TransitionMatrix};

    fn gmm1(mean: f64) -> GmmEmission {
        GmmEmission::single(Gaussian::new(vec![mean], vec![1.0]).unwrap())
    }

    fn seq(vals: &[f32]) -> FeatureSequence {
        FeatureSequence::from_rows(&vals.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap()
    }

    fn one_word_corpus(label: &str, utts: Vec<FeatureSequence>) -> Corpus {
        Corpus {
            utterances: utts
                .into_iter()
                .enumerate()
                .map(|(i, features)| Utterance {
                    id: format!("u{i}"),
                    features,
                    transcript: vec![label.to_string()],
                })
                .collect(),
        }
    }

    #[test]
    fn single_state_model_gives_a_constant_path() {
        let m = HmmModel::left_to_right("w", vec![gmm1(0.0)]).unwrap();
        let set = ModelSet::new(vec![m]).unwrap();
        let path = ideal_path(&set, &["w".into()], &seq(&[0.1, -0.2, 0.3])).unwrap();
        assert_eq!(path, vec![0, 0, 0]);
    }

    #[test]
    fn staircase_path_when_frames_equal_states() {
        let m =
            HmmModel::left_to_right("w", vec![gmm1(0.0), gmm1(3.0), gmm1(6.0)]).unwrap();
        let set = ModelSet::new(vec![m]).unwrap();
        let path = ideal_path(&set, &["w".into()], &seq(&[0.0, 3.0, 6.0])).unwrap();
        assert_eq!(path, vec![0, 1, 2]);
    }

    #[test]
    fn ideal_path_matches_brute_force_gamma_argmax() {
        // Dense 3-state model, T = 4; gamma recomputed by path enumeration.
        let mut t = TransitionMatrix::new(3);
        t.set_linear(Node::Entry, Node::Emit(0), 0.5).unwrap();
        t.set_linear(Node::Entry, Node::Emit(1), 0.3).unwrap();
        t.set_linear(Node::Entry, Node::Emit(2), 0.2).unwrap();
        let rows = [
            [0.4, 0.3, 0.2, 0.1],
            [0.2, 0.4, 0.2, 0.2],
            [0.1, 0.3, 0.3, 0.3],
        ];
        for (i, row) in rows.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                let to = if j == 3 { Node::Exit } else { Node::Emit(j) };
                t.set_linear(Node::Emit(i), to, p).unwrap();
            }
        }
        let m = HmmModel::new("w", t, vec![gmm1(0.0), gmm1(1.2), gmm1(-0.8)]).unwrap();
        let f = seq(&[0.3, 1.0, -0.4, 0.9]);

        // Path-sum gamma oracle.
        let n = 3usize;
        let frames = 4usize;
        let trans = m.transitions();
        let mut buf = vec![0.0];
        let mut per_state: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n]; frames];
        let mut all = Vec::new();
        for code in 0..n.pow(frames as u32) {
            let mut c = code;
            let path: Vec<usize> = (0..frames)
                .map(|_| {
                    let s = c % n;
                    c /= n;
                    s
                })
                .collect();
            let mut lp = trans.ln_at(Node::Entry, Node::Emit(path[0]));
            f.frame_f64(0, &mut buf);
            lp += m.emissions()[path[0]].log_density(&buf).unwrap();
            for step in 1..frames {
                lp += trans.ln_at(Node::Emit(path[step - 1]), Node::Emit(path[step]));
                f.frame_f64(step, &mut buf);
                lp += m.emissions()[path[step]].log_density(&buf).unwrap();
            }
            lp += trans.ln_at(Node::Emit(path[frames - 1]), Node::Exit);
            for (step, &s) in path.iter().enumerate() {
                per_state[step][s].push(lp);
            }
            all.push(lp);
        }
        let total = log_sum_exp_raw(&all);
        let oracle_path: Vec<usize> = (0..frames)
            .map(|step| {
                let gammas: Vec<f64> = (0..n)
                    .map(|s| (log_sum_exp_raw(&per_state[step][s]) - total).exp())
                    .collect();
                let mut best = 0;
                for (i, &g) in gammas.iter().enumerate() {
                    if g > gammas[best] {
                        best = i;
                    }
                }
                best
            })
            .collect();

        let set = ModelSet::new(vec![m]).unwrap();
        let path = ideal_path(&set, &["w".into()], &f).unwrap();
        assert_eq!(path, oracle_path);
    }

    #[test]
    fn equiprobable_rows_have_zero_alpha_variance() {
        // Left-to-right rows are 0.5/0.5, so every α ratio is 1.
        let m = HmmModel::left_to_right("w", vec![gmm1(0.0), gmm1(4.0)]).unwrap();
        let set = ModelSet::new(vec![m]).unwrap();
        let corpus = one_word_corpus("w", vec![seq(&[0.0, 0.1, 3.9, 4.0])]);
        let report = imbalance_coefficients(&set, &corpus, 1).unwrap();
        assert!(report.sample_count() > 0);
        assert!(report.var_ln_alpha.abs() < 1e-18);
        for (a, _) in &report.samples {
            assert_eq!(*a, 0.0);
        }
    }

    #[test]
    fn shared_emissions_have_zero_beta_samples() {
        let mut t = TransitionMatrix::new(2);
        t.set_linear(Node::Entry, Node::Emit(0), 1.0).unwrap();
        t.set_linear(Node::Emit(0), Node::Emit(0), 0.7).unwrap();
        t.set_linear(Node::Emit(0), Node::Emit(1), 0.3).unwrap();
        t.set_linear(Node::Emit(1), Node::Emit(1), 0.4).unwrap();
        t.set_linear(Node::Emit(1), Node::Exit, 0.6).unwrap();
        let m = HmmModel::new("w", t, vec![gmm1(0.0), gmm1(0.0)]).unwrap();
        let set = ModelSet::new(vec![m]).unwrap();
        let corpus = one_word_corpus("w", vec![seq(&[0.0, 0.2, -0.1, 0.1])]);
        let report = imbalance_coefficients(&set, &corpus, 1).unwrap();
        assert!(report.sample_count() > 0);
        assert!(report.var_ln_beta.abs() < 1e-18);
        // Transition ratios are not all 1 here.
        assert!(report.var_ln_alpha > 1e-6);
    }

    #[test]
    fn variance_is_order_invariant() {
        let m = HmmModel::left_to_right("w", vec![gmm1(0.0), gmm1(4.0)]).unwrap();
        let set = ModelSet::new(vec![m]).unwrap();
        let corpus = one_word_corpus(
            "w",
            vec![seq(&[0.0, 0.1, 3.9, 4.0]), seq(&[0.2, 4.2, 4.0])],
        );
        let fwd = imbalance_coefficients(&set, &corpus, 1).unwrap();
        let rev_corpus = Corpus {
            utterances: corpus.utterances.iter().rev().cloned().collect(),
        };
        let rev = imbalance_coefficients(&set, &rev_corpus, 1).unwrap();
        assert!((fwd.var_ln_beta - rev.var_ln_beta).abs() < 1e-12);
        assert!((fwd.var_ln_alpha - rev.var_ln_alpha).abs() < 1e-12);
    }
}
