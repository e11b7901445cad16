//! Seeded synthetic corpora sampled from ground-truth generator HMMs.
//!
//! Word identity is carried as much by transition structure as by emission
//! means: generators share a pool of emission clusters and differ in their
//! (sparse, not necessarily left-to-right) topologies, so recognizers that
//! model dynamics precisely have something to gain. The generator returns
//! its models and the sampled state paths so downstream metrics have exact
//! oracles.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::KvFile;
use crate::emission::{Gaussian, GmmEmission};
use crate::error::{Error, Result};
use crate::features::{write_features, FeatureSequence};
use crate::manifest::{write_manifest, CorpusManifest, ManifestEntry, Utterance};
use crate::model::{HmmModel, ModelSet, Node, TransitionMatrix};

/// Hard cap on sampled utterance length; hit only by near-degenerate specs.
const MAX_FRAMES: usize = 100_000;

/// Everything that determines a synthetic corpus. The seed fixes the
/// corpus bit-for-bit.
///
/// The default task is dynamics-rich: every word draws its states from the
/// same small cluster pool (laid out deterministically on a circle of
/// radius `cluster_spread`), so emissions alone say little about word
/// identity; what distinguishes words is the order their states visit the
/// clusters, including a loop-back cycle that no fixed forward chain can
/// represent.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub vocab_size: usize,
    pub dim: usize,
    /// Emitting states per generator model.
    pub states_per_word: usize,
    /// Extra random edges (skips, back edges) per generator, beyond the
    /// segment chain and the loop-back edge.
    pub extra_edges: usize,
    /// Dwell probability of each state's self-loop, in [0, 1).
    pub self_loop: f64,
    /// Probability mass (fraction of the last state's non-dwell mass) on
    /// the cycle back to the first state. Positive values make the
    /// generator topology non-left-to-right.
    pub loop_back: f64,
    /// Size of the shared emission-cluster pool; 0 gives every state its
    /// own random mean (words then separate on emissions alone).
    pub cluster_count: usize,
    /// Radius of the deterministic cluster circle (or spread of random
    /// means when `cluster_count` is 0).
    pub cluster_spread: f64,
    /// Generator emission standard deviation per dimension.
    pub emit_sigma: f64,
    /// Additive observation noise standard deviation.
    pub noise_sigma: f64,
    /// Force consecutive states onto different clusters and make every
    /// word's cluster pattern unique, so dynamics fully determine the word.
    pub distinct_patterns: bool,
    pub train_utterances: usize,
    pub test_utterances: usize,
    pub words_min: usize,
    pub words_max: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            vocab_size: 5,
            dim: 2,
            states_per_word: 4,
            extra_edges: 0,
            self_loop: 0.55,
            loop_back: 0.35,
            cluster_count: 4,
            cluster_spread: 3.0,
            emit_sigma: 0.6,
            noise_sigma: 0.0,
            distinct_patterns: true,
            train_utterances: 220,
            test_utterances: 120,
            words_min: 2,
            words_max: 5,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0
            || self.dim == 0
            || self.states_per_word == 0
            || self.train_utterances == 0
            || self.words_min == 0
        {
            return Err(Error::Usage("synthetic spec has a zero-sized field".into()));
        }
        if self.words_max < self.words_min {
            return Err(Error::Usage("words_max < words_min".into()));
        }
        if !(0.0..1.0).contains(&self.self_loop) {
            return Err(Error::Usage(format!(
                "self_loop {} must be in [0, 1)",
                self.self_loop
            )));
        }
        if !(0.0..1.0).contains(&self.loop_back) {
            return Err(Error::Usage(format!(
                "loop_back {} must be in [0, 1)",
                self.loop_back
            )));
        }
        if self.emit_sigma < 0.0 || self.noise_sigma < 0.0 || self.cluster_spread < 0.0 {
            return Err(Error::Usage("negative sigma".into()));
        }
        Ok(())
    }

    pub fn from_kv(mut kv: KvFile) -> Result<SyntheticSpec> {
        let d = SyntheticSpec::default();
        let spec = SyntheticSpec {
            vocab_size: kv.take_parsed("vocab_size", d.vocab_size)?,
            dim: kv.take_parsed("dim", d.dim)?,
            states_per_word: kv.take_parsed("states_per_word", d.states_per_word)?,
            extra_edges: kv.take_parsed("extra_edges", d.extra_edges)?,
            self_loop: kv.take_parsed("self_loop", d.self_loop)?,
            loop_back: kv.take_parsed("loop_back", d.loop_back)?,
            cluster_count: kv.take_parsed("cluster_count", d.cluster_count)?,
            cluster_spread: kv.take_parsed("cluster_spread", d.cluster_spread)?,
            emit_sigma: kv.take_parsed("emit_sigma", d.emit_sigma)?,
            noise_sigma: kv.take_parsed("noise_sigma", d.noise_sigma)?,
            distinct_patterns: kv.take_bool("distinct_patterns", d.distinct_patterns)?,
            train_utterances: kv.take_parsed("train_utterances", d.train_utterances)?,
            test_utterances: kv.take_parsed("test_utterances", d.test_utterances)?,
            words_min: kv.take_parsed("words_min", d.words_min)?,
            words_max: kv.take_parsed("words_max", d.words_max)?,
            seed: kv.take_parsed("seed", d.seed)?,
        };
        kv.finish()?;
        spec.validate()?;
        Ok(spec)
    }
}

/// One frame of a recorded generator path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathStep {
    /// Position of the word in the utterance transcript.
    pub word_pos: usize,
    /// Generator model index in the returned [`ModelSet`].
    pub model_idx: usize,
    /// Emitting state within that model.
    pub state: usize,
}

/// A sampled split with its exact per-frame state paths.
#[derive(Debug, Clone)]
pub struct GeneratedSplit {
    pub utterances: Vec<Utterance>,
    pub paths: Vec<Vec<PathStep>>,
}

/// A complete sampled corpus plus the generators that produced it.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub spec: SyntheticSpec,
    pub models: ModelSet,
    pub train: GeneratedSplit,
    pub test: GeneratedSplit,
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Cluster centers on a circle of the given radius (evenly spaced on a
/// line for one-dimensional features). Deterministic, so cluster
/// separation does not depend on the seed.
fn cluster_circle(count: usize, dim: usize, radius: f64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| {
            let mut c = vec![0.0; dim];
            if dim == 1 {
                c[0] = if count == 1 {
                    0.0
                } else {
                    radius * (2.0 * k as f64 / (count - 1) as f64 - 1.0)
                };
            } else {
                let angle = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                c[0] = radius * angle.cos();
                c[1] = radius * angle.sin();
            }
            c
        })
        .collect()
}

/// Draw a cluster pattern for one word: one cluster per state, optionally
/// with distinct consecutive clusters and vocabulary-wide uniqueness.
fn draw_pattern(
    spec: &SyntheticSpec,
    taken: &[Vec<usize>],
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let k = spec.cluster_count;
    for _ in 0..500 {
        let mut pattern = Vec::with_capacity(spec.states_per_word);
        for i in 0..spec.states_per_word {
            let mut c = rng.random_range(0..k);
            if spec.distinct_patterns && k > 1 {
                while i > 0 && c == pattern[i - 1] {
                    c = rng.random_range(0..k);
                }
            }
            pattern.push(c);
        }
        if !spec.distinct_patterns || !taken.contains(&pattern) {
            return pattern;
        }
    }
    // Pattern space exhausted; accept a duplicate rather than spin.
    (0..spec.states_per_word)
        .map(|_| rng.random_range(0..k))
        .collect()
}

/// Build the per-class generator models.
fn build_generators(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Result<ModelSet> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let s = spec.states_per_word;

    let clusters = cluster_circle(spec.cluster_count, spec.dim, spec.cluster_spread);
    let var = vec![spec.emit_sigma.max(1e-4).powi(2); spec.dim];

    let mut models = Vec::with_capacity(spec.vocab_size);
    let mut patterns: Vec<Vec<usize>> = Vec::new();
    let width = (spec.vocab_size as f64).log10().floor() as usize + 1;
    for w in 0..spec.vocab_size {
        // Emissions: each state sits on a cluster (or its own random mean).
        let mut emissions = Vec::with_capacity(s);
        if spec.cluster_count > 0 {
            let pattern = draw_pattern(spec, &patterns, rng);
            for &c in &pattern {
                emissions.push(GmmEmission::single(Gaussian::new(
                    clusters[c].clone(),
                    var.clone(),
                )?));
            }
            patterns.push(pattern);
        } else {
            for _ in 0..s {
                let mean: Vec<f64> = (0..spec.dim)
                    .map(|_| spec.cluster_spread * normal.sample(rng))
                    .collect();
                emissions.push(GmmEmission::single(Gaussian::new(mean, var.clone())?));
            }
        }

        // Topology: a segment chain with an optional cycle from the last
        // state back near the front, plus random extra edges. The cycle
        // re-enters at state 1 (not 0) so a repeated cycle pass is
        // observationally distinct from the word simply occurring twice.
        // `(from, to)` with None for exit; the third member is a fixed
        // weight share or None for a random one.
        let mut edges: Vec<(usize, Option<usize>, Option<f64>)> = Vec::new();
        for i in 0..s - 1 {
            edges.push((i, Some(i + 1), None));
        }
        if spec.loop_back > 0.0 && s > 1 {
            let cycle_target = if s >= 3 { 1 } else { 0 };
            edges.push((s - 1, None, Some(1.0 - spec.loop_back)));
            edges.push((s - 1, Some(cycle_target), Some(spec.loop_back)));
        } else {
            edges.push((s - 1, None, None));
        }
        let mut tries = 0;
        let mut added = 0;
        while added < spec.extra_edges && tries < 1000 {
            tries += 1;
            let from = rng.random_range(0..s);
            let pick = rng.random_range(0..s + 1);
            let to = if pick == s { None } else { Some(pick) };
            if to == Some(from) || edges.iter().any(|&(f, t, _)| (f, t) == (from, to)) {
                continue;
            }
            edges.push((from, to, None));
            added += 1;
        }

        let mut t = TransitionMatrix::new(s);
        t.set_linear(Node::Entry, Node::Emit(0), 1.0)?;
        for i in 0..s {
            let targets: Vec<(Option<usize>, Option<f64>)> = edges
                .iter()
                .filter(|&&(f, _, _)| f == i)
                .map(|&(_, to, share)| (to, share))
                .collect();
            // Fixed shares are honored; the rest of the row's non-dwell
            // mass is split by random weights.
            let weights: Vec<f64> = targets
                .iter()
                .map(|(_, share)| share.unwrap_or_else(|| 0.25 + rng.random::<f64>()))
                .collect();
            let wsum: f64 = weights.iter().sum();
            let rem = 1.0 - spec.self_loop;
            if spec.self_loop > 0.0 {
                t.set_linear(Node::Emit(i), Node::Emit(i), spec.self_loop)?;
            }
            for ((to, _), w) in targets.iter().zip(&weights) {
                let node = match to {
                    Some(j) => Node::Emit(*j),
                    None => Node::Exit,
                };
                t.set_linear(Node::Emit(i), node, rem * w / wsum)?;
            }
        }

        let label = format!("w{w:0width$}");
        models.push(HmmModel::new(label, t, emissions)?);
    }
    ModelSet::new(models)
}

/// Sample one utterance's path and features from concatenated generators.
fn sample_utterance(
    models: &ModelSet,
    transcript_idx: &[usize],
    noise_sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<PathStep>, FeatureSequence)> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let dim = models.dim();
    let mut path = Vec::new();
    let mut rows: Vec<Vec<f32>> = Vec::new();

    for (word_pos, &mi) in transcript_idx.iter().enumerate() {
        let model = models.get(mi);
        let mut node = Node::Entry;
        loop {
            let succ = model.transitions().successors(node);
            debug_assert!(!succ.is_empty(), "validated generators have no dead ends");
            // Inverse-CDF draw over the row.
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = succ[succ.len() - 1].0;
            for &(to, ln_p) in &succ {
                acc += ln_p.exp();
                if u < acc {
                    chosen = to;
                    break;
                }
            }
            match chosen {
                Node::Exit => break,
                Node::Entry => unreachable!("no edges into entry"),
                Node::Emit(s) => {
                    path.push(PathStep {
                        word_pos,
                        model_idx: mi,
                        state: s,
                    });
                    let g = &model.emissions()[s].components()[0];
                    let row: Vec<f32> = (0..dim)
                        .map(|d| {
                            let v = g.mean()[d]
                                + g.var()[d].sqrt() * normal.sample(rng)
                                + noise_sigma * normal.sample(rng);
                            v as f32
                        })
                        .collect();
                    rows.push(row);
                    node = Node::Emit(s);
                }
            }
            if rows.len() > MAX_FRAMES {
                return Err(Error::Usage(
                    "sampled utterance exceeded the frame cap; self_loop too close to 1?".into(),
                ));
            }
        }
    }
    Ok((path, FeatureSequence::from_rows(&rows)?))
}

fn sample_split(
    models: &ModelSet,
    spec: &SyntheticSpec,
    count: usize,
    id_prefix: &str,
    stream: u64,
) -> Result<GeneratedSplit> {
    let mut rng = substream(spec.seed, stream);
    let mut utterances = Vec::with_capacity(count);
    let mut paths = Vec::with_capacity(count);
    for u in 0..count {
        let n_words = rng.random_range(spec.words_min..=spec.words_max);
        let transcript_idx: Vec<usize> = (0..n_words)
            .map(|_| rng.random_range(0..models.len()))
            .collect();
        let (path, features) =
            sample_utterance(models, &transcript_idx, spec.noise_sigma, &mut rng)?;
        let transcript: Vec<String> = transcript_idx
            .iter()
            .map(|&i| models.get(i).label().to_string())
            .collect();
        utterances.push(Utterance {
            id: format!("{id_prefix}{u:05}"),
            features,
            transcript,
        });
        paths.push(path);
    }
    Ok(GeneratedSplit { utterances, paths })
}

/// Sample a corpus. Identical specs produce identical corpora.
pub fn sample_corpus(spec: &SyntheticSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut model_rng = substream(spec.seed, 0);
    let models = build_generators(spec, &mut model_rng)?;
    let train = sample_split(&models, spec, spec.train_utterances, "u", 1)?;
    let test = sample_split(&models, spec, spec.test_utterances, "v", 2)?;
    Ok(SynthCorpus {
        spec: spec.clone(),
        models,
        train,
        test,
    })
}

/// Write a sampled corpus to disk: `features/*.hmf`, `train.manifest`,
/// `test.manifest`, and the ground-truth models under `truth/`.
pub fn write_corpus(corpus: &SynthCorpus, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let feat_dir = out_dir.join("features");
    let truth_dir = out_dir.join("truth");
    fs::create_dir_all(&feat_dir).map_err(|e| Error::io(&feat_dir, e))?;
    fs::create_dir_all(&truth_dir).map_err(|e| Error::io(&truth_dir, e))?;

    let mut manifests = Vec::new();
    for (split, name) in [(&corpus.train, "train"), (&corpus.test, "test")] {
        let mut entries = Vec::new();
        for u in &split.utterances {
            let rel = PathBuf::from("features").join(format!("{}.hmf", u.id));
            write_features(&u.features, &out_dir.join(&rel))?;
            entries.push(ManifestEntry {
                path: rel,
                transcript: u.transcript.clone(),
            });
        }
        let manifest = CorpusManifest {
            base_dir: out_dir.to_path_buf(),
            entries,
        };
        let path = out_dir.join(format!("{name}.manifest"));
        write_manifest(&manifest, &path)?;
        manifests.push(path);
    }

    for m in corpus.models.models() {
        crate::textfmt::write_model(m, &truth_dir.join(format!("{}.hmm", m.label())))?;
    }

    let test = manifests.pop().expect("two manifests");
    let train = manifests.pop().expect("two manifests");
    Ok((train, test))
}
