//! Corpus manifests: one line per utterance, feature path, a tab, then the
//! space-separated transcript labels. Paths are resolved relative to the
//! manifest's directory so a corpus directory can be moved wholesale.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::{read_features, FeatureSequence};

/// One manifest row.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Path as written in the manifest (possibly relative).
    pub path: PathBuf,
    pub transcript: Vec<String>,
}

/// A list of utterances: feature file plus reference transcript.
#[derive(Debug, Clone)]
pub struct CorpusManifest {
    /// Directory the manifest was loaded from; relative entry paths are
    /// resolved against it.
    pub base_dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn resolve_path(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    /// Sorted set of distinct transcript labels.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut v: BTreeSet<String> = BTreeSet::new();
        for e in &self.entries {
            for l in &e.transcript {
                v.insert(l.clone());
            }
        }
        v.into_iter().collect()
    }

    /// Utterance id: the feature file stem.
    pub fn utterance_id(entry: &ManifestEntry) -> String {
        entry
            .path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| entry.path.display().to_string())
    }
}

/// Parse a manifest file. Duplicate feature paths and transcript-less
/// lines are rejected.
pub fn load_manifest(path: &Path) -> Result<CorpusManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (p, labels) = match line.split_once('\t') {
            Some((p, rest)) => (p.trim(), rest),
            None => {
                return Err(Error::ManifestParse {
                    path: path.into(),
                    line: lineno,
                    message: "missing tab separator between path and transcript".into(),
                })
            }
        };
        let transcript: Vec<String> = labels.split_whitespace().map(str::to_string).collect();
        if transcript.is_empty() {
            return Err(Error::ManifestParse {
                path: path.into(),
                line: lineno,
                message: format!("empty transcript for `{p}`"),
            });
        }
        if !seen.insert(p.to_string()) {
            return Err(Error::ManifestParse {
                path: path.into(),
                line: lineno,
                message: format!("duplicate feature path `{p}`"),
            });
        }
        entries.push(ManifestEntry {
            path: PathBuf::from(p),
            transcript,
        });
    }
    Ok(CorpusManifest { base_dir, entries })
}

/// Write a manifest in the same one-line-per-utterance form.
pub fn write_manifest(manifest: &CorpusManifest, path: &Path) -> Result<()> {
    let mut out = String::new();
    for e in &manifest.entries {
        out.push_str(&format!(
            "{}\t{}\n",
            e.path.display(),
            e.transcript.join(" ")
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// A fully loaded corpus: features in memory alongside transcripts.
#[derive(Debug, Clone)]
pub struct Utterance {
    pub id: String,
    pub features: FeatureSequence,
    pub transcript: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub utterances: Vec<Utterance>,
}

impl Corpus {
    pub fn load(manifest: &CorpusManifest) -> Result<Corpus> {
        let mut utterances = Vec::with_capacity(manifest.entries.len());
        for e in &manifest.entries {
            let features = read_features(&manifest.resolve_path(e))?;
            utterances.push(Utterance {
                id: CorpusManifest::utterance_id(e),
                features,
                transcript: e.transcript.clone(),
            });
        }
        Ok(Corpus { utterances })
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.utterances.first().map_or(0, |u| u.features.dim())
    }

    /// Per-dimension global mean and variance over every frame, plus the
    /// frame count. Training floors and flat initialization start here.
    pub fn global_stats(&self) -> Result<GlobalStats> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::Usage("empty corpus".into()));
        }
        let mut count = 0usize;
        let mut sum = vec![0.0f64; d];
        let mut sum_sq = vec![0.0f64; d];
        for u in &self.utterances {
            if u.features.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: u.features.dim(),
                });
            }
            for t in 0..u.features.frames() {
                for (k, &v) in u.features.frame(t).iter().enumerate() {
                    let v = v as f64;
                    sum[k] += v;
                    sum_sq[k] += v * v;
                }
                count += 1;
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let var: Vec<f64> = sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| (sq / count as f64 - m * m).max(1e-8))
            .collect();
        Ok(GlobalStats {
            frame_count: count,
            mean,
            var,
        })
    }
}

/// Corpus-wide per-dimension statistics.
#[derive(Debug, Clone)]
pub struct GlobalStats {
    pub frame_count: usize,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}
