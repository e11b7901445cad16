use std::path::PathBuf;

use crate::model::Violation;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad magic (expected HMF1)")]
    BadMagic { path: PathBuf },

    #[error("{path}: truncated payload (expected {expected} floats, got {got})")]
    Truncated {
        path: PathBuf,
        expected: usize,
        got: usize,
    },

    #[error("{path}: non-finite value in payload at index {index}")]
    NonFinite { path: PathBuf, index: usize },

    #[error("{path}:{line}: {message}")]
    ManifestParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: {message}")]
    ModelParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    #[error("invalid model `{label}`: {summary}")]
    InvalidModel { label: String, summary: String },

    #[error("no model for transcript label `{0}`")]
    ModelNotFound(String),

    #[error("utterance infeasible: {frames} frames, shortest path through the transcript model needs {min_frames}")]
    AlignmentInfeasible { frames: usize, min_frames: usize },

    #[error("training failed: all {0} utterances were infeasible")]
    AllUtterancesSkipped(usize),

    #[error("classification failed: no model admits a feasible path")]
    ClassificationFailure,

    #[error("state mapping mismatch: {0}")]
    StateMappingMismatch(String),

    #[error("diagnostic error: {0}")]
    Diagnostic(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid_model(label: &str, violations: &[Violation]) -> Self {
        let summary = violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ");
        Error::InvalidModel {
            label: label.to_string(),
            summary,
        }
    }

    /// True for errors caused by bad inputs rather than failed computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Usage(_)
                | Error::DimensionMismatch { .. }
                | Error::Io { .. }
                | Error::BadMagic { .. }
                | Error::Truncated { .. }
                | Error::NonFinite { .. }
                | Error::ManifestParse { .. }
                | Error::ModelParse { .. }
                | Error::ConfigParse { .. }
                | Error::InvalidModel { .. }
                | Error::ModelNotFound(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
