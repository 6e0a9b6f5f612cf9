// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

use crate::instruction_parser::TaskType;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown concept token `{0}`")]
    UnknownToken(String),

    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),

    #[error("stored embedding for `{token}` does not match the one regenerated from (seed, axes)")]
    EmbeddingMismatch { token: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("cosine is undefined for a zero-norm vector")]
    ZeroNorm,

    #[error("similarity against the null prompt is undefined")]
    NullPrompt,

    #[error("invalid scene graph: {0}")]
    InvalidGraph(String),

    #[error("patch op #{index} is not applicable: {reason}")]
    InapplicableOp { index: usize, reason: String },

    #[error("grammar error in `{input}`: expected {expected}")]
    Grammar { input: String, expected: String },

    #[error("cannot resolve `{0}` in the scene")]
    UnresolvedReferent(String),

    #[error("task `{0}` is not supported by the editing engine")]
    UnsupportedTask(TaskType),

    #[error("invalid replacement list: {0}")]
    InvalidReplacement(String),

    #[error("time {0} is outside the velocity query range (0, 1]")]
    TimeOutOfRange(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// Stable machine-readable tag, used on stderr by the CLI and as the FFI error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnknownToken(_) => "unknown_token",
            Error::InvalidVocabulary(_) | Error::EmbeddingMismatch { .. } => "vocabulary",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ZeroNorm | Error::NullPrompt => "undefined_similarity",
            Error::InvalidGraph(_) => "invalid_graph",
            Error::InapplicableOp { .. } => "inapplicable_op",
            Error::Grammar { .. } => "grammar",
            Error::UnresolvedReferent(_) => "unresolved_referent",
            Error::UnsupportedTask(_) => "unsupported_task",
            Error::InvalidReplacement(_) => "invalid_replacement",
            Error::TimeOutOfRange(_) => "time_out_of_range",
            Error::InvalidConfig(_) => "config",
            Error::Io { .. } => "io",
            Error::Json { .. } | Error::Csv(_) => "serialization",
        }
    }
}
