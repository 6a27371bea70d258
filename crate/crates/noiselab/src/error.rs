//! Error type shared across the crate.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation precondition (bad hyperparameter,
    /// dimension mismatch, inconsistent fractions, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A file or byte stream does not conform to its declared format.
    #[error("format error: {0}")]
    Format(String),

    /// Structurally valid input carrying out-of-range values.
    #[error("data error: {0}")]
    Data(String),

    /// An API was used out of contract (wrong split, stale cache, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A training or pipeline run failed; the message names the phase and,
    /// where applicable, the epoch/batch indices.
    #[error("run error in {phase}: {message}")]
    Run { phase: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn run(phase: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Run { phase: phase.into(), message: message.into() }
    }

    /// Short machine-parsable kind label used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Argument(_) => "argument",
            Error::Format(_) => "format",
            Error::Data(_) => "data",
            Error::Usage(_) => "usage",
            Error::Run { .. } => "run",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
        }
    }
}
