use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input arity mismatch: genome expects {expected} inputs, got {got}")]
    InputArity { expected: usize, got: usize },

    #[error("cannot parse expression: {0}")]
    Expression(String),
    #[error("invalid genome: {0}")]
    InvalidGenome(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("unknown rule `{name}`; known rules: {known}")]
    UnknownRule { name: String, known: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
