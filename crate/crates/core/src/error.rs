use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}:{line}: {message}")]
    Load {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{file}: {what} count mismatch, manifest says {expected}, found {found}")]
    CountMismatch {
        file: PathBuf,
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid {kind} id {id} (vocabulary size {size})")]
    InvalidId {
        kind: &'static str,
        id: usize,
        size: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error("unsupported format version {found} in {path} (expected {expected})")]
    Version {
        path: String,
        expected: u32,
        found: u32,
    },

    #[error("entity {0} has no neighbours and no known types to aggregate")]
    NoEvidence(usize),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing score row for entity {0}")]
    MissingRow(usize),

    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
