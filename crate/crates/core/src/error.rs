use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid pair ({i}, {j}) for {items} items: need i < j < items")]
    InvalidPair { i: usize, j: usize, items: usize },

    #[error("invalid ranking: {0}")]
    InvalidRanking(String),

    #[error("observation vector contains Unknown at index {0}, a full vector is required")]
    UnknownInFullVector(usize),

    #[error("index {index} out of range for {len} observations")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("empty candidate set")]
    NoCandidates,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no hypothesis is consistent with the observed values")]
    Inconsistent,

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("malformed {what} at line {line}: {msg}")]
    Parse {
        what: &'static str,
        line: usize,
        msg: String,
    },

    #[error("query oracle failed: {0}")]
    Oracle(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
