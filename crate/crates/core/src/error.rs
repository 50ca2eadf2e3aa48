use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("line-count mismatch {0} vs {1}")]
    LineCountMismatch(usize, usize),

    #[error("{path}: empty line at line {line}")]
    EmptyLine { path: PathBuf, line: usize },

    #[error("token id {id} out of range for vocabulary of size {size}")]
    IdOutOfRange { id: u32, size: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("deterministic strategy yields duplicate sources (strategy {strategy}, n = {n})")]
    DeterministicDuplicates { strategy: String, n: usize },

    #[error("vocabulary hash mismatch for {side} side: checkpoint {expected}, given {actual}")]
    VocabHashMismatch {
        side: &'static str,
        expected: String,
        actual: String,
    },

    #[error("non-finite loss {loss} at update {update}")]
    NonFiniteLoss { loss: f64, update: usize },

    #[error("enumeration guard exceeded: {vocab}^{max_len} sequences > {limit}")]
    EnumerationTooLarge {
        vocab: usize,
        max_len: usize,
        limit: u64,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
