use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Variants are grouped by failure class so front ends can map them onto
/// distinct exit codes (see [`Error::class`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("character {ch:?} at byte offset {offset} is not in the vocabulary")]
    OutOfVocabulary { ch: char, offset: usize },

    #[error("characters not in the vocabulary: {0:?}")]
    UnknownCharacters(Vec<char>),

    #[error("id {id} out of range for vocabulary of size {size}")]
    IdOutOfRange { id: usize, size: usize },

    #[error("chunk too short: {len} characters, need at least {needed}")]
    ChunkTooShort { len: usize, needed: usize },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("divergence detected in {0}")]
    Divergence(String),

    #[error("NLI provider unavailable: {0}")]
    ProviderUnavailable(String),

    #[error("NLI protocol error: {0}")]
    Protocol(String),

    #[error("checkpoint integrity error: {0}")]
    Integrity(String),

    #[error("unsupported checkpoint format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("{} is locked by another process (remove the .lock file if stale)", .0.display())]
    Locked(PathBuf),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Coarse failure class of an [`Error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
    Provider,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Json(_) => ErrorClass::Config,
            Error::Divergence(_) => ErrorClass::Numeric,
            Error::ProviderUnavailable(_) | Error::Protocol(_) => ErrorClass::Provider,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
