use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the matching pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("embedding file {}: bad magic {found:?}, expected \"EMB1\"", path.display())]
    BadMagic { path: PathBuf, found: [u8; 4] },

    #[error("count mismatch: file holds {found} records, template has {expected} minutiae")]
    CountMismatch { expected: usize, found: usize },

    #[error("non-finite value {value} at {what}")]
    NonFinite { what: String, value: f64 },

    #[error("minutia index {index} out of range for template with {len} minutiae")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,

    #[error("relaxation needs at least one pair")]
    EmptyPairs,

    #[error("template id {0:?} is already enrolled")]
    DuplicateId(String),

    #[error("gallery is empty")]
    EmptyGallery,

    #[error("no identification results to summarize")]
    EmptyResults,

    #[error("query {0:?} is missing from one of the rank lists")]
    MissingQuery(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
