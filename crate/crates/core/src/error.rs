use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {}", join(.0))]
    InvalidConfig(Vec<ConfigError>),

    #[error("cannot place {events} events in a stream of {n_chunks} chunks")]
    TooManyEvents { events: usize, n_chunks: usize },

    #[error("chunk index {index} out of range for a stream of {n_chunks} chunks")]
    ChunkOutOfRange { index: usize, n_chunks: usize },

    #[error(
        "dimensionality too low and projection disallowed: {clusters} clusters need 2^d > {clusters}, \
         but n_informative = {n_informative}"
    )]
    DimensionalityTooLow { clusters: usize, n_informative: usize },

    #[error("unknown cluster id {id} (generator holds {total} clusters)")]
    UnknownCluster { id: usize, total: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("chunk is empty")]
    EmptyChunk,

    #[error("the fitting chunk holds a single class; a margin classifier cannot be fit")]
    SingleClass,

    #[error("model has not been fit yet")]
    NotFitted,

    #[error("{0}")]
    Unsupported(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn join(errors: &[ConfigError]) -> String {
    errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
