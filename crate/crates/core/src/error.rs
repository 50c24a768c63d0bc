use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Every variant except [`Error::Io`] is a validation failure: the input
/// was readable but violates a contract. The CLI maps the two families to
/// distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: field `{field}`: {reason}")]
    Record {
        line: usize,
        field: &'static str,
        reason: String,
    },

    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: usize, id: String },

    #[error("line {line}: malformed JSON: {reason}")]
    Json { line: usize, reason: String },

    #[error("embedding file line {line} (id `{id}`): {reason}")]
    EmbeddingRow {
        line: usize,
        id: String,
        reason: String,
    },

    #[error("embedding header: {0}")]
    EmbeddingHeader(String),

    #[error("zero vector for id `{0}`")]
    ZeroVector(String),

    #[error("missing embedding for item `{0}`")]
    MissingEmbedding(String),

    #[error("invalid label scheme: {0}")]
    Scheme(String),

    #[error("invalid fractions: {0}")]
    Fractions(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("neighborhood graph is disconnected into {} components (sizes {sizes:?})", sizes.len())]
    DisconnectedGraph { sizes: Vec<usize> },

    #[error("grid geometry mismatch: {0}")]
    GridMismatch(String),

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
