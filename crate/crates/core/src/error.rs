use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {message}")]
    Range { line: usize, message: String },

    #[error("line {line}: duplicate star id {id}")]
    DuplicateId { line: usize, id: u64 },

    #[error("catalog contains no data lines")]
    EmptyCatalog,

    #[error("domain error: {0}")]
    Domain(String),

    /// K-means++ could not find `k` distinct seeds.
    #[error("cannot initialise {k} centroids from {distinct} distinct vectors")]
    InfeasibleInit { k: usize, distinct: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Artifacts that do not fit together, e.g. a checkpoint and a dataset.
    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },

    #[error("training diverged at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },

    #[error("non-finite gradient")]
    NonFiniteGradient,

    #[error("forward trace does not match the parameters passed to backward")]
    StaleTrace,

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn format(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// `true` for errors caused by how a command was invoked rather than by its data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidArgument(_) | Error::Config(_))
    }
}
