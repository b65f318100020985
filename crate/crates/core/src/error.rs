use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("unknown sensitive attribute `{0}`")]
    UnknownAttribute(String),

    #[error("cannot stratify: {0}")]
    Stratification(String),

    #[error("infeasible partition: {0}")]
    Partition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("party {party}: {source}")]
    Party {
        party: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("replication {replication} (seed {seed}): {source}")]
    Replication {
        replication: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("incompatible results: {0}")]
    Incompatible(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error record emitted by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Config(_) => "config",
            Error::MalformedHeader(_) => "malformed_header",
            Error::Row { .. } => "row",
            Error::InvalidDataset(_) => "invalid_dataset",
            Error::UnknownAttribute(_) => "unknown_attribute",
            Error::Stratification(_) => "stratification",
            Error::Partition(_) => "partition",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Diverged { .. } => "diverged",
            Error::NonFinite(_) => "non_finite",
            Error::Party { source, .. } | Error::Replication { source, .. } => source.kind(),
            Error::Incompatible(_) => "incompatible",
        }
    }
}
