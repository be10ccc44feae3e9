use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension for {what}: {value}")]
    InvalidDimension { what: &'static str, value: usize },

    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("coordinate pair ({0}, {0}) is not a pair of distinct indices")]
    InvalidPair(usize),

    #[error("incompatible blocks: {0}")]
    IncompatibleBlocks(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("marginal {coord} is degenerate: {reason}")]
    DegenerateMarginal { coord: usize, reason: String },

    #[error("model returned non-finite {quantity} at node {node:?}")]
    Evaluation {
        quantity: &'static str,
        node: Vec<f64>,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("hybrid sum is undefined when both term counts are zero")]
    UndefinedSum,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("{path}: format error at byte {offset}: {message}")]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

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

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfiguration(msg.into())
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            actual,
        })
    }
}
