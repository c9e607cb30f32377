use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("prox step must be positive, got {0}")]
    NonPositiveStep(f64),

    #[error("rho must be greater than 1, got {0}")]
    RhoNotAboveOne(f64),

    #[error("linear rate requires a positive strong convexity parameter")]
    NoStrongConvexity,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("divergence at epoch {epoch}: objective {objective:e} (initial {initial:e}); try a smaller gamma")]
    Divergence {
        epoch: usize,
        objective: f64,
        initial: f64,
    },

    #[error("non-finite value produced in block {block}; try a smaller gamma")]
    NonFinite { block: usize },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
