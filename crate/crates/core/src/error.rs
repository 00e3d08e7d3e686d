use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty dataset: the sketch of zero points is undefined")]
    EmptyDataset,

    #[error("sketches were built with different frequency matrices ({0} vs {1})")]
    FrequencyMismatch(String, String),

    #[error("cannot merge two empty sketches")]
    EmptyMerge,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("grid of {nodes} nodes exceeds the cap of {cap}; use mean-shift search instead")]
    GridTooLarge { nodes: f64, cap: usize },

    #[error("reference MSE is zero; the relative error is undefined for a degenerate dataset")]
    DegenerateReference,

    #[error("mixture separation infeasible after {0} attempts; use a smaller k or a larger box")]
    SeparationInfeasible(usize),

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{path}: line {line}: {msg}")]
    Csv { path: PathBuf, line: u64, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
