//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parameter out of range: {0}")]
    ParamRange(String),

    #[error("matrix is not positive semidefinite (offending eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },

    #[error(
        "singular system: lambda_min {lambda_min:e} below threshold {threshold:e}; \
         the sample covariance is rank-deficient, try a larger N"
    )]
    SingularSystem { lambda_min: f64, threshold: f64 },

    #[error("divergence at iteration {iter}: {detail}")]
    Divergence { iter: usize, detail: String },

    #[error(
        "cardinality mismatch: |S ∩ Q| = {false_positives} but |P \\ S| = {false_negatives}; \
         the key-step identity needs eps_alg equal to the dataset's true corruption rate"
    )]
    CardinalityMismatch {
        false_positives: usize,
        false_negatives: usize,
    },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {detail}")]
    Parse { path: PathBuf, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
