use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DcovError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("unparseable numeric value {value:?} at row {row}, column {column}")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("missing value at row {row}, column {column}")]
    Missing { row: usize, column: String },

    #[error("column {0:?} not found")]
    UnknownColumn(String),

    #[error("column {0:?} selected for both x and y")]
    OverlappingColumns(String),

    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),

    #[error("column selection is empty")]
    EmptySelection,

    #[error("need at least {required} observations, got {actual}")]
    TooFewObservations { required: usize, actual: usize },

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("exponent alpha = {0} is outside (0, 2]")]
    InvalidExponent(f64),

    #[error("sample sizes differ: {0} vs {1}")]
    SizeMismatch(usize, usize),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error(
        "sample covariance of {block} is singular or ill-conditioned \
         (smallest/largest eigenvalue = {ratio:e})"
    )]
    SingularCovariance { block: String, ratio: f64 },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("Gram matrix factorization failed with jitter up to {jitter:e} (trace/n = {scale:e})")]
    Factorization { jitter: f64, scale: f64 },

    #[error("rank statistics need one-dimensional samples, got dimension {0}")]
    NotUnivariate(usize),

    #[error("no variation among replicates")]
    NoVariation,

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, DcovError>;
