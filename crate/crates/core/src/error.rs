use thiserror::Error;

/// Errors raised by the relative belief machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The prior assigns zero probability to the cell, so no ratio exists.
    #[error("relative belief ratio undefined: cell {cell} has zero prior mass")]
    UndefinedEvidence { cell: usize },

    #[error("{what} did not converge (residual {residual:e})")]
    NonConvergence { what: &'static str, residual: f64 },

    #[error("design has rank {rank} but {required} columns must be independent; use the rank-deficient (Moore-Penrose) path")]
    RankDeficient { rank: usize, required: usize },

    #[error("predictor column {column} is constant and cannot be standardized")]
    DegeneratePredictor { column: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
