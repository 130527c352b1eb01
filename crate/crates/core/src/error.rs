use thiserror::Error;

/// Errors raised by the solver, analysis and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value {value} at node {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("{0}")]
    InvalidParameter(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("quadrature did not converge: last two estimates {previous:e} and {last:e}")]
    Quadrature { previous: f64, last: f64 },

    #[error("under-resolved: {0}")]
    UnderResolved(String),

    #[error("integral diverges: p = {p} does not exceed the critical exponent {critical}")]
    Diverges { p: f64, critical: f64 },

    #[error("line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("insufficient snapshots: {0}")]
    InsufficientSnapshots(String),

    #[error("malformed snapshot: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
