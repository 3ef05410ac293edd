//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by model construction, bound computation and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("matrix factorization failed: {0}")]
    Factorization(String),

    #[error("training data contains a single class")]
    SingleClass,

    #[error("Newton iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("linear program is {0}")]
    LpDegenerate(&'static str),

    #[error("QP solver failed to reach the required KKT residual: {0}")]
    QpFailure(String),

    #[error("interval linear system is singular (region too large); split the region")]
    IntervalSingular,

    #[error("latent partition has {cells} cells, exceeding the cap of {cap}")]
    PartitionTooLarge { cells: usize, cap: usize },

    #[error("operation requires a {expected} model")]
    TaskMismatch { expected: &'static str },

    #[error("{0}")]
    Unsupported(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
