use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    /// Degrees of freedom outside the admissible region; the message names the
    /// violated inequality.
    #[error("invalid degrees of freedom: {0}")]
    InvalidDof(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("specification is not stationary (spectral radius {0})")]
    NonStationary(f64),

    #[error("series expansion did not converge: {0}")]
    Divergent(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("eigenvalues tied at the rank boundary: {0:?}")]
    TiedEigenvalues(Vec<f64>),
}

pub type Result<T> = core::result::Result<T, Error>;
