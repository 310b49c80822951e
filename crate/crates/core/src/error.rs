//! Shared error type for the library.

use thiserror::Error;

/// Errors produced by the estimation, construction and reporting routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two inputs that must agree in length or shape do not.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A linear system or design matrix is singular or rank deficient.
    #[error("{0}: matrix is singular or rank deficient")]
    Singular(String),

    /// A data file failed validation; `row` is 1-based and counts the header.
    #[error("{path}:{row}: {message}")]
    Data {
        path: String,
        row: usize,
        message: String,
    },

    /// Underlying I/O failure.
    #[error("io error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// An iterative routine exhausted its budget.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e}); {detail}")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        detail: String,
    },

    /// An asset identifier was not found in the relevant universe.
    #[error("unknown asset: {0}")]
    UnknownAsset(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
