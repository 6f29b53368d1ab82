use thiserror::Error;

/// Errors raised by solvers and post-processing routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An iteration or adaptive scheme failed to reach its tolerance.
    #[error("convergence failure: {0}")]
    Convergence(String),
    /// A computed quantity violated a runtime sanity check (NaN, drift, resonance).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Inconsistent grid, data, or parameter combination.
    #[error("invalid setup: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
