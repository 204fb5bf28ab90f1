use thiserror::Error;

use crate::lrbas::SolveReport;

/// Errors raised by the linear algebra kernels, the assembly, and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("matrix not positive semidefinite (pivot {pivot:e} at step {step})")]
    NotPositiveSemidefinite { step: usize, pivot: f64 },

    #[error("invalid right-hand matrix: {0}")]
    InvalidRightHandMatrix(String),

    #[error("reference solve did not converge after {iterations} iterations (relative residual {relative_residual:e})")]
    ReferenceNotConverged {
        iterations: usize,
        relative_residual: f64,
    },

    #[error("invalid coefficient {value} on element {element}")]
    InvalidCoefficient { element: usize, value: f64 },

    #[error("reduced system not PSD: {0}")]
    ReducedNotPsd(String),

    #[error("stale operators: built for problem {built}, used for problem {requested}")]
    StaleOperators { built: usize, requested: usize },

    #[error("{solver} did not converge for problem {problem} within {iterations} iterations (relative residual {relative_residual:e})")]
    NotConverged {
        solver: &'static str,
        problem: usize,
        iterations: usize,
        relative_residual: f64,
    },

    #[error("sequence failed at problem {problem}: {source}")]
    SequenceFailed {
        problem: usize,
        source: Box<Error>,
        partial: Box<SolveReport>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
