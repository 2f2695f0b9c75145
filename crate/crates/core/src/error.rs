use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("no convergence after {iterations} iterations ({what})")]
    NoConvergence { what: &'static str, iterations: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("size mismatch: {left} vs {right} atoms")]
    SizeMismatch { left: usize, right: usize },
    #[error("atom kind mismatch: {0}")]
    KindMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("sequence too short: need at least {needed}, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("kappa {kappa} must exceed (n/lambda)^2 = {threshold}")]
    KappaTooSmall { kappa: f64, threshold: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("infeasible: target return {z} outside [{lo}, {hi}]")]
    Infeasible { z: f64, lo: f64, hi: f64 },
    #[error("dimension {n} too large for exact enumeration (max {max})")]
    DimensionTooLarge { n: usize, max: usize },
    #[error("invalid constants: {0}")]
    InvalidConstants(String),
    #[error("mean vector is a multiple of the ones vector")]
    DegenerateMu,
    #[error("covariance matrix is zero")]
    ZeroSigma,
    #[error("weight mismatch: {0}")]
    WeightMismatch(String),
    #[error("admissibility violated: {0}")]
    AdmissibilityViolated(String),
    #[error("invalid configuration at {pointer}: {message}")]
    ConfigInvalid { pointer: String, message: String },
}

impl Error {
    pub(crate) fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    /// True for failures of a numerical routine rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. } | Error::NotPsd { .. } | Error::NoConvergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
