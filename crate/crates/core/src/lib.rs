//! Sparse precision-matrix estimation and distributional stability of estimators.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: packed symmetric matrices, Cholesky, Jacobi eigensolver, PSD square root.
//! * [`estimators`]: sample mean, covariance and eigenvalue estimators with their perturbation bounds.
//! * [`precision`]: the ℓ1-penalized log-determinant program and its smoothed variant.
//! * [`transport`]: exact W1 on empirical measures plus order-2 Fortet–Mourier brackets.
//! * [`portfolio`]: exact small-n Markowitz solver with dual recovery.
//! * [`lab`]: seeded Monte-Carlo harness that checks stability bounds numerically.
//! * [`cli`]: the `precistab` command-line front end.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod lab;
pub mod linalg;
pub mod portfolio;
pub mod precision;
pub mod transport;

use serde::{Deserialize, Serialize};

pub use error::{Error, Result};
pub use linalg::SymMatrix;

/// Both sides of a checked inequality `lhs ≤ rhs` (or `lhs ≥ rhs` where documented).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
}

impl Inequality {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs }
    }

    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }

    /// `lhs ≤ rhs + slack`.
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs <= self.rhs + slack
    }
}
