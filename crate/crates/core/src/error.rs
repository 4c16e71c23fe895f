//! Crate-wide error type.

use crate::design::Support;

/// Errors surfaced by the numerical machinery.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A natural parameter left the cumulant domain of the family.
    #[error("natural parameter {theta} outside the domain of {family}")]
    NaturalDomain { family: &'static str, theta: f64 },

    /// An observation is invalid for the family (wrong support or type).
    #[error("observation {y} invalid for {family}: {reason}")]
    InvalidObservation {
        family: &'static str,
        y: f64,
        reason: &'static str,
    },

    /// Structurally invalid input (dimension mismatch, bad support, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Support enumeration would exceed the configured cap.
    #[error("enumeration budget exceeded: {count} supports > cap {cap}")]
    BudgetExceeded { count: u128, cap: u128 },

    /// A matrix that must be positive definite is not.
    #[error("matrix not positive definite{}", match .support {
        Some(s) => format!(" on support {s}"),
        None => String::new(),
    })]
    NotPositiveDefinite { support: Option<Support> },

    /// An iterative solver did not converge within its iteration budget.
    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    /// Invalid experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    /// File input/output failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed on-disk artifact.
    #[error("parse error: {0}")]
    Parse(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
