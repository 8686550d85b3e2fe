use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument violates its documented domain (q ≤ 1, β ≤ 0, nonpositive heights, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The simulator used up its step budget before the stopping condition was met.
    #[error("step budget exhausted after {steps} steps")]
    StepBudgetExhausted { steps: u64 },

    /// A tree end's finite word is too short to decide a confluent.
    #[error("tree end prefix too short: need height {needed}, word reaches {reached}")]
    InsufficientEndPrefix { needed: i64, reached: i64 },

    /// The βp ≠ 1 case has no closed-form classification.
    #[error("unsupported parameters: {0}")]
    Unsupported(String),

    #[error("grid node {0} could not be classified")]
    UnclassifiedNode(String),

    #[error("iterative solver did not converge: {iterations} iterations, relative residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
