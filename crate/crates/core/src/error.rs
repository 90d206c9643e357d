use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One failed model invariant, anchored at the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Path into the problem document, e.g. `agents[1].objective.dense.values`.
    pub field: String,
    pub message: String,
}

impl Violation {
    pub(crate) fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model:\n{}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("log_sum_exp of an empty vector")]
    EmptyInput,

    #[error("agent {agent} has an all-zero expected-return vector")]
    DegenerateReturns { agent: usize },

    #[error("non-finite value at step {step}: {what}")]
    NonFinite { step: usize, what: String },

    #[error("jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("operation requires a {expected}-mode model")]
    WrongMode { expected: &'static str },

    #[error("instance too large: {0} joint assignments")]
    TooLarge(u128),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("  {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}
