use thiserror::Error;

/// Failure modes shared by every layer of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A non-finite value appeared during a computation. `step` is the time
    /// step index when the failure happened inside a time loop.
    #[error("numerical error{}: {msg}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    Numerical { step: Option<usize>, msg: String },
    /// A constant-free inequality that must hold exactly was violated.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    /// Inputs are inconsistent with how the operation is meant to be used.
    #[error("usage error: {0}")]
    Usage(String),
    /// A statistical estimator cannot produce a meaningful answer.
    #[error("estimation error: {0}")]
    Estimation(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical {
            step: None,
            msg: msg.into(),
        }
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn estimation(msg: impl Into<String>) -> Self {
        Error::Estimation(msg.into())
    }

    /// Attaches a step index to a numerical error; other variants pass through.
    pub fn at_step(self, step: usize) -> Self {
        match self {
            Error::Numerical { msg, .. } => Error::Numerical { step: Some(step), msg },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
