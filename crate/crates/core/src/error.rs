use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("evaluation error: {0}")]
    Eval(String),

    /// CG hit its iteration cap or broke down. Carries the best iterate.
    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error(
        "eigen iteration did not converge after {iterations} iterations \
         (lambda estimate {lambda:e}, residual {residual:e})"
    )]
    EigenNoConvergence {
        iterations: usize,
        lambda: f64,
        residual: f64,
    },

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("integration failure at step {step}: non-finite state")]
    IntegrationFailure { step: usize },

    #[error("inconsistent result: {0}")]
    Inconsistent(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
