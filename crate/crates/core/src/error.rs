use thiserror::Error;

/// Errors raised by the kernels, solvers, simulators and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: estimated error {achieved:.3e} > tolerance {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("boundary solver failed at t = {t}: {reason}")]
    Solver { t: f64, reason: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("capability missing: {0}")]
    Capability(String),

    /// The value exists but is not yet asymptotic.
    #[error("advisory: {0}")]
    Advisory(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
