use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Rate functions themselves never fail on out-of-domain arguments: they
/// return `f64::INFINITY`. Errors are reserved for invalid parameters,
/// degenerate constants and numerical breakdown.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested constant or rate is infinite because the limit law is
    /// deterministic (for instance `p = 2, lambda = 1`).
    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("numerical failure: {what} ({diagnostics})")]
    Numerical { what: String, diagnostics: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
