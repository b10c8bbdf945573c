use thiserror::Error;

/// Errors raised across the assessment kernel.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("root not bracketed: g({lo}) = {g_lo}, g({hi}) = {g_hi}")]
    Bracket {
        lo: f64,
        hi: f64,
        g_lo: f64,
        g_hi: f64,
    },

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("alternating sum lost precision (condition number {condition:.3e})")]
    PrecisionLoss { condition: f64 },

    #[error("tied event times at y = {0}")]
    TiedEvents(f64),

    #[error("monotone likelihood: |beta| exceeded {0}")]
    Separation(f64),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
