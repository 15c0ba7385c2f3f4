//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is not symmetric positive definite ({0})")]
    NotPositiveDefinite(String),

    #[error("excitation band exceeds Nyquist: f_hi = {f_hi} Hz, Nyquist = {nyquist} Hz")]
    NyquistExceeded { f_hi: f64, nyquist: f64 },

    #[error("CFL violation: max|v|*dt/dx = {cfl:.3} > {limit}")]
    CflViolation { cfl: f64, limit: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
