//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by instance construction, enumeration, and certification.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("probability vector invalid: {0}")]
    InvalidPmf(String),

    #[error("overlap violation: {0}")]
    Overlap(String),

    #[error("enumeration too large: {size} trajectories exceeds cap {cap}")]
    EnumerationCap { size: u128, cap: u128 },

    #[error("exact enumeration requires finite-grid outcomes")]
    GaussianNotEnumerable,

    #[error("degenerate functional: {0}")]
    Degenerate(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
