//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by dataset ingestion, diagnostics, and estimation.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input that could not be parsed (carries row context where known).
    #[error("parse error: {0}")]
    Parse(String),

    /// Structurally valid input that violates a dataset or policy contract.
    #[error("validation error: {0}")]
    Validation(String),

    /// Invalid configuration (unknown names, missing blocks, bad values).
    #[error("config error: {0}")]
    Config(String),

    /// Conformability failure between matrices, policies, or estimates.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A numerical routine failed to converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
