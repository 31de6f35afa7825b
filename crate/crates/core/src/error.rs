//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by configuration, geometry, and numerical routines.
#[derive(Debug, Error)]
pub enum CogenError {
    /// Invalid configuration or scene input.
    #[error("configuration error: {0}")]
    Config(String),

    /// Operand sizes or grids do not match.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A rotation matrix failed the orthonormality / determinant check.
    #[error("invalid pose: {0}")]
    InvalidPose(String),

    /// A computation produced a non-finite or otherwise unusable value.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A binary cache or field file is malformed or inconsistent.
    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, CogenError>;
