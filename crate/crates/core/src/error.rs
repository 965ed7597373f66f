//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any qdest module.
///
/// Variants map onto the CLI exit-code classes: configuration and shape
/// problems are usage-level, data problems come from input files, and
/// numeric failures come from tolerance or divergence checks.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or matrix dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An index (qubit, class, vocabulary entry, grid cell) is out of range.
    #[error("index out of range: {0}")]
    Index(String),

    /// A point falls outside the configured bounding box.
    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    /// Invalid configuration (degenerate bbox, bad fractions, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Unreadable or malformed input data.
    #[error("data error: {0}")]
    Data(String),

    /// Serialized artifact has an incompatible version or schema.
    #[error("version error: {0}")]
    Version(String),

    /// An operation contract was violated (non-scalar loss, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Training diverged (non-finite loss or parameter).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
