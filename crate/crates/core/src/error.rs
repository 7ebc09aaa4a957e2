//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model construction, subspace geometry, projection,
/// and container I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix dimension does not match what the operation expects.
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A count or index parameter lies outside its valid range.
    #[error("{what} out of range: {value} not in [{min}, {max}]")]
    Range {
        what: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },

    /// A value that must be finite (and possibly positive) is not.
    #[error("invalid value for {what}: {reason}")]
    InvalidValue { what: &'static str, reason: String },

    /// A basis is rank deficient or all zero where full rank is required.
    #[error("degenerate subspace: {0}")]
    DegenerateSubspace(String),

    /// A model container failed its checksum or byte-length validation.
    #[error("corrupt model file: {block}: {reason}")]
    CorruptModel { block: String, reason: String },

    /// A model container declares a format version this build cannot read.
    #[error("unsupported container format version {0}")]
    UnsupportedVersion(u32),

    /// A model container manifest is inconsistent or unparsable.
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),

    /// An underlying read or write failed; the source error carries details.
    #[error("i/o error")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
