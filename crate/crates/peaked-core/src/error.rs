//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by circuit construction, rewriting, optimization, and the
/// simulation backends.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a precondition (dimension mismatch, odd qubit
    /// count, non-finite angle, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A block's angle list does not match its layout.
    #[error("malformed block: {0}")]
    MalformedBlock(String),

    /// The operation is only defined for a different block layout.
    #[error("unsupported layout: {0}")]
    UnsupportedLayout(String),

    /// The request exceeds a configured resource cap (dense qubit limit, ...).
    #[error("resource limit: {0}")]
    ResourceLimit(String),

    /// Malformed serialized input.
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    /// A QASM statement outside the supported u3/cz/x subset.
    #[error("unsupported gate '{name}' at line {line}")]
    UnsupportedGate { name: String, line: usize },

    /// Block re-synthesis could not reach the requested deviation band.
    #[error("synthesis failure{}: {detail}", block_index.map(|i| format!(" at block {i}")).unwrap_or_default())]
    SynthesisFailure {
        block_index: Option<usize>,
        detail: String,
    },

    /// Tail-group reduction could not meet the row-match tolerance.
    #[error("reduction failure: {0}")]
    ReductionFailure(String),

    /// Underlying I/O failure (file-backed serialization entry points).
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
