use std::path::PathBuf;

use crate::container::ContainerError;

/// Errors produced by the numerical core and the pipeline around it.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("mode {mode} out of range for a tensor of order {order}")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("rank {rank} out of range for mode {mode} (available: 1..={available})")]
    RankOutOfRange {
        mode: usize,
        rank: usize,
        available: usize,
    },

    #[error("index {index} out of range for axis of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset layout mismatch: {0}")]
    Layout(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Container(#[from] ContainerError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification of an [`Error`], shared by the CLI exit codes and
/// the C interface status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad arguments or configuration.
    Args,
    /// Missing, unreadable or corrupt files.
    File,
    /// Non-finite values or a degenerate model.
    Numeric,
    /// Shape, index or layout invariants violated.
    Invariant,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidConfig(_) | Error::Unsupported(_) => ErrorCategory::Args,
            Error::Io { .. } | Error::Container(_) => ErrorCategory::File,
            Error::NonFinite(_) | Error::Degenerate(_) => ErrorCategory::Numeric,
            Error::ModeOutOfRange { .. }
            | Error::DimensionMismatch(_)
            | Error::InvalidShape(_)
            | Error::RankOutOfRange { .. }
            | Error::IndexOutOfRange { .. }
            | Error::Layout(_) => ErrorCategory::Invariant,
        }
    }
}
