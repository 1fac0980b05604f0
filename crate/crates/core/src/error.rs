//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by configuration validation, file ingestion and the
/// closed-form design helpers. Numerical routines themselves stay total:
/// anything clamped or regularized is documented at the call site instead of
/// reported here.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid array configuration: {0}")]
    ArrayConfig(String),

    /// Operation defined for uniform linear arrays only.
    #[error("{0} requires a uniform linear array")]
    UlaOnly(&'static str),

    #[error("invalid channel configuration: {0}")]
    ChannelConfig(String),

    #[error("invalid tracker configuration: {0}")]
    TrackerConfig(String),

    #[error("invalid run configuration: {0}")]
    RunConfig(String),

    /// Closed-form design expression evaluated outside its domain.
    #[error("design input out of domain: {0}")]
    DesignDomain(String),

    /// Trajectory trace rejected; `line` is the 1-based line in the file.
    #[error("trace {path}, line {line}: {reason}")]
    Trace {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
