use thiserror::Error;

/// Error type shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A quantity was evaluated outside its mathematical domain
    /// (e.g. a negative time, or the zero-flux locus at t = 0).
    #[error("domain error: {0}")]
    Domain(String),

    /// A lookup fell outside the range covered by a grid, a tabulated
    /// field, or a sampled noise path.
    #[error("range error: {0}")]
    Range(String),

    /// Invalid configuration or invalid arguments to a constructor.
    #[error("usage error: {0}")]
    Usage(String),

    /// A numerical procedure failed to converge or produced a
    /// non-finite result; the message carries diagnostics.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A cross-route validation check failed.
    #[error("validation failure: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub(crate) fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
