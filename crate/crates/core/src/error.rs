//! Error type shared across the crate.

use alloc::string::String;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes of the estimation and analysis routines.
///
/// The three variants mirror the three ways a call can go wrong: the caller
/// supplied an invalid configuration, the data are unusable for the requested
/// operation, or the computation itself broke down.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    /// Invalid configuration, e.g. weight-function parameters out of order.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Invalid or degenerate input data.
    #[error("invalid data: {0}")]
    Data(String),
    /// Numerical failure: singular system, non-convergence, boundary estimate.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
