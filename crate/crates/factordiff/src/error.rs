//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
///
/// The CLI maps variants to exit codes: `Config` -> 2 (usage),
/// `Data`/`Io` -> 3 (data error), `Shape`/`Numeric` -> 4 (numerical failure).
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor/graph shape or contract violation.
    #[error("shape error: {0}")]
    Shape(String),

    /// Malformed input data (CSV rows, panels, checkpoints).
    #[error("data error: {0}")]
    Data(String),

    /// Numerical failure (non-finite values, non-PD matrices, solver abort).
    #[error("numerical error: {0}")]
    Numeric(String),

    /// Bad configuration or invocation.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
