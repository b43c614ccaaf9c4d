use thiserror::Error;

/// Errors produced by the solvers, transforms, and the learning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("stability violation: {0}")]
    Stability(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("region out of bounds: {0}")]
    Region(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("configuration mismatch: {0}")]
    Config(String),

    #[error("solution blew up: {0}")]
    BlowUp(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged {
        epoch: usize,
        reason: String,
        /// Parameters from the last epoch that finished with a finite loss.
        last_good: Box<crate::jnet::JNet>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
