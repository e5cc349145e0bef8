//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or unknown scenario/key.
    #[error("config error: {0}")]
    Config(String),

    /// A state or input stopped being finite.
    #[error("state corruption: {0}")]
    NonFinite(String),

    /// API misuse, e.g. stepping a terminated episode or a stale cache.
    #[error("usage error: {0}")]
    Usage(String),

    /// Shape mismatch between a network and its input/gradients.
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    /// EKF innovation covariance could not be inverted.
    #[error("filter divergence: innovation covariance not invertible")]
    FilterDivergence,

    /// Repulsive potential evaluated at zero obstacle distance.
    #[error("singular input: obstacle distance is zero")]
    SingularInput,

    /// Training produced a non-finite loss.
    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: u64, detail: String },

    /// Checkpoint file is malformed or carries an unknown version.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: config errors are distinguishable
    /// from runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 3,
        }
    }
}
