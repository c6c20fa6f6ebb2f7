//! Error type shared by all numerical modules.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument violated a documented precondition (non-finite input,
    /// dimension mismatch, out-of-range parameter, unknown builtin name).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An operator precondition failed (e.g. principal value requested for a
    /// kernel without cancellation).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A quadrature did not settle under one refinement. Carries both values
    /// so the caller can judge the discrepancy.
    #[error("quadrature did not converge in {context}: coarse={coarse:.6e}, fine={fine:.6e}")]
    Accuracy {
        context: String,
        coarse: f64,
        fine: f64,
    },

    /// An integral was detected to grow without bound (log-divergent tail or
    /// a non-Cauchy principal-value sequence).
    #[error("divergent quantity: {0}")]
    Divergence(String),

    /// Internal invariant broken; indicates a bug, not a caller mistake.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
