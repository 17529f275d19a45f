use thiserror::Error;

/// Errors raised by the map, dynamics, positivity, and error-correction routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("map is not invertible: sigma_min/sigma_max = {ratio:.3e}")]
    NotInvertible { ratio: f64 },
    #[error("code does not correct the noise: {0}")]
    NotCorrectable(String),
    #[error("internal consistency check failed: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for failures that reflect a property of the mathematical input
    /// rather than a malformed request.
    pub fn is_domain_failure(&self) -> bool {
        matches!(
            self,
            Error::NotInvertible { .. } | Error::NotCorrectable(_) | Error::NotHermitian { .. }
        )
    }
}

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}
