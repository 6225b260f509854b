use thiserror::Error;

/// Errors raised by the laboratory. Variants are grouped so the CLI can map
/// them onto distinct exit statuses.
#[derive(Debug, Error)]
pub enum ZkError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("speed {c} is not above the transverse threshold 4/(5L^2) = {threshold}")]
    Subcritical { c: f64, threshold: f64 },

    #[error("speed {c} is not a critical speed 4n^2/(5L^2)")]
    NotCritical { c: f64 },

    #[error("Newton iteration failed: {0}")]
    NewtonFailure(String),

    #[error("state is outside the tube: distance {distance} >= {radius}")]
    OutsideTube { distance: f64, radius: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("eigensolver: {0}")]
    Eigen(String),

    #[error("numerical guard tripped: {0}")]
    Guard(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ZkError {
    pub fn param(name: &str, reason: impl Into<String>) -> Self {
        ZkError::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    /// True for errors that come from validating inputs rather than from a
    /// computation going wrong.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            ZkError::InvalidGrid(_)
                | ZkError::InvalidParameter { .. }
                | ZkError::ShapeMismatch(_)
                | ZkError::Subcritical { .. }
                | ZkError::NotCritical { .. }
                | ZkError::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, ZkError>;
