use thiserror::Error;

/// Errors raised by the game model, solvers and generators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LqdgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid game instance: {0}")]
    InvalidInstance(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The matrix or policy supplied is not Schur stable.
    #[error("closed loop is not stable (spectral radius {radius})")]
    Unstable { radius: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("sampling failed after {attempts} rejections")]
    SamplingFailed { attempts: usize },

    #[error("normalized error undefined: reference gain {player} has zero norm")]
    UndefinedMetric { player: usize },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for LqdgError {
    fn from(e: serde_json::Error) -> Self {
        LqdgError::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LqdgError>;
