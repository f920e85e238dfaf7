use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("numerical failure in {context} at {point:?}: {detail}")]
    NumericalFailure {
        context: &'static str,
        point: Vec<f64>,
        detail: String,
    },

    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),

    #[error("unsupported target: {0}")]
    UnsupportedTarget(String),

    #[error("quadrature domain error: {0}")]
    Domain(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("unknown constant {0}; run `estimate_smoothness` (or supply the constant) first")]
    UnknownConstant(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
