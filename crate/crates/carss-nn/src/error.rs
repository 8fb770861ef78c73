use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: {details}")]
    ShapeMismatch { op: &'static str, details: String },

    #[error("backward requires a scalar (1x1) loss, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },

    #[error("softmax row {row} is fully masked")]
    FullyMaskedRow { row: usize },

    #[error("log of non-positive value {value}")]
    NonPositiveLog { value: f64 },

    #[error("unknown parameter '{0}'")]
    UnknownParam(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;
