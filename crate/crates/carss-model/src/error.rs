use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Core(#[from] carss_core::Error),

    #[error(transparent)]
    Nn(#[from] carss_nn::NnError),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("training diverged at batch {batch}: {detail}")]
    Diverged { batch: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;
