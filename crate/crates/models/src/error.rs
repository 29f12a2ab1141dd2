use sigt_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Frame(#[from] sigt_phy::PhyError),
    #[error("invalid model config `{field}`: {msg}")]
    Config { field: &'static str, msg: String },
    #[error("checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

pub(crate) fn config_err<T>(field: &'static str, msg: impl Into<String>) -> Result<T> {
    Err(ModelError::Config {
        field,
        msg: msg.into(),
    })
}
