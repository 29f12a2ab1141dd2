use sigt_models::ModelError;
use sigt_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize, loss: f64 },
    #[error("value {value} at index {index} is not a bit")]
    NonBinary { index: usize, value: f64 },
    #[error("{what}: {msg}")]
    Invalid { what: &'static str, msg: String },
}

pub type Result<T, E = TrainError> = std::result::Result<T, E>;
