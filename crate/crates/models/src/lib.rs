//! Receiver networks mapping a received MIMO-OFDM grid to bit probabilities:
//! the SigT transformer and the FC-DNN, CSINet and LSTM baselines.

pub mod baselines;
mod checkpoint;
pub mod config;
mod error;
mod model;
pub mod sigt;

pub use config::{Aggregation, CsiNetConfig, FcDnnConfig, LstmConfig, ModelConfig, SigTConfig};
pub use error::{ModelError, Result};
pub use model::{batch_input, hard_decision, Model};
pub use sigt::{detokenize, tokenize};
