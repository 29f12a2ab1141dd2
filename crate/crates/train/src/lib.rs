//! Supervised training of the receiver networks: MSE loss on sigmoid
//! outputs, Adam or plain SGD, and hard-decision accuracy per epoch.

mod error;
mod metrics;
mod optim;
mod run;

pub use error::{Result, TrainError};
pub use metrics::{aacc, mse_loss, Metrics};
pub use optim::{adam_step, sgd_step, AdamMoments, OptimConfig, Optimizer, OptimizerKind};
pub use run::{evaluate, evaluate_with, train, Batches, RunConfig, TrainReport};
