use sigt_tensor::{Tape, Var};

use crate::error::{Result, TrainError};

/// Mean squared error over every bit of every signal in the batch, i.e. the
/// per-signal loss averaged over the `2 N_s N_t` entries and then the batch.
pub fn mse_loss(tape: &Tape, x_hat: Var, x: Var) -> Result<Var> {
    let d = tape.sub(x_hat, x)?;
    let (a, b) = (tape.shape(x_hat), tape.shape(x));
    if a != b {
        return Err(sigt_tensor::TensorError::DimensionMismatch {
            op: "mse_loss",
            lhs: a,
            rhs: b,
        }
        .into());
    }
    Ok(tape.mean(tape.mul(d, d)?))
}

/// Average accuracy `1 - BER` between hard decisions and true bits.
pub fn aacc(x_tilde: &[f64], x: &[f64]) -> Result<f64> {
    if x_tilde.len() != x.len() || x.is_empty() {
        return Err(TrainError::Invalid {
            what: "aacc",
            msg: format!("lengths {} and {}", x_tilde.len(), x.len()),
        });
    }
    let mut errors = 0usize;
    for (index, (&a, &b)) in x_tilde.iter().zip(x).enumerate() {
        for value in [a, b] {
            if value != 0.0 && value != 1.0 {
                return Err(TrainError::NonBinary { index, value });
            }
        }
        errors += usize::from(a != b);
    }
    Ok(1.0 - errors as f64 / x.len() as f64)
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_aacc: f64,
    pub test_aacc: f64,
    /// Wall time since the start of training.
    pub seconds: f64,
}
