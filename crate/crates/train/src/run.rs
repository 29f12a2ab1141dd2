use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sigt_models::{hard_decision, Model};
use sigt_phy::{Dataset, FrameConfig};
use sigt_tensor::{Mode, ParamStore, Tape, Tensor};

use crate::error::{Result, TrainError};
use crate::metrics::{aacc, mse_loss, Metrics};
use crate::optim::{OptimConfig, Optimizer};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    pub optim: OptimConfig,
    pub batch_size: usize,
    pub epochs: usize,
    /// Seeds minibatch shuffling and dropout masks.
    pub seed: u64,
    /// Stop once an epoch's train AACC reaches this value.
    pub stop_at_train_aacc: Option<f64>,
    /// Batch size used for evaluation passes only.
    pub eval_batch: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            optim: OptimConfig::default(),
            batch_size: 640,
            epochs: 100,
            seed: 0,
            stop_at_train_aacc: None,
            eval_batch: 512,
        }
    }
}

/// A split held as dense tensors: inputs `[N, N_s, N_r, N_i, 2]` and bit
/// targets `[N, N_s, N_t, 2]` as 0.0/1.0.
#[derive(Clone, Debug)]
pub struct Batches {
    pub frame: FrameConfig,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub len: usize,
}

impl Batches {
    pub fn from_dataset(data: &Dataset) -> Self {
        let mut y = Vec::with_capacity(data.len() * data.cfg.y_len());
        let mut x = Vec::with_capacity(data.len() * data.cfg.x_len());
        for s in &data.samples {
            y.extend_from_slice(&s.y);
            x.extend(s.x.iter().map(|&b| f64::from(b)));
        }
        Self {
            frame: data.cfg,
            y,
            x,
            len: data.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Gathers the listed samples into a batch.
    pub fn gather(&self, idx: &[usize]) -> Result<(Tensor, Tensor)> {
        let f = &self.frame;
        let (yl, xl) = (f.y_len(), f.x_len());
        let mut y = Vec::with_capacity(idx.len() * yl);
        let mut x = Vec::with_capacity(idx.len() * xl);
        for &i in idx {
            y.extend_from_slice(&self.y[i * yl..(i + 1) * yl]);
            x.extend_from_slice(&self.x[i * xl..(i + 1) * xl]);
        }
        let b = idx.len();
        Ok((
            Tensor::new(vec![b, f.n_subcarriers, f.n_rx, f.n_info, 2], y)?,
            Tensor::new(vec![b, f.n_subcarriers, f.n_tx, 2], x)?,
        ))
    }
}

/// Hard-decision accuracy of `model` over a whole split.
pub fn evaluate(model: &Model, data: &Batches, eval_batch: usize) -> Result<f64> {
    Ok(evaluate_with(model, model.params(), data, eval_batch)?.0)
}

/// Accuracy and mean loss using the parameters in `store`.
pub fn evaluate_with(model: &Model, store: &ParamStore, data: &Batches, eval_batch: usize) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(TrainError::Invalid {
            what: "evaluate",
            msg: "empty split".into(),
        });
    }
    let mut decisions = Vec::with_capacity(data.x.len());
    let mut loss_sum = 0.0;
    let idx: Vec<usize> = (0..data.len).collect();
    for chunk in idx.chunks(eval_batch.max(1)) {
        let (y, x) = data.gather(chunk)?;
        let tape = Tape::with_mode(Mode::Eval, 0);
        let out = model.forward_with(&tape, store, tape.constant(y))?;
        let loss = mse_loss(&tape, out, tape.constant(x))?;
        loss_sum += tape.value(loss).item() * chunk.len() as f64;
        decisions.extend(hard_decision(tape.value(out).data()).into_iter().map(f64::from));
    }
    Ok((aacc(&decisions, &data.x)?, loss_sum / data.len as f64))
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub metrics: Vec<Metrics>,
    /// Epoch (1-based) with the highest test AACC; the earliest on ties.
    pub best_epoch: usize,
    pub best_test_aacc: f64,
    pub best_params: ParamStore,
    /// Accuracies of the untrained model, reported as epoch 0.
    pub initial: Metrics,
}

fn batch_seed(seed: u64, epoch: usize, batch: usize) -> u64 {
    seed ^ ((epoch as u64) << 32 | batch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Minibatch training on the MSE loss. After every epoch both splits are
/// evaluated with hard decisions; `on_epoch` sees each row as it is produced.
/// The parameters with the best test AACC are returned alongside the log and
/// `model` is left holding the final parameters.
pub fn train(
    model: &mut Model,
    train_set: &Batches,
    test_set: &Batches,
    cfg: &RunConfig,
    mut on_epoch: impl FnMut(&Metrics),
) -> Result<TrainReport> {
    if train_set.is_empty() || cfg.batch_size == 0 {
        return Err(TrainError::Invalid {
            what: "train",
            msg: "empty training set or zero batch size".into(),
        });
    }
    let start = Instant::now();
    let initial = Metrics {
        epoch: 0,
        train_loss: evaluate_with(model, model.params(), train_set, cfg.eval_batch)?.1,
        train_aacc: evaluate(model, train_set, cfg.eval_batch)?,
        test_aacc: evaluate(model, test_set, cfg.eval_batch)?,
        seconds: start.elapsed().as_secs_f64(),
    };
    let mut optimizer = Optimizer::new(cfg.optim);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len).collect();
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, ParamStore)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let (y, x) = train_set.gather(idx)?;
            let tape = Tape::with_mode(Mode::Train, batch_seed(cfg.seed, epoch, batch));
            let out = model.forward(&tape, tape.constant(y))?;
            let loss = mse_loss(&tape, out, tape.constant(x))?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(TrainError::NonFinite {
                    epoch,
                    batch,
                    loss: value,
                });
            }
            loss_sum += value * idx.len() as f64;
            let grads = tape.backward(loss)?.params(model.params());
            drop(tape);
            optimizer.step(model.params_mut(), &grads);
        }
        let row = Metrics {
            epoch,
            train_loss: loss_sum / train_set.len as f64,
            train_aacc: evaluate(model, train_set, cfg.eval_batch)?,
            test_aacc: evaluate(model, test_set, cfg.eval_batch)?,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&row);
        if best.as_ref().is_none_or(|(_, a, _)| row.test_aacc > *a) {
            best = Some((epoch, row.test_aacc, model.params().clone()));
        }
        let stop = cfg.stop_at_train_aacc.is_some_and(|t| row.train_aacc >= t);
        metrics.push(row);
        if stop {
            break;
        }
    }
    let (best_epoch, best_test_aacc, best_params) =
        best.unwrap_or_else(|| (0, initial.test_aacc, model.params().clone()));
    Ok(TrainReport {
        metrics,
        best_epoch,
        best_test_aacc,
        best_params,
        initial,
    })
}
