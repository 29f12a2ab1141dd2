use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sigt_phy::FrameConfig;
use sigt_tensor::{Mode, ParamStore, Tape, Tensor, Var};

use crate::baselines::{CsiNet, FcDnn, LstmNet};
use crate::config::ModelConfig;
use crate::error::{ModelError, Result};
use crate::sigt::SigT;

#[derive(Clone, Debug)]
enum Net {
    SigT(SigT),
    FcDnn(FcDnn),
    CsiNet(CsiNet),
    Lstm(LstmNet),
}

/// A receiver network together with its parameters. Inputs are batches of
/// received grids `[B, N_s, N_r, N_i, 2]`; outputs are bit probabilities
/// `[B, N_s, N_t, 2]`.
#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    frame: FrameConfig,
    net: Net,
    store: ParamStore,
}

impl Model {
    /// Builds and initializes the network; the same seed gives the same weights.
    pub fn new(config: ModelConfig, frame: FrameConfig, seed: u64) -> Result<Self> {
        config.validate(&frame)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let net = match config {
            ModelConfig::SigT(c) => Net::SigT(SigT::new(&mut store, c, &frame, &mut rng)),
            ModelConfig::FcDnn(c) => Net::FcDnn(FcDnn::new(&mut store, c, &frame, &mut rng)),
            ModelConfig::CsiNet(c) => Net::CsiNet(CsiNet::new(&mut store, c, &frame, &mut rng)),
            ModelConfig::Lstm(c) => Net::Lstm(LstmNet::new(&mut store, c, &frame, &mut rng)),
        };
        Ok(Self {
            config,
            frame,
            net,
            store,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn frame(&self) -> &FrameConfig {
        &self.frame
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn num_params(&self) -> usize {
        self.store.num_scalars()
    }

    pub fn sigt(&self) -> Option<&SigT> {
        match &self.net {
            Net::SigT(s) => Some(s),
            _ => None,
        }
    }

    pub fn forward(&self, tape: &Tape, y: Var) -> Result<Var> {
        self.forward_with(tape, &self.store, y)
    }

    /// Forward pass reading parameters from `store`, which must have this
    /// model's layout (used by finite-difference checks).
    pub fn forward_with(&self, tape: &Tape, store: &ParamStore, y: Var) -> Result<Var> {
        let s = tape.shape(y);
        let f = &self.frame;
        let expect = [f.n_subcarriers, f.n_rx, f.n_info, 2];
        if s.len() != 5 || s[1..] != expect {
            return Err(sigt_tensor::TensorError::DimensionMismatch {
                op: "model input",
                lhs: s,
                rhs: expect.to_vec(),
            }
            .into());
        }
        match &self.net {
            Net::SigT(n) => n.forward(tape, store, y),
            Net::FcDnn(n) => n.forward(tape, store, y),
            Net::CsiNet(n) => n.forward(tape, store, y),
            Net::Lstm(n) => n.forward(tape, store, y),
        }
    }

    /// Evaluation-mode forward pass on a batch.
    pub fn predict(&self, y: &Tensor) -> Result<Tensor> {
        let tape = Tape::with_mode(Mode::Eval, 0);
        let y = tape.constant(y.clone());
        let out = self.forward(&tape, y)?;
        Ok((*tape.value(out)).clone())
    }

    /// Stacks flat received grids into a `[B, N_s, N_r, N_i, 2]` batch.
    pub fn batch_input<'a>(&self, ys: impl IntoIterator<Item = &'a [f64]>) -> Result<Tensor> {
        batch_input(&self.frame, ys)
    }

    /// Swaps in a parameter set with the same names and shapes, e.g. a
    /// retained best-epoch snapshot.
    pub fn set_params(&mut self, store: ParamStore) -> Result<()> {
        if store.len() != self.store.len() {
            return Err(ModelError::Format(format!(
                "expected {} parameter blocks, found {}",
                self.store.len(),
                store.len()
            )));
        }
        for ((_, name, cur), (_, new_name, new)) in self.store.iter().zip(store.iter()) {
            if name != new_name || cur.shape() != new.shape() {
                return Err(ModelError::Format(format!(
                    "parameter {name} {:?} does not match {new_name} {:?}",
                    cur.shape(),
                    new.shape()
                )));
            }
        }
        self.store = store;
        Ok(())
    }

    pub fn with_params(&self, store: ParamStore) -> Result<Self> {
        let mut m = self.clone();
        m.set_params(store)?;
        Ok(m)
    }
}

pub fn batch_input<'a>(frame: &FrameConfig, ys: impl IntoIterator<Item = &'a [f64]>) -> Result<Tensor> {
    let mut data = Vec::new();
    let mut b = 0;
    for y in ys {
        if y.len() != frame.y_len() {
            return Err(sigt_tensor::TensorError::DimensionMismatch {
                op: "batch_input",
                lhs: vec![y.len()],
                rhs: vec![frame.y_len()],
            }
            .into());
        }
        data.extend_from_slice(y);
        b += 1;
    }
    Ok(Tensor::new(
        vec![b, frame.n_subcarriers, frame.n_rx, frame.n_info, 2],
        data,
    )?)
}

/// Hard decision: bit 1 iff the probability is at least 0.5.
pub fn hard_decision(x_hat: &[f64]) -> Vec<u8> {
    x_hat.iter().map(|&p| u8::from(p >= 0.5)).collect()
}
