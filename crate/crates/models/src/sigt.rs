//! The transformer receiver: per-antenna tokens, a post-norm encoder stack
//! without positional encoding, token aggregation down to `N_t` features,
//! and a two-layer MLP head with sigmoid outputs.

use rand::Rng;
use sigt_phy::FrameConfig;
use sigt_tensor::nn::{FeedForward, LayerNorm, Linear};
use sigt_tensor::{AttentionParams, ParamStore, PoolKind, Tape, Var};

use crate::config::{Aggregation, SigTConfig};
use crate::error::Result;

/// `[B, N_s, N_r, N_i, 2]` to `[B, N_r, 2 N_s N_i]`: one token per receive
/// antenna holding all of its subcarriers.
pub fn tokenize(tape: &Tape, y: Var) -> Result<Var> {
    let s = tape.shape(y);
    if s.len() != 5 || s[4] != 2 {
        return Err(sigt_tensor::TensorError::InvalidArgument {
            op: "tokenize",
            msg: format!("expected [B, N_s, N_r, N_i, 2], got {s:?}"),
        }
        .into());
    }
    let p = tape.permute(y, &[0, 2, 1, 3, 4])?;
    Ok(tape.reshape(p, &[s[0], s[2], s[1] * s[3] * 2])?)
}

/// Inverse of [`tokenize`] for the given frame.
pub fn detokenize(tape: &Tape, tokens: Var, frame: &FrameConfig) -> Result<Var> {
    let b = tape.shape(tokens)[0];
    let t = tape.reshape(tokens, &[b, frame.n_rx, frame.n_subcarriers, frame.n_info, 2])?;
    Ok(tape.permute(t, &[0, 2, 1, 3, 4])?)
}

#[derive(Clone, Debug)]
pub struct EncoderLayer {
    pub attention: AttentionParams,
    pub norm1: LayerNorm,
    pub ff: FeedForward,
    pub norm2: LayerNorm,
}

impl EncoderLayer {
    pub fn new(store: &mut ParamStore, name: &str, d: usize, heads: usize, d_ff: usize, rng: &mut impl Rng) -> Self {
        Self {
            attention: AttentionParams::new(store, &format!("{name}.attn"), d, heads, rng),
            norm1: LayerNorm::new(store, &format!("{name}.norm1"), d),
            ff: FeedForward::new(store, &format!("{name}.ff"), d, d_ff, rng),
            norm2: LayerNorm::new(store, &format!("{name}.norm2"), d),
        }
    }

    /// `x = LN(x + MHA(x)); x = LN(x + FF(x))`
    pub fn forward(&self, tape: &Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let a = self.attention.forward(tape, store, x)?;
        let x = self.norm1.forward(tape, store, tape.add(x, a)?)?;
        let f = self.ff.forward(tape, store, x)?;
        Ok(self.norm2.forward(tape, store, tape.add(x, f)?)?)
    }
}

#[derive(Clone, Debug)]
pub enum Aggregator {
    Pool { window: usize, kind: PoolKind },
    Conv { window: usize, kernel: Linear },
}

impl Aggregator {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        aggregation: Aggregation,
        frame: &FrameConfig,
        d: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let window = frame.n_rx / frame.n_tx;
        match aggregation {
            Aggregation::Pool(kind) => Aggregator::Pool { window, kind },
            Aggregation::Conv => Aggregator::Conv {
                window,
                kernel: Linear::new(store, name, window * d, d, true, rng),
            },
        }
    }

    /// `[B, N_r, d]` to `[B, N_t, d]`.
    pub fn forward(&self, tape: &Tape, store: &ParamStore, f: Var) -> Result<Var> {
        match self {
            Aggregator::Pool { window, kind } => Ok(tape.pool_tokens(f, *window, *kind)?),
            Aggregator::Conv { window, kernel } => {
                let patches = tape.unfold1d(f, *window, *window)?;
                Ok(kernel.forward(tape, store, patches)?)
            }
        }
    }
}

/// Concatenate the `N_t` features, MLP with one ReLU hidden layer, sigmoid,
/// reshape to `[B, N_s, N_t, 2]`.
#[derive(Clone, Debug)]
pub struct Head {
    pub hidden: Linear,
    pub out: Linear,
    pub dropout_p: f64,
    pub n_subcarriers: usize,
    pub n_tx: usize,
}

impl Head {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        frame: &FrameConfig,
        d: usize,
        hidden: usize,
        dropout_p: f64,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            hidden: Linear::new(store, &format!("{name}.hidden"), frame.n_tx * d, hidden, true, rng),
            out: Linear::new(store, &format!("{name}.out"), hidden, frame.x_len(), true, rng),
            dropout_p,
            n_subcarriers: frame.n_subcarriers,
            n_tx: frame.n_tx,
        }
    }

    pub fn forward(&self, tape: &Tape, store: &ParamStore, p: Var) -> Result<Var> {
        let b = tape.shape(p)[0];
        let flat = tape.reshape(p, &[b, self.hidden.input])?;
        let h = tape.relu(self.hidden.forward(tape, store, flat)?);
        let h = tape.dropout(h, self.dropout_p)?;
        let logits = self.out.forward(tape, store, h)?;
        Ok(tape.reshape(tape.sigmoid(logits), &[b, self.n_subcarriers, self.n_tx, 2])?)
    }
}

#[derive(Clone, Debug)]
pub struct SigT {
    pub config: SigTConfig,
    pub input: Linear,
    pub layers: Vec<EncoderLayer>,
    pub aggregator: Aggregator,
    pub head: Head,
}

impl SigT {
    pub fn new(store: &mut ParamStore, config: SigTConfig, frame: &FrameConfig, rng: &mut impl Rng) -> Self {
        let d = config.d_model;
        Self {
            input: Linear::new(store, "input", frame.token_width(), d, true, rng),
            layers: (0..config.depth)
                .map(|i| EncoderLayer::new(store, &format!("encoder{i}"), d, config.heads, config.d_ff, rng))
                .collect(),
            aggregator: Aggregator::new(store, "aggregate", config.aggregation, frame, d, rng),
            head: Head::new(store, "head", frame, d, config.mlp_hidden, config.dropout_p, rng),
            config,
        }
    }

    /// Input projection then the encoder stack: `[B, N_r, d_tok]` to `[B, N_r, d_model]`.
    pub fn encode(&self, tape: &Tape, store: &ParamStore, tokens: Var) -> Result<Var> {
        let mut x = self.input.forward(tape, store, tokens)?;
        for layer in &self.layers {
            x = layer.forward(tape, store, x)?;
        }
        Ok(x)
    }

    pub fn forward(&self, tape: &Tape, store: &ParamStore, y: Var) -> Result<Var> {
        let f = self.encode(tape, store, tokenize(tape, y)?)?;
        let p = self.aggregator.forward(tape, store, f)?;
        self.head.forward(tape, store, p)
    }
}
