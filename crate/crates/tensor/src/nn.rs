//! Parameterized building blocks shared by every receiver network.

use rand::Rng;

use crate::error::Result;
use crate::param::{ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Glorot-uniform initialization for a `fan_in x fan_out` matrix.
pub fn glorot(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::from_fn(shape.to_vec(), |_| rng.random_range(-limit..limit))
}

/// Affine map `x W + b` over the last axis; `W` is stored `[input, output]`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        bias: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let weight = store.add(
            format!("{name}.weight"),
            glorot(&[input, output], input, output, rng),
        );
        let bias = bias.then(|| store.add(format!("{name}.bias"), Tensor::zeros([output])));
        Self {
            weight,
            bias,
            input,
            output,
        }
    }

    pub fn forward(&self, tape: &Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = self.bias.map(|b| tape.param(store, b));
        apply_linear(tape, x, w, b)
    }
}

/// `x W (+ b)` for any `x` whose last axis matches the rows of `W`.
pub fn apply_linear(tape: &Tape, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
    let shape = tape.shape(x);
    let inner = *shape.last().unwrap_or(&1);
    let rows = shape.iter().product::<usize>() / inner.max(1);
    let flat = tape.reshape(x, &[rows, inner])?;
    let mut y = tape.matmul(flat, w)?;
    if let Some(b) = b {
        y = tape.add(y, b)?;
    }
    let out = tape.shape(w)[1];
    let mut out_shape = shape;
    match out_shape.last_mut() {
        Some(last) => *last = out,
        None => out_shape.push(out),
    }
    tape.reshape(y, &out_shape)
}

/// Layer normalization over the last axis with learned gain and bias.
#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        Self {
            gain: store.add(format!("{name}.gain"), Tensor::ones([dim])),
            bias: store.add(format!("{name}.bias"), Tensor::zeros([dim])),
            eps: 1e-5,
        }
    }

    pub fn forward(&self, tape: &Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let n = tape.layer_norm(x, self.eps)?;
        let scaled = tape.mul(n, tape.param(store, self.gain))?;
        tape.add(scaled, tape.param(store, self.bias))
    }
}

/// Position-wise `Linear -> ReLU -> Linear`.
#[derive(Clone, Debug)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

impl FeedForward {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            up: Linear::new(store, &format!("{name}.up"), dim, hidden, true, rng),
            down: Linear::new(store, &format!("{name}.down"), hidden, dim, true, rng),
        }
    }

    pub fn forward(&self, tape: &Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let h = self.up.forward(tape, store, x)?;
        let h = tape.relu(h);
        self.down.forward(tape, store, h)
    }
}
