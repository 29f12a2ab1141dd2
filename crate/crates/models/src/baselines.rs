//! Comparison networks sharing the SigT input and output layout.

use rand::Rng;
use sigt_phy::FrameConfig;
use sigt_tensor::nn::{apply_linear, glorot, Linear};
use sigt_tensor::{ParamId, ParamStore, Tape, Tensor, Var};

use crate::config::{CsiNetConfig, FcDnnConfig, LstmConfig};
use crate::error::Result;
use crate::sigt::{tokenize, Aggregator, Head};

/// One independent three-hidden-layer MLP per receive antenna; their final
/// hidden activations are summed and mapped to the bit estimates. The
/// per-antenna layers are stored stacked (`[N_r, in, out]`) and applied with
/// one batched product, which keeps the antennas' weights separate.
#[derive(Clone, Debug)]
pub struct FcDnn {
    pub config: FcDnnConfig,
    pub layers: Vec<(ParamId, ParamId)>,
    pub out: Linear,
    pub n_subcarriers: usize,
    pub n_tx: usize,
}

impl FcDnn {
    pub fn new(store: &mut ParamStore, config: FcDnnConfig, frame: &FrameConfig, rng: &mut impl Rng) -> Self {
        let n_r = frame.n_rx;
        let mut widths = vec![frame.token_width()];
        widths.extend(config.hidden);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let weight = store.add(format!("branch{i}.weight"), glorot(&[n_r, w[0], w[1]], w[0], w[1], rng));
                let bias = store.add(format!("branch{i}.bias"), Tensor::zeros([n_r, 1, w[1]]));
                (weight, bias)
            })
            .collect();
        Self {
            out: Linear::new(store, "out", config.hidden[2], frame.x_len(), true, rng),
            config,
            layers,
            n_subcarriers: frame.n_subcarriers,
            n_tx: frame.n_tx,
        }
    }

    pub fn forward(&self, tape: &Tape, store: &ParamStore, y: Var) -> Result<Var> {
        let tokens = tokenize(tape, y)?;
        let b = tape.shape(tokens)[0];
        // [N_r, B, d]: antenna-major so each antenna multiplies its own weights
        let mut h = tape.permute(tokens, &[1, 0, 2])?;
        for &(w, bias) in &self.layers {
            let z = tape.bmm(h, tape.param(store, w), false, false)?;
            h = tape.relu(tape.add(z, tape.param(store, bias))?);
            h = tape.dropout(h, self.config.dropout_p)?;
        }
        let summed = tape.sum_axis(h, 0)?;
        let logits = self.out.forward(tape, store, summed)?;
        Ok(tape.reshape(tape.sigmoid(logits), &[b, self.n_subcarriers, self.n_tx, 2])?)
    }
}

/// 3x3 "same" convolution on a channels-last image.
#[derive(Clone, Debug)]
pub struct Conv3x3 {
    pub kernel: Linear,
}

impl Conv3x3 {
    pub fn new(store: &mut ParamStore, name: &str, c_in: usize, c_out: usize, rng: &mut impl Rng) -> Self {
        Self {
            kernel: Linear::new(store, name, 9 * c_in, c_out, true, rng),
        }
    }

    pub fn forward(&self, tape: &Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let patches = tape.unfold2d(x, 3, 3)?;
        Ok(self.kernel.forward(tape, store, patches)?)
    }
}

/// Residual block `x + conv(relu(conv(relu(conv(x)))))`, widths `2 -> a -> b -> 2`.
#[derive(Clone, Debug)]
pub struct RefineBlock {
    pub convs: [Conv3x3; 3],
}

impl RefineBlock {
    pub fn new(store: &mut ParamStore, name: &str, widths: [usize; 2], rng: &mut impl Rng) -> Self {
        let [a, b] = widths;
        Self {
            convs: [
                Conv3x3::new(store, &format!("{name}.conv1"), 2, a, rng),
                Conv3x3::new(store, &format!("{name}.conv2"), a, b, rng),
                Conv3x3::new(store, &format!("{name}.conv3"), b, 2, rng),
            ],
        }
    }

    pub fn forward(&self, tape: &Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let h = tape.relu(self.convs[0].forward(tape, store, x)?);
        let h = tape.relu(self.convs[1].forward(tape, store, h)?);
        let r = self.convs[2].forward(tape, store, h)?;
        Ok(tape.add(x, r)?)
    }
}

/// Residual CNN over the received grid viewed as an `N_s x (N_r N_i)` image
/// with real and imaginary channels, flattened into a linear output layer.
#[derive(Clone, Debug)]
pub struct CsiNet {
    pub config: CsiNetConfig,
    pub blocks: Vec<RefineBlock>,
    pub out: Linear,
    pub frame: FrameConfig,
}

impl CsiNet {
    pub fn new(store: &mut ParamStore, config: CsiNetConfig, frame: &FrameConfig, rng: &mut impl Rng) -> Self {
        Self {
            blocks: (0..config.blocks)
                .map(|i| RefineBlock::new(store, &format!("refine{i}"), config.widths, rng))
                .collect(),
            out: Linear::new(store, "out", frame.y_len(), frame.x_len(), true, rng),
            config,
            frame: *frame,
        }
    }

    pub fn forward(&self, tape: &Tape, store: &ParamStore, y: Var) -> Result<Var> {
        let f = &self.frame;
        let b = tape.shape(y)[0];
        let mut x = tape.reshape(y, &[b, f.n_subcarriers, f.n_rx * f.n_info, 2])?;
        for block in &self.blocks {
            x = block.forward(tape, store, x)?;
        }
        let flat = tape.reshape(x, &[b, f.y_len()])?;
        let flat = tape.dropout(flat, self.config.dropout_p)?;
        let logits = self.out.forward(tape, store, flat)?;
        Ok(tape.reshape(tape.sigmoid(logits), &[b, f.n_subcarriers, f.n_tx, 2])?)
    }
}

/// Single-layer LSTM over the token sequence, gates ordered `i, f, g, o`.
#[derive(Clone, Debug)]
pub struct LstmLayer {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub hidden: usize,
}

impl LstmLayer {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self {
            w_input: store.add(format!("{name}.w_input"), glorot(&[input, 4 * hidden], input, hidden, rng)),
            w_hidden: store.add(format!("{name}.w_hidden"), glorot(&[hidden, 4 * hidden], hidden, hidden, rng)),
            bias: store.add(format!("{name}.bias"), Tensor::zeros([4 * hidden])),
            hidden,
        }
    }

    /// `[B, L, input]` to the hidden states `[B, L, hidden]`, starting from
    /// zero hidden and cell states.
    pub fn forward(&self, tape: &Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let s = tape.shape(x);
        let (b, len, d) = (s[0], s[1], self.hidden);
        let gx = apply_linear(tape, x, tape.param(store, self.w_input), Some(tape.param(store, self.bias)))?;
        let w_h = tape.param(store, self.w_hidden);
        let mut state: Option<(Var, Var)> = None;
        let mut outputs = Vec::with_capacity(len);
        for t in 0..len {
            let mut g = tape.reshape(tape.narrow(gx, 1, t, 1)?, &[b, 4 * d])?;
            if let Some((h, _)) = state {
                g = tape.add(g, tape.matmul(h, w_h)?)?;
            }
            let gate = |k: usize| tape.narrow(g, 1, k * d, d);
            let i = tape.sigmoid(gate(0)?);
            let f = tape.sigmoid(gate(1)?);
            let cand = tape.tanh(gate(2)?);
            let o = tape.sigmoid(gate(3)?);
            let mut c = tape.mul(i, cand)?;
            if let Some((_, c_prev)) = state {
                c = tape.add(tape.mul(f, c_prev)?, c)?;
            }
            let h = tape.mul(o, tape.tanh(c))?;
            outputs.push(tape.reshape(h, &[b, 1, d])?);
            state = Some((h, c));
        }
        Ok(tape.concat(&outputs, 1)?)
    }
}

/// SigT with the encoder stack swapped for an LSTM; aggregation and head
/// are unchanged.
#[derive(Clone, Debug)]
pub struct LstmNet {
    pub config: LstmConfig,
    pub input: Linear,
    pub lstm: LstmLayer,
    pub aggregator: Aggregator,
    pub head: Head,
}

impl LstmNet {
    pub fn new(store: &mut ParamStore, config: LstmConfig, frame: &FrameConfig, rng: &mut impl Rng) -> Self {
        let d = config.d_model;
        Self {
            input: Linear::new(store, "input", frame.token_width(), d, true, rng),
            lstm: LstmLayer::new(store, "lstm", d, d, rng),
            aggregator: Aggregator::new(store, "aggregate", config.aggregation, frame, d, rng),
            head: Head::new(store, "head", frame, d, config.mlp_hidden, config.dropout_p, rng),
            config,
        }
    }

    pub fn forward(&self, tape: &Tape, store: &ParamStore, y: Var) -> Result<Var> {
        let x = self.input.forward(tape, store, tokenize(tape, y)?)?;
        let f = self.lstm.forward(tape, store, x)?;
        let p = self.aggregator.forward(tape, store, f)?;
        self.head.forward(tape, store, p)
    }
}
