use sigt_phy::FrameConfig;
use sigt_tensor::PoolKind;

use crate::error::{config_err, Result};

/// How the `N_r` per-antenna features are reduced to `N_t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Aggregation {
    /// Non-overlapping pooling with window `N_r / N_t`.
    Pool(PoolKind),
    /// Learned 1-D convolution with kernel and stride `N_r / N_t`.
    Conv,
}

impl Aggregation {
    pub fn name(self) -> &'static str {
        match self {
            Aggregation::Pool(PoolKind::Avg) => "avg",
            Aggregation::Pool(PoolKind::Max) => "max",
            Aggregation::Conv => "conv",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "avg" | "pool" => Some(Aggregation::Pool(PoolKind::Avg)),
            "max" => Some(Aggregation::Pool(PoolKind::Max)),
            "conv" => Some(Aggregation::Conv),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigTConfig {
    pub depth: usize,
    pub heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub aggregation: Aggregation,
    /// Dropout on the hidden layer of the prediction head.
    pub dropout_p: f64,
    pub mlp_hidden: usize,
}

impl Default for SigTConfig {
    fn default() -> Self {
        Self {
            depth: 2,
            heads: 4,
            d_model: 512,
            d_ff: 1024,
            aggregation: Aggregation::Conv,
            dropout_p: 0.0,
            mlp_hidden: 1024,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FcDnnConfig {
    pub hidden: [usize; 3],
    pub dropout_p: f64,
}

impl Default for FcDnnConfig {
    fn default() -> Self {
        Self {
            hidden: [1000, 500, 250],
            dropout_p: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CsiNetConfig {
    pub blocks: usize,
    /// Channel widths of the two inner convolutions of a refine block.
    pub widths: [usize; 2],
    pub dropout_p: f64,
}

impl Default for CsiNetConfig {
    fn default() -> Self {
        Self {
            blocks: 2,
            widths: [8, 16],
            dropout_p: 0.0,
        }
    }
}

/// SigT with the encoder stack replaced by one LSTM layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LstmConfig {
    pub d_model: usize,
    pub aggregation: Aggregation,
    pub dropout_p: f64,
    pub mlp_hidden: usize,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self {
            d_model: 512,
            aggregation: Aggregation::Conv,
            dropout_p: 0.0,
            mlp_hidden: 1024,
        }
    }
}

impl From<&SigTConfig> for LstmConfig {
    fn from(c: &SigTConfig) -> Self {
        Self {
            d_model: c.d_model,
            aggregation: c.aggregation,
            dropout_p: c.dropout_p,
            mlp_hidden: c.mlp_hidden,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelConfig {
    SigT(SigTConfig),
    FcDnn(FcDnnConfig),
    CsiNet(CsiNetConfig),
    Lstm(LstmConfig),
}

impl ModelConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelConfig::SigT(_) => "sigt",
            ModelConfig::FcDnn(_) => "fcdnn",
            ModelConfig::CsiNet(_) => "csinet",
            ModelConfig::Lstm(_) => "lstm",
        }
    }

    /// Checks the configuration against a frame layout.
    pub fn validate(&self, frame: &FrameConfig) -> Result<()> {
        frame.validate()?;
        let dropout = |p: f64| {
            if (0.0..1.0).contains(&p) {
                Ok(())
            } else {
                config_err("dropout_p", format!("{p} not in [0, 1)"))
            }
        };
        let aggregation = |_: Aggregation| {
            if frame.n_rx % frame.n_tx != 0 {
                config_err(
                    "aggregation",
                    format!("N_r = {} is not divisible by N_t = {}", frame.n_rx, frame.n_tx),
                )
            } else {
                Ok(())
            }
        };
        let positive = |field: &'static str, v: usize| {
            if v == 0 {
                config_err(field, "must be at least 1")
            } else {
                Ok(())
            }
        };
        match self {
            ModelConfig::SigT(c) => {
                positive("heads", c.heads)?;
                positive("d_model", c.d_model)?;
                positive("d_ff", c.d_ff)?;
                positive("mlp_hidden", c.mlp_hidden)?;
                if c.d_model % c.heads != 0 {
                    return config_err(
                        "heads",
                        format!("d_model {} not divisible by {} heads", c.d_model, c.heads),
                    );
                }
                aggregation(c.aggregation)?;
                dropout(c.dropout_p)
            }
            ModelConfig::Lstm(c) => {
                positive("d_model", c.d_model)?;
                positive("mlp_hidden", c.mlp_hidden)?;
                aggregation(c.aggregation)?;
                dropout(c.dropout_p)
            }
            ModelConfig::FcDnn(c) => {
                for w in c.hidden {
                    positive("hidden", w)?;
                }
                dropout(c.dropout_p)
            }
            ModelConfig::CsiNet(c) => {
                for w in c.widths {
                    positive("widths", w)?;
                }
                dropout(c.dropout_p)
            }
        }
    }

    /// Number of trainable scalars, as a function of the configuration alone.
    pub fn param_count(&self, frame: &FrameConfig) -> usize {
        let lin = |i: usize, o: usize| i * o + o;
        let d_tok = frame.token_width();
        let out = frame.x_len();
        let window = frame.n_rx / frame.n_tx.max(1);
        let agg = |a: Aggregation, d: usize| match a {
            Aggregation::Pool(_) => 0,
            Aggregation::Conv => lin(window * d, d),
        };
        let head = |d: usize, hidden: usize| lin(frame.n_tx * d, hidden) + lin(hidden, out);
        match self {
            ModelConfig::SigT(c) => {
                let d = c.d_model;
                let layer = 4 * d * d + lin(d, c.d_ff) + lin(c.d_ff, d) + 4 * d;
                lin(d_tok, d) + c.depth * layer + agg(c.aggregation, d) + head(d, c.mlp_hidden)
            }
            ModelConfig::Lstm(c) => {
                let d = c.d_model;
                lin(d_tok, d) + 8 * d * d + 4 * d + agg(c.aggregation, d) + head(d, c.mlp_hidden)
            }
            ModelConfig::FcDnn(c) => {
                let [a, b, h] = c.hidden;
                frame.n_rx * (lin(d_tok, a) + lin(a, b) + lin(b, h)) + lin(h, out)
            }
            ModelConfig::CsiNet(c) => {
                let [a, b] = c.widths;
                let block = lin(9 * 2, a) + lin(9 * a, b) + lin(9 * b, 2);
                c.blocks * block + lin(frame.y_len(), out)
            }
        }
    }
}
