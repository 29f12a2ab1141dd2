#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigt_models::{
    Aggregation, CsiNetConfig, FcDnnConfig, LstmConfig, ModelConfig, SigTConfig,
};
use sigt_phy::FrameConfig;
use sigt_tensor::{PoolKind, Tensor};

pub fn mini_frame() -> FrameConfig {
    FrameConfig::miniature()
}

pub fn mini_sigt(aggregation: Aggregation) -> SigTConfig {
    SigTConfig {
        depth: 2,
        heads: 2,
        d_model: 8,
        d_ff: 12,
        aggregation,
        dropout_p: 0.0,
        mlp_hidden: 10,
    }
}

/// One small configuration of every architecture.
pub fn mini_models() -> Vec<(&'static str, ModelConfig)> {
    vec![
        ("sigt-conv", ModelConfig::SigT(mini_sigt(Aggregation::Conv))),
        ("sigt-avg", ModelConfig::SigT(mini_sigt(Aggregation::Pool(PoolKind::Avg)))),
        ("sigt-max", ModelConfig::SigT(mini_sigt(Aggregation::Pool(PoolKind::Max)))),
        ("fcdnn", ModelConfig::FcDnn(FcDnnConfig::default())),
        ("csinet", ModelConfig::CsiNet(CsiNetConfig::default())),
        (
            "lstm",
            ModelConfig::Lstm(LstmConfig {
                d_model: 8,
                mlp_hidden: 10,
                ..LstmConfig::default()
            }),
        ),
    ]
}

pub fn random_input(frame: &FrameConfig, batch: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(
        vec![batch, frame.n_subcarriers, frame.n_rx, frame.n_info, 2],
        |_| rng.random_range(-1.5..1.5),
    )
}

pub fn random_bits(frame: &FrameConfig, batch: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(vec![batch, frame.n_subcarriers, frame.n_tx, 2], |_| {
        f64::from(rng.random_range(0..=1u8))
    })
}
