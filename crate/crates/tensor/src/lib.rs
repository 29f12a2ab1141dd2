//! Dense `f64` tensors with tape-based reverse-mode differentiation and the
//! layers the receiver networks are built from.

pub mod attention;
mod error;
mod gemm;
pub mod gradcheck;
pub mod nn;
mod param;
mod tape;
mod tensor;

pub use attention::{multi_head_attention, self_attention, AttentionParams};
pub use error::{Result, TensorError};
pub use param::{ParamGrads, ParamId, ParamStore};
pub use tape::{Gradients, Mode, PoolKind, Tape, Var};
pub use tensor::Tensor;
