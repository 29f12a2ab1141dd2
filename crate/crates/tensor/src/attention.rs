//! Scaled dot-product self-attention over a set of tokens.
//!
//! Tokens are rows: a `[N, d]` (or batched `[B, N, d]`) tensor. For one head,
//! `Q = X Wq`, `K = X Wk`, `V = X Wv` and the output row `i` is
//! `sum_j softmax_j(q_i . k_j / sqrt(d_k)) v_j`, a convex combination of the
//! value vectors. No positional information enters, so permuting the input
//! rows permutes the output rows the same way.

use rand::Rng;

use crate::error::{Result, TensorError};
use crate::nn::glorot;
use crate::param::{ParamId, ParamStore};
use crate::tape::{Tape, Var};

/// Multi-head attention weights. Query and key projections share the width
/// `d_k`; the per-head projections are stored side by side, e.g. `wq` is
/// `[d, heads * d_k]`, and `wo` maps `heads * d_v` back to `d`.
#[derive(Clone, Debug)]
pub struct AttentionParams {
    pub d: usize,
    pub d_k: usize,
    pub d_v: usize,
    pub heads: usize,
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub wo: ParamId,
}

impl AttentionParams {
    /// Standard layout with `d_k = d_v = d / heads`.
    pub fn new(store: &mut ParamStore, name: &str, d: usize, heads: usize, rng: &mut impl Rng) -> Self {
        assert!(heads >= 1 && d % heads == 0, "width {d} not divisible by {heads} heads");
        Self::with_widths(store, name, d, heads, d / heads, d / heads, rng)
    }

    pub fn with_widths(
        store: &mut ParamStore,
        name: &str,
        d: usize,
        heads: usize,
        d_k: usize,
        d_v: usize,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(heads >= 1, "attention needs at least one head");
        let hk = heads * d_k;
        let hv = heads * d_v;
        Self {
            d,
            d_k,
            d_v,
            heads,
            wq: store.add(format!("{name}.wq"), glorot(&[d, hk], d, hk, rng)),
            wk: store.add(format!("{name}.wk"), glorot(&[d, hk], d, hk, rng)),
            wv: store.add(format!("{name}.wv"), glorot(&[d, hv], d, hv, rng)),
            wo: store.add(format!("{name}.wo"), glorot(&[hv, d], hv, d, rng)),
        }
    }

    pub fn forward(&self, tape: &Tape, store: &ParamStore, tokens: Var) -> Result<Var> {
        multi_head_attention(
            tape,
            tokens,
            tape.param(store, self.wq),
            tape.param(store, self.wk),
            tape.param(store, self.wv),
            tape.param(store, self.wo),
            self.heads,
        )
    }
}

/// Single-head attention. `wq`, `wk` are `[d, d_k]`, `wv` is `[d, d_v]`;
/// returns `[N, d_v]` (or `[B, N, d_v]`).
pub fn self_attention(tape: &Tape, tokens: Var, wq: Var, wk: Var, wv: Var) -> Result<Var> {
    let (x, batched) = lift(tape, tokens)?;
    let [b, n, _] = dims3(&tape.shape(x));
    let q = project(tape, x, wq)?;
    let k = project(tape, x, wk)?;
    let v = project(tape, x, wv)?;
    let out = attend(tape, q, k, v)?;
    let d_v = tape.shape(wv)[1];
    if batched {
        Ok(out)
    } else {
        tape.reshape(out, &[n * b, d_v])
    }
}

/// `Concat(head_1..head_h) Wo` with head `i` using column block `i` of the
/// fused projections.
pub fn multi_head_attention(
    tape: &Tape,
    tokens: Var,
    wq: Var,
    wk: Var,
    wv: Var,
    wo: Var,
    heads: usize,
) -> Result<Var> {
    let (x, batched) = lift(tape, tokens)?;
    let [b, n, _] = dims3(&tape.shape(x));
    let (hk, hv, wo_shape) = (tape.shape(wq)[1], tape.shape(wv)[1], tape.shape(wo));
    if heads == 0 || hk % heads != 0 || hv % heads != 0 || wo_shape[0] != hv {
        return Err(TensorError::DimensionMismatch {
            op: "multi_head_attention",
            lhs: vec![heads, hk, hv],
            rhs: wo_shape,
        });
    }
    let split = |p: Var, width: usize| -> Result<Var> {
        let p = tape.reshape(p, &[b, n, heads, width])?;
        let p = tape.permute(p, &[0, 2, 1, 3])?;
        tape.reshape(p, &[b * heads, n, width])
    };
    let q = split(project(tape, x, wq)?, hk / heads)?;
    let k = split(project(tape, x, wk)?, hk / heads)?;
    let v = split(project(tape, x, wv)?, hv / heads)?;
    let heads_out = attend(tape, q, k, v)?;
    let merged = tape.reshape(heads_out, &[b, heads, n, hv / heads])?;
    let merged = tape.permute(merged, &[0, 2, 1, 3])?;
    let merged = tape.reshape(merged, &[b * n, hv])?;
    let out = tape.matmul(merged, wo)?;
    let d = wo_shape[1];
    if batched {
        tape.reshape(out, &[b, n, d])
    } else {
        tape.reshape(out, &[n, d])
    }
}

/// `softmax(Q K^T / sqrt(d_k)) V` on `[B, N, d_k]` / `[B, N, d_v]` operands.
fn attend(tape: &Tape, q: Var, k: Var, v: Var) -> Result<Var> {
    let d_k = tape.shape(q)[2];
    let scores = tape.bmm(q, k, false, true)?;
    let scores = tape.scale(scores, 1.0 / (d_k as f64).sqrt());
    let weights = tape.softmax(scores, 2)?;
    tape.bmm(weights, v, false, false)
}

/// `[B, N, d] x [d, w] -> [B, N, w]`.
fn project(tape: &Tape, x: Var, w: Var) -> Result<Var> {
    let [b, n, d] = dims3(&tape.shape(x));
    let flat = tape.reshape(x, &[b * n, d])?;
    let p = tape.matmul(flat, w)?;
    let width = tape.shape(w)[1];
    tape.reshape(p, &[b, n, width])
}

fn lift(tape: &Tape, tokens: Var) -> Result<(Var, bool)> {
    let s = tape.shape(tokens);
    match s.len() {
        2 => Ok((tape.reshape(tokens, &[1, s[0], s[1]])?, false)),
        3 => Ok((tokens, true)),
        _ => Err(TensorError::DimensionMismatch {
            op: "attention",
            lhs: s,
            rhs: vec![],
        }),
    }
}

fn dims3(s: &[usize]) -> [usize; 3] {
    [s[0], s[1], s[2]]
}
