//! Gradient tape: records tensor operations during a forward pass and
//! replays them in reverse to produce gradients.
//!
//! Nodes are appended in evaluation order, so reverse index order is a
//! valid topological order for the backward sweep. A node only carries a
//! gradient when at least one of its inputs does; constants (input batches,
//! labels) never allocate gradient buffers.

use std::cell::RefCell;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result, TensorError};
use crate::gemm::gemm;
use crate::param::{ParamGrads, ParamId, ParamStore};
use crate::tensor::{numel, split_at_axis, strides, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PoolKind {
    Avg,
    Max,
}

/// How the right operand of a binary op maps onto the left operand's shape.
#[derive(Debug)]
enum Bcast {
    Same,
    /// `b` equals the trailing dims of `a`; element `i` of `a` pairs with `i % n`.
    Suffix(usize),
    General(Vec<usize>),
}

impl Bcast {
    fn plan(op: &'static str, a: &[usize], b: &[usize]) -> Result<Self> {
        let mismatch = || TensorError::DimensionMismatch {
            op,
            lhs: a.to_vec(),
            rhs: b.to_vec(),
        };
        if a == b {
            return Ok(Bcast::Same);
        }
        if b.len() > a.len() {
            return Err(mismatch());
        }
        let lead = b.iter().take_while(|&&d| d == 1).count();
        let core = &b[lead..];
        if a.ends_with(core) {
            return Ok(Bcast::Suffix(numel(core)));
        }
        let pad = a.len() - b.len();
        let mut b_strides = vec![0usize; a.len()];
        let bs = strides(b);
        for (ax, &ad) in a.iter().enumerate() {
            if ax < pad {
                continue;
            }
            let bd = b[ax - pad];
            if bd == ad {
                b_strides[ax] = bs[ax - pad];
            } else if bd != 1 {
                return Err(mismatch());
            }
        }
        let mut map = Vec::with_capacity(numel(a));
        let mut idx = vec![0usize; a.len()];
        let mut off = 0usize;
        for _ in 0..numel(a) {
            map.push(off);
            for ax in (0..a.len()).rev() {
                idx[ax] += 1;
                off += b_strides[ax];
                if idx[ax] < a[ax] {
                    break;
                }
                off -= b_strides[ax] * a[ax];
                idx[ax] = 0;
            }
        }
        Ok(Bcast::General(map))
    }

    #[inline]
    fn index(&self, i: usize) -> usize {
        match self {
            Bcast::Same => i,
            Bcast::Suffix(n) => i % n,
            Bcast::General(map) => map[i],
        }
    }
}

enum Op {
    Leaf,
    Add(Var, Var, Bcast),
    Sub(Var, Var, Bcast),
    Mul(Var, Var, Bcast),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Softmax { x: Var, axis: usize },
    LayerNorm { x: Var, inv_std: Vec<f64> },
    MatMul(Var, Var),
    BatchMatMul { a: Var, b: Var, a_t: bool, b_t: bool, dims: [usize; 4] },
    Reshape(Var),
    Permute { x: Var, axes: Vec<usize> },
    Concat { xs: Vec<Var>, axis: usize },
    Narrow { x: Var, axis: usize, start: usize },
    SumAll(Var),
    MeanAll(Var),
    SumAxis { x: Var, axis: usize },
    Pool { x: Var, window: usize, kind: PoolKind, argmax: Vec<usize> },
    Unfold1d { x: Var, kernel: usize, stride: usize },
    Unfold2d { x: Var, kh: usize, kw: usize },
    Dropout { x: Var, mask: Vec<f64> },
}

struct Node {
    value: Arc<Tensor>,
    op: Op,
    param: Option<ParamId>,
    requires_grad: bool,
}

/// Single-threaded recording of one forward pass.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    mode: Mode,
    rng: RefCell<ChaCha8Rng>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    /// Evaluation-mode tape: dropout is the identity.
    pub fn new() -> Self {
        Self::with_mode(Mode::Eval, 0)
    }

    /// Training-mode tape; `seed` drives the dropout masks.
    pub fn training(seed: u64) -> Self {
        Self::with_mode(Mode::Train, seed)
    }

    pub fn with_mode(mode: Mode, seed: u64) -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            mode,
            rng: RefCell::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records a value that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var {
        self.push(Arc::new(value), Op::Leaf, None, false)
    }

    /// Records a trainable leaf that is not backed by a parameter store.
    pub fn leaf(&self, value: Tensor) -> Var {
        self.push(Arc::new(value), Op::Leaf, None, true)
    }

    /// Records the current value of a stored parameter as a trainable leaf.
    pub fn param(&self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.shared(id), Op::Leaf, Some(id), true)
    }

    pub fn value(&self, v: Var) -> Arc<Tensor> {
        Arc::clone(&self.nodes.borrow()[v.0].value)
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    fn push(&self, value: Arc<Tensor>, op: Op, param: Option<ParamId>, requires_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            param,
            requires_grad,
        });
        Var(nodes.len() - 1)
    }

    fn record(&self, value: Tensor, op: Op) -> Var {
        let requires_grad = {
            let nodes = self.nodes.borrow();
            inputs(&op).iter().any(|v| nodes[v.0].requires_grad)
        };
        self.push(Arc::new(value), op, None, requires_grad)
    }

    // ---- elementwise -------------------------------------------------

    /// `a + b`, broadcasting `b` (right-aligned, size-1 dims stretch) onto `a`.
    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub)
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul)
    }

    fn binary(
        &self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        make: impl FnOnce(Var, Var, Bcast) -> Op,
    ) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let plan = Bcast::plan(name, av.shape(), bv.shape())?;
        let (ad, bd) = (av.data(), bv.data());
        let data = match &plan {
            Bcast::Same => ad.iter().zip(bd).map(|(&x, &y)| f(x, y)).collect(),
            _ => ad
                .iter()
                .enumerate()
                .map(|(i, &x)| f(x, bd[plan.index(i)]))
                .collect(),
        };
        let out = Tensor::from_parts(av.shape().to_vec(), data);
        Ok(self.record(out, make(a, b, plan)))
    }

    pub fn scale(&self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| c * x);
        self.record(out, Op::Scale(a, c))
    }

    pub fn relu(&self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.record(out, Op::Relu(a))
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.record(out, Op::Sigmoid(a))
    }

    pub fn tanh(&self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.record(out, Op::Tanh(a))
    }

    /// Exp-normalizes every slice along `axis` (max-subtracted).
    pub fn softmax(&self, x: Var, axis: usize) -> Result<Var> {
        let xv = self.value(x);
        check_axis(axis, xv.rank())?;
        let (outer, n, inner) = split_at_axis(xv.shape(), axis);
        let src = xv.data();
        let mut out = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |j: usize| o * n * inner + j * inner + i;
                let max = (0..n).map(|j| src[at(j)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for j in 0..n {
                    let e = (src[at(j)] - max).exp();
                    out[at(j)] = e;
                    total += e;
                }
                for j in 0..n {
                    out[at(j)] /= total;
                }
            }
        }
        let out = Tensor::from_parts(xv.shape().to_vec(), out);
        Ok(self.record(out, Op::Softmax { x, axis }))
    }

    /// Zero-mean, unit-variance normalization over the last axis (no affine).
    pub fn layer_norm(&self, x: Var, eps: f64) -> Result<Var> {
        let xv = self.value(x);
        if xv.rank() == 0 {
            return Err(invalid("layer_norm", "scalar input"));
        }
        let d = *xv.shape().last().unwrap();
        let src = xv.data();
        let mut out = vec![0.0; src.len()];
        let mut inv_std = Vec::with_capacity(src.len() / d);
        for (row, dst) in src.chunks(d).zip(out.chunks_mut(d)) {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let r = 1.0 / (var + eps).sqrt();
            for (o, v) in dst.iter_mut().zip(row) {
                *o = (v - mean) * r;
            }
            inv_std.push(r);
        }
        let out = Tensor::from_parts(xv.shape().to_vec(), out);
        Ok(self.record(out, Op::LayerNorm { x, inv_std }))
    }

    /// Train mode: zero each entry with probability `p`, scale survivors by
    /// `1/(1-p)`. Eval mode: identity (returns `x` itself).
    pub fn dropout(&self, x: Var, p: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(invalid("dropout", format!("probability {p} outside [0, 1)")));
        }
        if self.mode == Mode::Eval || p == 0.0 {
            return Ok(x);
        }
        let xv = self.value(x);
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = {
            let mut rng = self.rng.borrow_mut();
            (0..xv.len())
                .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
                .collect()
        };
        let data = xv.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let out = Tensor::from_parts(xv.shape().to_vec(), data);
        Ok(self.record(out, Op::Dropout { x, mask }))
    }

    // ---- linear algebra ----------------------------------------------

    /// Rank-2 matrix product.
    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (sa, sb) = (av.shape(), bv.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(TensorError::DimensionMismatch {
                op: "matmul",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, av.data(), false, bv.data(), false, &mut out, 0.0);
        Ok(self.record(Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b)))
    }

    /// Batched product of rank-3 tensors, `op(a[i]) * op(b[i])`, where
    /// `a_t`/`b_t` transpose the trailing two axes of the operand.
    pub fn bmm(&self, a: Var, b: Var, a_t: bool, b_t: bool) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (sa, sb) = (av.shape(), bv.shape());
        let mismatch = || TensorError::DimensionMismatch {
            op: "bmm",
            lhs: sa.to_vec(),
            rhs: sb.to_vec(),
        };
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] {
            return Err(mismatch());
        }
        let (m, ka) = if a_t { (sa[2], sa[1]) } else { (sa[1], sa[2]) };
        let (kb, n) = if b_t { (sb[2], sb[1]) } else { (sb[1], sb[2]) };
        if ka != kb {
            return Err(mismatch());
        }
        let (batch, k) = (sa[0], ka);
        let mut out = vec![0.0; batch * m * n];
        for i in 0..batch {
            gemm(
                m,
                k,
                n,
                &av.data()[i * m * k..(i + 1) * m * k],
                a_t,
                &bv.data()[i * k * n..(i + 1) * k * n],
                b_t,
                &mut out[i * m * n..(i + 1) * m * n],
                0.0,
            );
        }
        let out = Tensor::from_parts(vec![batch, m, n], out);
        Ok(self.record(
            out,
            Op::BatchMatMul {
                a,
                b,
                a_t,
                b_t,
                dims: [batch, m, k, n],
            },
        ))
    }

    // ---- shape manipulation ------------------------------------------

    pub fn reshape(&self, x: Var, shape: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        if numel(shape) != xv.len() || shape.contains(&0) {
            return Err(TensorError::InvalidShape {
                shape: shape.to_vec(),
                len: xv.len(),
            });
        }
        let out = Tensor::from_parts(shape.to_vec(), xv.data().to_vec());
        Ok(self.record(out, Op::Reshape(x)))
    }

    /// Output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, x: Var, axes: &[usize]) -> Result<Var> {
        let out = self.value(x).permuted(axes)?;
        Ok(self.record(
            out,
            Op::Permute {
                x,
                axes: axes.to_vec(),
            },
        ))
    }

    /// Swaps the two axes of a rank-2 tensor.
    pub fn transpose(&self, x: Var) -> Result<Var> {
        self.permute(x, &[1, 0])
    }

    pub fn concat(&self, xs: &[Var], axis: usize) -> Result<Var> {
        let first = xs.first().ok_or_else(|| invalid("concat", "no inputs"))?;
        let base = self.shape(*first);
        check_axis(axis, base.len())?;
        let values: Vec<Arc<Tensor>> = xs.iter().map(|&v| self.value(v)).collect();
        let mut total = 0;
        for v in &values {
            let s = v.shape();
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(ax, (a, b))| ax == axis || a == b);
            if !compatible {
                return Err(TensorError::DimensionMismatch {
                    op: "concat",
                    lhs: base.clone(),
                    rhs: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_at_axis(&base, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for v in &values {
                let block = v.shape()[axis] * inner;
                data.extend_from_slice(&v.data()[o * block..(o + 1) * block]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        Ok(self.record(
            Tensor::from_parts(shape, data),
            Op::Concat {
                xs: xs.to_vec(),
                axis,
            },
        ))
    }

    /// Slice `[start, start + len)` along `axis`.
    pub fn narrow(&self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        check_axis(axis, xv.rank())?;
        let (outer, n, inner) = split_at_axis(xv.shape(), axis);
        if len == 0 || start + len > n {
            return Err(invalid(
                "narrow",
                format!("range {start}..{} exceeds axis length {n}", start + len),
            ));
        }
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let from = o * n * inner + start * inner;
            data.extend_from_slice(&xv.data()[from..from + len * inner]);
        }
        let mut shape = xv.shape().to_vec();
        shape[axis] = len;
        Ok(self.record(Tensor::from_parts(shape, data), Op::Narrow { x, axis, start }))
    }

    // ---- reductions --------------------------------------------------

    pub fn sum(&self, x: Var) -> Var {
        let total = self.value(x).sum();
        self.record(Tensor::scalar(total), Op::SumAll(x))
    }

    pub fn mean(&self, x: Var) -> Var {
        let xv = self.value(x);
        let m = xv.sum() / xv.len() as f64;
        self.record(Tensor::scalar(m), Op::MeanAll(x))
    }

    /// Sums out `axis` (the axis is removed from the shape).
    pub fn sum_axis(&self, x: Var, axis: usize) -> Result<Var> {
        let xv = self.value(x);
        check_axis(axis, xv.rank())?;
        let (outer, n, inner) = split_at_axis(xv.shape(), axis);
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for j in 0..n {
                let src = &xv.data()[(o * n + j) * inner..(o * n + j + 1) * inner];
                for (d, s) in data[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        let mut shape = xv.shape().to_vec();
        shape.remove(axis);
        Ok(self.record(Tensor::from_parts(shape, data), Op::SumAxis { x, axis }))
    }

    // ---- token-axis layers -------------------------------------------

    /// Non-overlapping pooling along axis 1 of a `[batch, tokens, features]`
    /// tensor; `tokens` must be a multiple of `window`.
    pub fn pool_tokens(&self, x: Var, window: usize, kind: PoolKind) -> Result<Var> {
        let xv = self.value(x);
        let s = xv.shape();
        if s.len() != 3 || window == 0 || s[1] % window != 0 {
            return Err(invalid(
                "pool_tokens",
                format!("window {window} does not tile shape {s:?}"),
            ));
        }
        let (b, l, c) = (s[0], s[1], s[2]);
        let lo = l / window;
        let src = xv.data();
        let mut data = vec![0.0; b * lo * c];
        let mut argmax = Vec::new();
        if kind == PoolKind::Max {
            argmax.resize(b * lo * c, 0);
        }
        for bi in 0..b {
            for t in 0..lo {
                for ch in 0..c {
                    let out_i = (bi * lo + t) * c + ch;
                    let at = |j: usize| (bi * l + t * window + j) * c + ch;
                    match kind {
                        PoolKind::Avg => {
                            data[out_i] =
                                (0..window).map(|j| src[at(j)]).sum::<f64>() / window as f64;
                        }
                        PoolKind::Max => {
                            let best = (0..window)
                                .map(at)
                                .fold(at(0), |best, i| if src[i] > src[best] { i } else { best });
                            data[out_i] = src[best];
                            argmax[out_i] = best;
                        }
                    }
                }
            }
        }
        Ok(self.record(
            Tensor::from_parts(vec![b, lo, c], data),
            Op::Pool {
                x,
                window,
                kind,
                argmax,
            },
        ))
    }

    /// Gathers sliding windows along axis 1 of `[batch, len, channels]`
    /// into `[batch, out_len, kernel * channels]` (no padding). A 1-D
    /// convolution is this followed by a matrix product.
    pub fn unfold1d(&self, x: Var, kernel: usize, stride: usize) -> Result<Var> {
        let xv = self.value(x);
        let s = xv.shape();
        if s.len() != 3 || kernel == 0 || stride == 0 || kernel > s[1] {
            return Err(invalid(
                "unfold1d",
                format!("kernel {kernel} stride {stride} on shape {s:?}"),
            ));
        }
        let (b, l, c) = (s[0], s[1], s[2]);
        let lo = (l - kernel) / stride + 1;
        let mut data = Vec::with_capacity(b * lo * kernel * c);
        for bi in 0..b {
            for o in 0..lo {
                let from = (bi * l + o * stride) * c;
                data.extend_from_slice(&xv.data()[from..from + kernel * c]);
            }
        }
        Ok(self.record(
            Tensor::from_parts(vec![b, lo, kernel * c], data),
            Op::Unfold1d { x, kernel, stride },
        ))
    }

    /// Gathers zero-padded `kh x kw` neighbourhoods of a channels-last image
    /// `[batch, height, width, channels]` into
    /// `[batch, height, width, kh * kw * channels]` ("same" padding, stride 1).
    pub fn unfold2d(&self, x: Var, kh: usize, kw: usize) -> Result<Var> {
        let xv = self.value(x);
        let s = xv.shape();
        if s.len() != 4 || kh % 2 == 0 || kw % 2 == 0 {
            return Err(invalid(
                "unfold2d",
                format!("kernel {kh}x{kw} on shape {s:?} (odd kernel, rank 4 required)"),
            ));
        }
        let (b, h, w, c) = (s[0], s[1], s[2], s[3]);
        let (ph, pw) = (kh / 2, kw / 2);
        let patch = kh * kw * c;
        let mut data = vec![0.0; b * h * w * patch];
        let src = xv.data();
        for bi in 0..b {
            for i in 0..h {
                for j in 0..w {
                    let dst = ((bi * h + i) * w + j) * patch;
                    for u in 0..kh {
                        let Some(si) = (i + u).checked_sub(ph).filter(|&v| v < h) else {
                            continue;
                        };
                        for v in 0..kw {
                            let Some(sj) = (j + v).checked_sub(pw).filter(|&v| v < w) else {
                                continue;
                            };
                            let from = ((bi * h + si) * w + sj) * c;
                            let to = dst + (u * kw + v) * c;
                            data[to..to + c].copy_from_slice(&src[from..from + c]);
                        }
                    }
                }
            }
        }
        Ok(self.record(
            Tensor::from_parts(vec![b, h, w, patch], data),
            Op::Unfold2d { x, kh, kw },
        ))
    }

    // ---- backward ----------------------------------------------------

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let loss_shape = nodes[loss.0].value.shape();
        if nodes[loss.0].value.len() != 1 {
            return Err(TensorError::NonScalarLoss(loss_shape.to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        if nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![1.0]);
        }
        for i in (0..=loss.0).rev() {
            let node = &nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else {
                continue;
            };
            backprop(&nodes, &mut grads, node, &g);
        }
        let mut leaves = Vec::new();
        let mut params = Vec::new();
        for (i, node) in nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) && node.requires_grad {
                let g = grads[i]
                    .take()
                    .map(|d| Tensor::from_parts(node.value.shape().to_vec(), d));
                if let Some(pid) = node.param {
                    params.push((pid, i));
                }
                leaves.push((i, g, node.value.shape().to_vec()));
            }
        }
        Ok(Gradients { leaves, params })
    }
}

/// Gradients of every trainable leaf after [`Tape::backward`].
pub struct Gradients {
    leaves: Vec<(usize, Option<Tensor>, Vec<usize>)>,
    params: Vec<(ParamId, usize)>,
}

impl Gradients {
    /// Gradient for a trainable leaf, or `None` if the loss does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.leaves
            .iter()
            .find(|(i, _, _)| *i == v.0)
            .and_then(|(_, g, _)| g.as_ref())
    }

    /// Gradient for a trainable leaf; zeros when unreachable from the loss.
    pub fn wrt(&self, v: Var) -> Tensor {
        let (_, g, shape) = self
            .leaves
            .iter()
            .find(|(i, _, _)| *i == v.0)
            .expect("wrt() called on a var that is not a trainable leaf");
        g.clone().unwrap_or_else(|| Tensor::zeros(shape.clone()))
    }

    /// Sums leaf gradients per stored parameter. Parameters never recorded
    /// on the tape, or not reachable from the loss, come back as `None`.
    pub fn params(&self, store: &ParamStore) -> ParamGrads {
        let mut out = ParamGrads::new(store.len());
        for &(pid, node) in &self.params {
            let Some(g) = self
                .leaves
                .iter()
                .find(|(i, _, _)| *i == node)
                .and_then(|(_, g, _)| g.as_ref())
            else {
                continue;
            };
            out.accumulate(pid, g);
        }
        out
    }
}

fn check_axis(axis: usize, rank: usize) -> Result<()> {
    if axis >= rank {
        Err(TensorError::AxisOutOfRange { axis, rank })
    } else {
        Ok(())
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn inputs(op: &Op) -> Vec<Var> {
    match op {
        Op::Leaf => vec![],
        Op::Add(a, b, _) | Op::Sub(a, b, _) | Op::Mul(a, b, _) | Op::MatMul(a, b) => vec![*a, *b],
        Op::BatchMatMul { a, b, .. } => vec![*a, *b],
        Op::Concat { xs, .. } => xs.clone(),
        Op::Scale(x, _)
        | Op::Relu(x)
        | Op::Sigmoid(x)
        | Op::Tanh(x)
        | Op::Reshape(x)
        | Op::SumAll(x)
        | Op::MeanAll(x)
        | Op::Softmax { x, .. }
        | Op::LayerNorm { x, .. }
        | Op::Permute { x, .. }
        | Op::Narrow { x, .. }
        | Op::SumAxis { x, .. }
        | Op::Pool { x, .. }
        | Op::Unfold1d { x, .. }
        | Op::Unfold2d { x, .. }
        | Op::Dropout { x, .. } => vec![*x],
    }
}

/// Lazily allocated gradient buffer for `v`, or `None` if `v` is constant.
fn slot<'g>(nodes: &[Node], grads: &'g mut [Option<Vec<f64>>], v: Var) -> Option<&'g mut Vec<f64>> {
    let node = &nodes[v.0];
    if !node.requires_grad {
        return None;
    }
    Some(grads[v.0].get_or_insert_with(|| vec![0.0; node.value.len()]))
}

fn backprop(nodes: &[Node], grads: &mut [Option<Vec<f64>>], node: &Node, g: &[f64]) {
    let y = node.value.data();
    let val = |v: &Var| Arc::clone(&nodes[v.0].value);
    match &node.op {
        Op::Leaf => {}
        Op::Add(a, b, plan) | Op::Sub(a, b, plan) => {
            let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
            if let Some(ga) = slot(nodes, grads, *a) {
                ga.iter_mut().zip(g).for_each(|(d, s)| *d += s);
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                for (i, s) in g.iter().enumerate() {
                    gb[plan.index(i)] += sign * s;
                }
            }
        }
        Op::Mul(a, b, plan) => {
            let (av, bv) = (val(a), val(b));
            if let Some(ga) = slot(nodes, grads, *a) {
                let bd = bv.data();
                for (i, (d, s)) in ga.iter_mut().zip(g).enumerate() {
                    *d += s * bd[plan.index(i)];
                }
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                for (i, (s, x)) in g.iter().zip(av.data()).enumerate() {
                    gb[plan.index(i)] += s * x;
                }
            }
        }
        Op::Scale(a, c) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                ga.iter_mut().zip(g).for_each(|(d, s)| *d += c * s);
            }
        }
        Op::Relu(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for ((d, s), o) in ga.iter_mut().zip(g).zip(y) {
                    if *o > 0.0 {
                        *d += s;
                    }
                }
            }
        }
        Op::Sigmoid(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for ((d, s), o) in ga.iter_mut().zip(g).zip(y) {
                    *d += s * o * (1.0 - o);
                }
            }
        }
        Op::Tanh(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for ((d, s), o) in ga.iter_mut().zip(g).zip(y) {
                    *d += s * (1.0 - o * o);
                }
            }
        }
        Op::Softmax { x, axis } => {
            if let Some(gx) = slot(nodes, grads, *x) {
                let (outer, n, inner) = split_at_axis(node.value.shape(), *axis);
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |j: usize| o * n * inner + j * inner + i;
                        let dot: f64 = (0..n).map(|j| g[at(j)] * y[at(j)]).sum();
                        for j in 0..n {
                            gx[at(j)] += y[at(j)] * (g[at(j)] - dot);
                        }
                    }
                }
            }
        }
        Op::LayerNorm { x, inv_std } => {
            if let Some(gx) = slot(nodes, grads, *x) {
                let d = *node.value.shape().last().unwrap();
                for (r, ((gr, yr), dst)) in g
                    .chunks(d)
                    .zip(y.chunks(d))
                    .zip(gx.chunks_mut(d))
                    .enumerate()
                {
                    let mg = gr.iter().sum::<f64>() / d as f64;
                    let mgy = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                    for ((o, gi), yi) in dst.iter_mut().zip(gr).zip(yr) {
                        *o += inv_std[r] * (gi - mg - yi * mgy);
                    }
                }
            }
        }
        Op::MatMul(a, b) => {
            let (av, bv) = (val(a), val(b));
            let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
            if let Some(ga) = slot(nodes, grads, *a) {
                gemm(m, n, k, g, false, bv.data(), true, ga, 1.0);
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                gemm(k, m, n, av.data(), true, g, false, gb, 1.0);
            }
        }
        Op::BatchMatMul {
            a,
            b,
            a_t,
            b_t,
            dims: [batch, m, k, n],
        } => {
            let (av, bv) = (val(a), val(b));
            let (m, k, n) = (*m, *k, *n);
            let (sa, sb, sc) = (m * k, k * n, m * n);
            if let Some(ga) = slot(nodes, grads, *a) {
                for i in 0..*batch {
                    let gi = &g[i * sc..(i + 1) * sc];
                    let bi = &bv.data()[i * sb..(i + 1) * sb];
                    let dst = &mut ga[i * sa..(i + 1) * sa];
                    if *a_t {
                        gemm(k, n, m, bi, *b_t, gi, true, dst, 1.0);
                    } else {
                        gemm(m, n, k, gi, false, bi, !*b_t, dst, 1.0);
                    }
                }
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                for i in 0..*batch {
                    let gi = &g[i * sc..(i + 1) * sc];
                    let ai = &av.data()[i * sa..(i + 1) * sa];
                    let dst = &mut gb[i * sb..(i + 1) * sb];
                    if *b_t {
                        gemm(n, m, k, gi, true, ai, *a_t, dst, 1.0);
                    } else {
                        gemm(k, m, n, ai, !*a_t, gi, false, dst, 1.0);
                    }
                }
            }
        }
        Op::Reshape(x) => {
            if let Some(gx) = slot(nodes, grads, *x) {
                gx.iter_mut().zip(g).for_each(|(d, s)| *d += s);
            }
        }
        Op::Permute { x, axes } => {
            if let Some(gx) = slot(nodes, grads, *x) {
                let mut inverse = vec![0; axes.len()];
                for (i, &a) in axes.iter().enumerate() {
                    inverse[a] = i;
                }
                let gt = Tensor::from_parts(node.value.shape().to_vec(), g.to_vec());
                let back = gt.permuted(&inverse).expect("inverse of a valid permutation");
                gx.iter_mut().zip(back.data()).for_each(|(d, s)| *d += s);
            }
        }
        Op::Concat { xs, axis } => {
            let (outer, total, inner) = split_at_axis(node.value.shape(), *axis);
            let mut offset = 0;
            for x in xs {
                let n = nodes[x.0].value.shape()[*axis];
                if let Some(gx) = slot(nodes, grads, *x) {
                    for o in 0..outer {
                        let from = (o * total + offset) * inner;
                        let src = &g[from..from + n * inner];
                        gx[o * n * inner..(o + 1) * n * inner]
                            .iter_mut()
                            .zip(src)
                            .for_each(|(d, s)| *d += s);
                    }
                }
                offset += n;
            }
        }
        Op::Narrow { x, axis, start } => {
            let len = node.value.shape()[*axis];
            let full = nodes[x.0].value.shape().to_vec();
            if let Some(gx) = slot(nodes, grads, *x) {
                let (outer, n, inner) = split_at_axis(&full, *axis);
                for o in 0..outer {
                    let to = o * n * inner + start * inner;
                    gx[to..to + len * inner]
                        .iter_mut()
                        .zip(&g[o * len * inner..(o + 1) * len * inner])
                        .for_each(|(d, s)| *d += s);
                }
            }
        }
        Op::SumAll(x) | Op::MeanAll(x) => {
            let n = nodes[x.0].value.len() as f64;
            let scale = if matches!(node.op, Op::MeanAll(_)) { g[0] / n } else { g[0] };
            if let Some(gx) = slot(nodes, grads, *x) {
                gx.iter_mut().for_each(|d| *d += scale);
            }
        }
        Op::SumAxis { x, axis } => {
            let full = nodes[x.0].value.shape().to_vec();
            if let Some(gx) = slot(nodes, grads, *x) {
                let (outer, n, inner) = split_at_axis(&full, *axis);
                for o in 0..outer {
                    let src = &g[o * inner..(o + 1) * inner];
                    for j in 0..n {
                        gx[(o * n + j) * inner..(o * n + j + 1) * inner]
                            .iter_mut()
                            .zip(src)
                            .for_each(|(d, s)| *d += s);
                    }
                }
            }
        }
        Op::Pool {
            x,
            window,
            kind,
            argmax,
        } => {
            let full = nodes[x.0].value.shape().to_vec();
            if let Some(gx) = slot(nodes, grads, *x) {
                match kind {
                    PoolKind::Max => {
                        for (s, &src) in g.iter().zip(argmax) {
                            gx[src] += s;
                        }
                    }
                    PoolKind::Avg => {
                        let (b, l, c) = (full[0], full[1], full[2]);
                        let lo = l / window;
                        let w = *window as f64;
                        for bi in 0..b {
                            for t in 0..lo {
                                for j in 0..*window {
                                    for ch in 0..c {
                                        gx[(bi * l + t * window + j) * c + ch] +=
                                            g[(bi * lo + t) * c + ch] / w;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Op::Unfold1d { x, kernel, stride } => {
            let full = nodes[x.0].value.shape().to_vec();
            if let Some(gx) = slot(nodes, grads, *x) {
                let (l, c) = (full[1], full[2]);
                let out = node.value.shape();
                let (b, lo) = (out[0], out[1]);
                let row = kernel * c;
                for bi in 0..b {
                    for o in 0..lo {
                        let to = (bi * l + o * stride) * c;
                        let from = (bi * lo + o) * row;
                        gx[to..to + row]
                            .iter_mut()
                            .zip(&g[from..from + row])
                            .for_each(|(d, s)| *d += s);
                    }
                }
            }
        }
        Op::Unfold2d { x, kh, kw } => {
            let full = nodes[x.0].value.shape().to_vec();
            if let Some(gx) = slot(nodes, grads, *x) {
                let (b, h, w, c) = (full[0], full[1], full[2], full[3]);
                let (ph, pw) = (kh / 2, kw / 2);
                let patch = kh * kw * c;
                for bi in 0..b {
                    for i in 0..h {
                        for j in 0..w {
                            let src = ((bi * h + i) * w + j) * patch;
                            for u in 0..*kh {
                                let Some(si) = (i + u).checked_sub(ph).filter(|&v| v < h) else {
                                    continue;
                                };
                                for v in 0..*kw {
                                    let Some(sj) = (j + v).checked_sub(pw).filter(|&v| v < w)
                                    else {
                                        continue;
                                    };
                                    let to = ((bi * h + si) * w + sj) * c;
                                    let from = src + (u * kw + v) * c;
                                    gx[to..to + c]
                                        .iter_mut()
                                        .zip(&g[from..from + c])
                                        .for_each(|(d, s)| *d += s);
                                }
                            }
                        }
                    }
                }
            }
        }
        Op::Dropout { x, mask } => {
            if let Some(gx) = slot(nodes, grads, *x) {
                for ((d, s), m) in gx.iter_mut().zip(g).zip(mask) {
                    *d += s * m;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity_and_hand_product() {
        let tape = Tape::new();
        let m = Tensor::from_fn([3, 4], |i| i as f64 - 2.5);
        let i3 = tape.constant(Tensor::eye(3));
        let mv = tape.constant(m.clone());
        let out = tape.matmul(i3, mv).unwrap();
        assert_eq!(*tape.value(out), m);

        let a = tape.constant(Tensor::new([2, 2], vec![1., 2., 3., 4.]).unwrap());
        let b = tape.constant(Tensor::new([2, 1], vec![5., 6.]).unwrap());
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let tape = Tape::new();
        let a = tape.constant(Tensor::zeros([2, 3]));
        let b = tape.constant(Tensor::zeros([2, 3]));
        let err = tape.matmul(a, b).unwrap_err();
        assert_eq!(
            err,
            TensorError::DimensionMismatch {
                op: "matmul",
                lhs: vec![2, 3],
                rhs: vec![2, 3]
            }
        );
        assert!(err.to_string().contains("[2, 3]"));
    }

    #[test]
    fn softmax_basic_cases() {
        let tape = Tape::new();
        let x = tape.constant(Tensor::zeros([3]));
        let s = tape.softmax(x, 0).unwrap();
        for &v in tape.value(s).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let one = tape.constant(Tensor::new([1], vec![42.0]).unwrap());
        let s = tape.softmax(one, 0).unwrap();
        assert_eq!(tape.value(s).data(), &[1.0]);
    }

    #[test]
    fn softmax_matches_scalar_evaluation() {
        let tape = Tape::new();
        let x = tape.constant(Tensor::new([3], vec![1.0, 2.0, 3.0]).unwrap());
        let s = tape.softmax(x, 0).unwrap();
        let denom = 1f64.exp() + 2f64.exp() + 3f64.exp();
        let want = [1f64.exp() / denom, 2f64.exp() / denom, 3f64.exp() / denom];
        for (got, w) in tape.value(s).data().iter().zip(want) {
            assert!((got - w).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_survives_large_logits() {
        let tape = Tape::new();
        let x = tape.constant(Tensor::new([2], vec![1000.0, 1000.0]).unwrap());
        let s = tape.softmax(x, 0).unwrap();
        assert_eq!(tape.value(s).data(), &[0.5, 0.5]);
    }

    #[test]
    fn backward_linear_and_quadratic() {
        let tape = Tape::new();
        let w = tape.leaf(Tensor::new([3], vec![1.0, -2.0, 0.5]).unwrap());
        let loss = tape.sum(w);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.wrt(w).data(), &[1.0, 1.0, 1.0]);

        let tape = Tape::new();
        let w = tape.leaf(Tensor::new([3], vec![1.0, -2.0, 0.5]).unwrap());
        let sq = tape.mul(w, w).unwrap();
        let loss = tape.sum(sq);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.wrt(w).data(), &[2.0, -4.0, 1.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let tape = Tape::new();
        let w = tape.leaf(Tensor::zeros([2]));
        let y = tape.scale(w, 2.0);
        assert_eq!(
            tape.backward(y).err(),
            Some(TensorError::NonScalarLoss(vec![2]))
        );
    }

    #[test]
    fn unreachable_leaf_gets_zero_gradient() {
        let tape = Tape::new();
        let used = tape.leaf(Tensor::ones([2]));
        let unused = tape.leaf(Tensor::ones([4]));
        let loss = tape.sum(used);
        let g = tape.backward(loss).unwrap();
        assert!(g.get(unused).is_none());
        assert_eq!(g.wrt(unused), Tensor::zeros([4]));
    }

    #[test]
    fn broadcast_bias_and_general() {
        let tape = Tape::new();
        let a = tape.constant(Tensor::from_fn([2, 3], |i| i as f64));
        let bias = tape.constant(Tensor::new([3], vec![10., 20., 30.]).unwrap());
        let s = tape.add(a, bias).unwrap();
        assert_eq!(tape.value(s).data(), &[10., 21., 32., 13., 24., 35.]);
        let col = tape.constant(Tensor::new([2, 1], vec![1., -1.]).unwrap());
        let p = tape.mul(a, col).unwrap();
        assert_eq!(tape.value(p).data(), &[0., 1., 2., -3., -4., -5.]);
        let bad = tape.constant(Tensor::zeros([2]));
        assert!(tape.add(a, bad).is_err());
    }

    #[test]
    fn dropout_eval_is_identity() {
        let tape = Tape::new();
        let x = tape.constant(Tensor::ones([10]));
        assert_eq!(tape.dropout(x, 0.5).unwrap(), x);
        assert!(tape.dropout(x, 1.0).is_err());
    }

    #[test]
    fn pool_and_unfold_shapes() {
        let tape = Tape::new();
        let x = tape.constant(Tensor::from_fn([2, 4, 3], |i| i as f64));
        let p = tape.pool_tokens(x, 2, PoolKind::Max).unwrap();
        assert_eq!(tape.shape(p), vec![2, 2, 3]);
        assert_eq!(tape.value(p).at(&[0, 0, 0]), 3.0);
        assert!(tape.pool_tokens(x, 3, PoolKind::Avg).is_err());
        let u = tape.unfold1d(x, 2, 2).unwrap();
        assert_eq!(tape.shape(u), vec![2, 2, 6]);
        let img = tape.constant(Tensor::from_fn([1, 3, 3, 1], |i| i as f64));
        let u2 = tape.unfold2d(img, 3, 3).unwrap();
        assert_eq!(tape.shape(u2), vec![1, 3, 3, 9]);
        // centre pixel sees the whole image
        let centre: Vec<f64> = (0..9).map(|k| tape.value(u2).at(&[0, 1, 1, k])).collect();
        assert_eq!(centre, (0..9).map(|v| v as f64).collect::<Vec<_>>());
        // corner pixel is zero padded
        assert_eq!(tape.value(u2).at(&[0, 0, 0, 0]), 0.0);
    }
}
