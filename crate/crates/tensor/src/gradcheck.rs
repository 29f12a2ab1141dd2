//! Central finite-difference gradient checks.
//!
//! The numerical gradient never touches the tape's backward pass: each
//! probe re-evaluates the forward function on a fresh tape with one scalar
//! nudged by `+-step`.

use crate::error::Result;
use crate::param::{ParamId, ParamStore};
use crate::tape::{Mode, Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Second step tried when `step` disagrees; the better agreement counts.
    /// A piecewise-linear op (ReLU, max) with an input within `step` of its
    /// kink spoils one central difference but rarely both, while a wrong
    /// analytic gradient disagrees at every step.
    pub retry_step: Option<f64>,
    /// Denominator floor for the relative error of near-zero gradients.
    pub floor: f64,
    /// Probe at most this many coordinates per tensor (evenly spaced).
    pub max_coords: usize,
    /// Tape mode and seed used for every evaluation, so dropout masks repeat.
    pub mode: Mode,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            retry_step: None,
            floor: 1e-6,
            max_coords: usize::MAX,
            mode: Mode::Eval,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Worst relative error per checked tensor, labelled.
    pub per_tensor: Vec<(String, f64)>,
    pub coords_checked: usize,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.per_tensor.iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Relative error of one coordinate, `central(h)` being the central
/// difference with step `h`.
fn probe(analytic: f64, opts: &GradCheckOptions, mut central: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let err = relative_error(analytic, central(opts.step)?, opts.floor);
    match opts.retry_step {
        Some(h) if err > 0.0 => Ok(err.min(relative_error(analytic, central(h)?, opts.floor))),
        _ => Ok(err),
    }
}

fn probe_indices(len: usize, max: usize) -> Vec<usize> {
    if len <= max {
        (0..len).collect()
    } else {
        (0..max).map(|i| i * len / max).collect()
    }
}

/// Checks `d f / d inputs` where `f` maps trainable leaves to a scalar.
pub fn check_inputs<F>(inputs: &[Tensor], f: F, opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&Tape, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> Result<f64> {
        let tape = Tape::with_mode(opts.mode, opts.seed);
        let vars: Vec<Var> = values.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&tape, &vars)?;
        Ok(tape.value(out).item())
    };
    let tape = Tape::with_mode(opts.mode, opts.seed);
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&tape, &vars)?;
    let grads = tape.backward(out)?;
    let mut work = inputs.to_vec();
    let mut report = GradCheckReport {
        per_tensor: Vec::new(),
        coords_checked: 0,
    };
    for (ti, var) in vars.iter().enumerate() {
        let analytic = grads.wrt(*var);
        let mut worst: f64 = 0.0;
        for i in probe_indices(work[ti].len(), opts.max_coords) {
            let orig = work[ti].data()[i];
            let err = probe(analytic.data()[i], opts, |h| {
                work[ti].data_mut()[i] = orig + h;
                let plus = eval(&work)?;
                work[ti].data_mut()[i] = orig - h;
                let minus = eval(&work)?;
                work[ti].data_mut()[i] = orig;
                Ok((plus - minus) / (2.0 * h))
            })?;
            worst = worst.max(err);
            report.coords_checked += 1;
        }
        report.per_tensor.push((format!("input{ti}"), worst));
    }
    Ok(report)
}

/// Checks the gradient of `loss` with respect to every tensor in `store`.
pub fn check_params<F>(store: &mut ParamStore, loss: F, opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&Tape, &ParamStore) -> Result<Var>,
{
    let eval = |store: &ParamStore| -> Result<f64> {
        let tape = Tape::with_mode(opts.mode, opts.seed);
        let out = loss(&tape, store)?;
        Ok(tape.value(out).item())
    };
    let grads = {
        let tape = Tape::with_mode(opts.mode, opts.seed);
        let out = loss(&tape, store)?;
        tape.backward(out)?.params(store)
    };
    let ids: Vec<ParamId> = store.ids().collect();
    let mut report = GradCheckReport {
        per_tensor: Vec::new(),
        coords_checked: 0,
    };
    for id in ids {
        let analytic = grads
            .get(id)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(store.get(id).shape().to_vec()));
        let mut worst: f64 = 0.0;
        for i in probe_indices(store.get(id).len(), opts.max_coords) {
            let orig = store.get(id).data()[i];
            let err = probe(analytic.data()[i], opts, |h| {
                store.get_mut(id).data_mut()[i] = orig + h;
                let plus = eval(store)?;
                store.get_mut(id).data_mut()[i] = orig - h;
                let minus = eval(store)?;
                store.get_mut(id).data_mut()[i] = orig;
                Ok((plus - minus) / (2.0 * h))
            })?;
            worst = worst.max(err);
            report.coords_checked += 1;
        }
        report.per_tensor.push((store.name(id).to_string(), worst));
    }
    Ok(report)
}
