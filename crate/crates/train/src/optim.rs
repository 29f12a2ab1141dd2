use sigt_tensor::{ParamGrads, ParamStore, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "adam" => Some(OptimizerKind::Adam),
            "sgd" => Some(OptimizerKind::Sgd),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamMoments {
    pub m: Tensor,
    pub v: Tensor,
}

/// Optimizer state. Parameters without a gradient (not reachable from the
/// loss) are left untouched and their state does not advance.
#[derive(Clone, Debug)]
pub struct Optimizer {
    pub config: OptimConfig,
    pub moments: Vec<Option<AdamMoments>>,
    pub steps: Vec<u64>,
}

impl Optimizer {
    pub fn new(config: OptimConfig) -> Self {
        Self {
            config,
            moments: Vec::new(),
            steps: Vec::new(),
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &ParamGrads) {
        if self.steps.len() < store.len() {
            self.moments.resize(store.len(), None);
            self.steps.resize(store.len(), 0);
        }
        for (id, g) in grads.iter() {
            let p = store.get_mut(id).data_mut();
            match self.config.kind {
                OptimizerKind::Sgd => sgd_step(p, g.data(), self.config.lr),
                OptimizerKind::Adam => {
                    let i = id.index();
                    let state = self.moments[i].get_or_insert_with(|| AdamMoments {
                        m: Tensor::zeros(g.shape().to_vec()),
                        v: Tensor::zeros(g.shape().to_vec()),
                    });
                    self.steps[i] += 1;
                    adam_step(p, g.data(), state, self.steps[i], &self.config);
                }
            }
        }
    }
}

/// `p <- p - lr g`
pub fn sgd_step(p: &mut [f64], g: &[f64], lr: f64) {
    for (p, g) in p.iter_mut().zip(g) {
        *p -= lr * g;
    }
}

/// One Adam update with bias correction; `t` is the 1-based step count.
pub fn adam_step(p: &mut [f64], g: &[f64], state: &mut AdamMoments, t: u64, c: &OptimConfig) {
    let bc1 = 1.0 - c.beta1.powi(t as i32);
    let bc2 = 1.0 - c.beta2.powi(t as i32);
    let (m, v) = (state.m.data_mut(), state.v.data_mut());
    for i in 0..p.len() {
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
    }
}
