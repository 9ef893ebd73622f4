//! RMSProp and Adam, applied tensor by tensor to one parameter group.

use crate::error::{Error, Result};
use crate::model::{ModelParameters, ParamGroup};

pub const CLASSIFICATION_LR: f64 = 0.0002;
pub const RANKING_LR: f64 = 0.001;

/// Per-tensor update rule. `slot` identifies the tensor so each keeps its
/// own state.
pub trait Optimizer {
    fn update(&mut self, slot: usize, param: &mut [f64], grad: &[f64]);
}

#[derive(Clone, Debug)]
pub struct RmsProp {
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
    square_avg: Vec<Vec<f64>>,
}

impl RmsProp {
    pub fn new(lr: f64) -> Self {
        RmsProp {
            lr,
            rho: 0.9,
            eps: 1e-8,
            square_avg: Vec::new(),
        }
    }
}

impl Default for RmsProp {
    fn default() -> Self {
        RmsProp::new(CLASSIFICATION_LR)
    }
}

fn slot_state(state: &mut Vec<Vec<f64>>, slot: usize, len: usize) -> &mut Vec<f64> {
    if state.len() <= slot {
        state.resize_with(slot + 1, Vec::new);
    }
    let s = &mut state[slot];
    if s.len() != len {
        *s = vec![0.0; len];
    }
    s
}

impl Optimizer for RmsProp {
    fn update(&mut self, slot: usize, param: &mut [f64], grad: &[f64]) {
        let (lr, rho, eps) = (self.lr, self.rho, self.eps);
        let avg = slot_state(&mut self.square_avg, slot, param.len());
        for ((p, &g), v) in param.iter_mut().zip(grad).zip(avg.iter_mut()) {
            *v = rho * *v + (1.0 - rho) * g * g;
            *p -= lr * g / (v.sqrt() + eps);
        }
    }
}

#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    steps: Vec<i32>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first: Vec::new(),
            second: Vec::new(),
            steps: Vec::new(),
        }
    }
}

impl Default for Adam {
    fn default() -> Self {
        Adam::new(RANKING_LR)
    }
}

impl Optimizer for Adam {
    fn update(&mut self, slot: usize, param: &mut [f64], grad: &[f64]) {
        if self.steps.len() <= slot {
            self.steps.resize(slot + 1, 0);
        }
        self.steps[slot] += 1;
        let t = self.steps[slot];
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (lr, b1, b2, eps) = (self.lr, self.beta1, self.beta2, self.eps);
        let m = slot_state(&mut self.first, slot, param.len());
        let v = slot_state(&mut self.second, slot, param.len());
        for (((p, &g), m), v) in param
            .iter_mut()
            .zip(grad)
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
    }
}

/// Applies one optimizer step to the tensors of `params` in `groups`,
/// reading the matching tensors of `grads`. Nothing is modified when any
/// selected gradient is non-finite.
pub fn step(
    opt: &mut impl Optimizer,
    params: &mut ModelParameters,
    grads: &ModelParameters,
    groups: &[ParamGroup],
) -> Result<()> {
    let grads = grads.tensors();
    for (group, g) in &grads {
        if groups.contains(group) && g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
    }
    let mut slot = 0;
    params.for_each_tensor_mut(|group, p| {
        if groups.contains(&group) {
            opt.update(slot, p, grads[slot].1);
        }
        slot += 1;
    });
    Ok(())
}
