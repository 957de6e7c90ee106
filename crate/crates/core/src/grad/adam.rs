use crate::netgen::Trainable;
use crate::{Error, Result};

/// Bias-corrected Adam moments, one buffer per trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(model: &impl Trainable, lr: f64) -> Self {
        let zeros = model.zero_like();
        AdamState {
            step: 0,
            m: zeros.clone(),
            v: zeros,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update of every tensor of `model` in place.
pub fn adam_step(state: &mut AdamState, model: &mut impl Trainable, grads: &[Vec<f64>]) -> Result<()> {
    let mut tensors = model.tensors_mut();
    if tensors.len() != grads.len() || tensors.len() != state.m.len() {
        return Err(Error::shape("gradient tensors", tensors.len(), grads.len()));
    }
    for ((w, g), m) in tensors.iter().zip(grads).zip(&state.m) {
        if w.len() != g.len() || w.len() != m.len() {
            return Err(Error::shape("gradient tensor length", w.len(), g.len()));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for (k, w) in tensors.iter_mut().enumerate() {
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for i in 0..w.len() {
            let g = grads[k][i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            let mh = m[i] / c1;
            let vh = v[i] / c2;
            w[i] -= state.lr * mh / (vh.sqrt() + state.eps);
        }
    }
    Ok(())
}
