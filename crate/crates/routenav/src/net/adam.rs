//! Adaptive-moment optimizer over the policy parameter tensors.

use crate::net::{Gradients, PolicyParams};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First/second moment accumulators plus the step counter.
#[derive(Debug, Clone)]
pub struct OptState {
    m: PolicyParams,
    v: PolicyParams,
    step: u64,
}

impl OptState {
    pub fn new(params: &PolicyParams) -> Self {
        OptState { m: params.zeros_like(), v: params.zeros_like(), step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One update with bias correction: m̂ = m/(1−β₁ᵗ), v̂ = v/(1−β₂ᵗ),
/// p ← p − lr·m̂/(√v̂ + ε).
pub fn adam_step(params: &mut PolicyParams, grads: &Gradients, opt: &mut OptState, lr: f64) {
    opt.step += 1;
    let t = opt.step as i32;
    let bias1 = 1.0 - BETA1.powi(t);
    let bias2 = 1.0 - BETA2.powi(t);

    let mut p_tensors = params.named_tensors_mut();
    let g_tensors = grads.named_tensors();
    let mut m_tensors = opt.m.named_tensors_mut();
    let mut v_tensors = opt.v.named_tensors_mut();
    debug_assert_eq!(p_tensors.len(), g_tensors.len());
    for i in 0..p_tensors.len() {
        let p = &mut p_tensors[i].1;
        let g = g_tensors[i].1;
        let m = &mut m_tensors[i].1;
        let v = &mut v_tensors[i].1;
        for j in 0..p.len() {
            let gj = g[j];
            m[j] = BETA1 * m[j] + (1.0 - BETA1) * gj;
            v[j] = BETA2 * v[j] + (1.0 - BETA2) * gj * gj;
            let m_hat = m[j] / bias1;
            let v_hat = v[j] / bias2;
            p[j] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
}
