//! AdamW: Adam with decoupled weight decay.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::tensor::Tensor;

/// First/second moment accumulators plus the step counter.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimizerState {
    pub fn new(params: &[&Tensor]) -> Self {
        OptimizerState {
            m: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One AdamW step over all parameters. The weight decay is decoupled: the
/// shrinkage `theta -= lr * wd * theta` is applied separately from the
/// bias-corrected Adam update, both evaluated at the incoming parameters.
/// A non-finite gradient aborts the step before touching anything.
pub fn adamw_step(
    params: &mut [&mut Tensor],
    grads: &[&[f64]],
    state: &mut OptimizerState,
    lr: f64,
    wd: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} params, {} grads, {} moment buffers",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.numel() != g.len() {
            return Err(Error::ShapeMismatch(format!(
                "parameter has {} entries, gradient {}",
                p.numel(),
                g.len()
            )));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(String::from("gradient")));
        }
    }

    state.step += 1;
    let t = state.step;
    let bc1 = 1.0 - math::powi(state.beta1, t as i32);
    let bc2 = 1.0 - math::powi(state.beta2, t as i32);

    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let data = p.data_mut();
        for i in 0..data.len() {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            let prev = data[i];
            data[i] = prev - lr * m_hat / (math::sqrt(v_hat) + state.eps) - lr * wd * prev;
        }
    }
    Ok(())
}
