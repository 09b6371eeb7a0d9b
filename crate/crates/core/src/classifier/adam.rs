use super::{ModelParams, Scalar};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<F> {
    pub m: Vec<Vec<F>>,
    pub v: Vec<Vec<F>>,
    pub t: u64,
    pub config: AdamConfig,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(params: &ModelParams<F>, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<F>> = params.tensors.iter().map(|t| vec![F::zero(); t.data.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            config,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
///
/// `m ← β₁m + (1−β₁)g`, `v ← β₂v + (1−β₂)g²`,
/// `θ ← θ − lr · m̂ / (√v̂ + ε)` with `m̂ = m/(1−β₁ᵗ)`, `v̂ = v/(1−β₂ᵗ)`.
pub fn adam_step<F: Scalar>(params: &mut ModelParams<F>, grads: &ModelParams<F>, state: &mut AdamState<F>) -> Result<()> {
    let shapes_ok = params.same_shape(grads)
        && state.m.len() == params.tensors.len()
        && state.v.len() == params.tensors.len()
        && params
            .tensors
            .iter()
            .zip(state.m.iter().zip(&state.v))
            .all(|(p, (m, v))| m.len() == p.data.len() && v.len() == p.data.len());
    if !shapes_ok {
        return Err(Error::ShapeMismatch("parameters, gradients and Adam state disagree".into()));
    }
    state.t += 1;
    let c = state.config;
    let t = state.t as i32;
    let bias1 = 1.0 - c.beta1.powi(t);
    let bias2 = 1.0 - c.beta2.powi(t);
    let (b1, b2) = (F::of(c.beta1), F::of(c.beta2));
    let (one_b1, one_b2) = (F::of(1.0 - c.beta1), F::of(1.0 - c.beta2));
    let (inv_bias1, inv_bias2) = (F::of(1.0 / bias1), F::of(1.0 / bias2));
    let (lr, eps) = (F::of(c.learning_rate), F::of(c.epsilon));
    for ((p, g), (m, v)) in params
        .tensors
        .iter_mut()
        .zip(&grads.tensors)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for (((theta, &gi), mi), vi) in p.data.iter_mut().zip(&g.data).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = b1 * *mi + one_b1 * gi;
            *vi = b2 * *vi + one_b2 * gi * gi;
            let m_hat = *mi * inv_bias1;
            let v_hat = *vi * inv_bias2;
            *theta = *theta - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
