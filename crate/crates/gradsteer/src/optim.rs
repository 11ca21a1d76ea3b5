//! Adam with global gradient-norm clipping, applied to the assembled
//! (possibly reweighted) update direction. A plain SGD step is kept around
//! so the unbiased update rule is testable in its literal form.

use crate::params::{GradientVector, SeparatorParams};
use crate::real::Real;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("gradient contains non-finite components")]
    NonFiniteGradient,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T: Real> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step_count: u64,
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub clip_norm: T,
}

impl<T: Real> AdamState<T> {
    /// Defaults: beta1=0.9, beta2=0.999, eps=1e-8.
    pub fn new(n_params: usize, lr: f64, clip_norm: f64) -> Self {
        Self {
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            step_count: 0,
            lr: T::from_f64c(lr),
            beta1: T::from_f64c(0.9),
            beta2: T::from_f64c(0.999),
            eps: T::from_f64c(1e-8),
            clip_norm: T::from_f64c(clip_norm),
        }
    }
}

/// Rescale `g` onto the L2 ball of radius `max_norm`; direction preserved.
pub fn clip_grad_norm<T: Real>(
    g: &GradientVector<T>,
    max_norm: T,
) -> Result<GradientVector<T>, OptimError> {
    if !g.is_finite() {
        return Err(OptimError::NonFiniteGradient);
    }
    let norm = g.norm();
    if norm <= max_norm {
        return Ok(g.clone());
    }
    let scale = max_norm / norm;
    Ok(GradientVector(g.0.iter().map(|&x| x * scale).collect()))
}

/// One Adam step with bias correction. `delta` is assumed already clipped.
pub fn adam_step<T: Real>(
    params: &SeparatorParams<T>,
    state: &AdamState<T>,
    delta: &GradientVector<T>,
) -> Result<(SeparatorParams<T>, AdamState<T>), OptimError> {
    if delta.len() != params.len() || state.m.len() != params.len() {
        return Err(OptimError::DimensionMismatch(delta.len(), params.len()));
    }
    let mut next = state.clone();
    next.step_count += 1;
    let t = next.step_count as i32;
    let bc1 = T::one() - state.beta1.powi(t);
    let bc2 = T::one() - state.beta2.powi(t);
    let mut new_params = params.clone();
    for i in 0..params.len() {
        next.m[i] = state.beta1 * state.m[i] + (T::one() - state.beta1) * delta.0[i];
        next.v[i] = state.beta2 * state.v[i] + (T::one() - state.beta2) * delta.0[i] * delta.0[i];
        let m_hat = next.m[i] / bc1;
        let v_hat = next.v[i] / bc2;
        new_params.values[i] = params.values[i] - state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok((new_params, next))
}

/// The literal unbiased update rule: `theta' = theta - eta * delta`.
pub fn sgd_step<T: Real>(
    params: &SeparatorParams<T>,
    lr: T,
    delta: &GradientVector<T>,
) -> Result<SeparatorParams<T>, OptimError> {
    if delta.len() != params.len() {
        return Err(OptimError::DimensionMismatch(delta.len(), params.len()));
    }
    let mut out = params.clone();
    for (p, &d) in out.values.iter_mut().zip(&delta.0) {
        *p = *p - lr * d;
    }
    Ok(out)
}
