//! Per-unit gradient reweighting: the weighting functions that select the
//! operating mode (robust / curriculum / class bias), the softmax pmf over
//! batch units, and assembly of the biased update direction.
//!
//! The pmf is always computed from the current losses, frozen, and then
//! applied; gradients never flow through the pmf itself.

use crate::params::GradientVector;
use crate::real::Real;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ReweightError {
    #[error("no class weight configured for class id {0}")]
    MissingClassWeight(u32),
    #[error("batch has no units")]
    EmptyBatch,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// What a softmax "unit" is: a whole example, or one (example, source) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    PerExample,
    PerSource,
}

/// The user-selected weighting function for the softmax logits.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightingMode {
    /// Equal weights; recovers plain mini-batch SGD averaging.
    Uniform,
    /// Upweight high-loss units: F = alpha * L.
    Robust { alpha: f64 },
    /// Upweight low-loss units early: F = beta(kappa) * L with
    /// beta(kappa) = -1 / (a + b * kappa). By default kappa is the epoch
    /// index; `per_step` switches to the optimization step instead.
    Curriculum { a: f64, b: f64, per_step: bool },
    /// Constant per-class logits: F = gamma(class of unit).
    ClassBias { gamma: BTreeMap<u32, f64>, granularity: Granularity },
}

impl WeightingMode {
    pub fn curriculum_default() -> Self {
        WeightingMode::Curriculum { a: 10.0, b: 0.5, per_step: false }
    }

    /// Unit granularity implied by the mode. Only class bias operates on
    /// (example, source) units by default; the loss-driven modes weight
    /// whole examples as in the batch pmf of the update rule.
    pub fn granularity(&self) -> Granularity {
        match self {
            WeightingMode::ClassBias { granularity, .. } => *granularity,
            _ => Granularity::PerExample,
        }
    }
}

/// Training progress coordinates used by schedule-driven modes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EpochClock {
    pub epoch: u64,
    pub step: u64,
}

/// The curriculum schedule beta(kappa) = -1 / (a + b * kappa).
pub fn curriculum_beta(a: f64, b: f64, kappa: u64) -> f64 {
    -1.0 / (a + b * kappa as f64)
}

/// Evaluate the weighting function F for every unit in the batch.
pub fn weighting_values<T: Real>(
    mode: &WeightingMode,
    per_unit_losses: &[T],
    per_unit_classes: &[u32],
    clock: EpochClock,
) -> Result<Vec<T>, ReweightError> {
    if per_unit_losses.is_empty() {
        return Err(ReweightError::EmptyBatch);
    }
    match mode {
        WeightingMode::Uniform => Ok(vec![T::zero(); per_unit_losses.len()]),
        WeightingMode::Robust { alpha } => {
            let a = T::from_f64c(*alpha);
            Ok(per_unit_losses.iter().map(|&l| a * l).collect())
        }
        WeightingMode::Curriculum { a, b, per_step } => {
            let kappa = if *per_step { clock.step } else { clock.epoch };
            let beta = T::from_f64c(curriculum_beta(*a, *b, kappa));
            Ok(per_unit_losses.iter().map(|&l| beta * l).collect())
        }
        WeightingMode::ClassBias { gamma, .. } => {
            if per_unit_classes.len() != per_unit_losses.len() {
                return Err(ReweightError::DimensionMismatch(
                    per_unit_classes.len(),
                    per_unit_losses.len(),
                ));
            }
            per_unit_classes
                .iter()
                .map(|c| {
                    gamma
                        .get(c)
                        .map(|&g| T::from_f64c(g))
                        .ok_or(ReweightError::MissingClassWeight(*c))
                })
                .collect()
        }
    }
}

/// Softmax-normalized probability weights over batch units, with
/// diagnostics for the per-batch weights log.
#[derive(Debug, Clone)]
pub struct BatchPmf<T: Real> {
    pub weights: Vec<T>,
    pub units: Granularity,
    /// Shannon entropy of the weights, in nats.
    pub entropy: T,
    pub max_weight: T,
}

impl<T: Real> BatchPmf<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn uniform(n: usize, units: Granularity) -> Result<Self, ReweightError> {
        softmax_pmf(&vec![T::zero(); n], units)
    }
}

/// `p_i = exp(F_i - max F) / sum_j exp(F_j - max F)`.
pub fn softmax_pmf<T: Real>(f: &[T], units: Granularity) -> Result<BatchPmf<T>, ReweightError> {
    if f.is_empty() {
        return Err(ReweightError::EmptyBatch);
    }
    let max = f.iter().cloned().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = f.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().cloned().sum();
    let weights: Vec<T> = exps.into_iter().map(|e| e / total).collect();
    let mut entropy = T::zero();
    let mut max_weight = T::zero();
    for &p in &weights {
        if p > T::zero() {
            entropy -= p * p.ln();
        }
        max_weight = max_weight.max(p);
    }
    Ok(BatchPmf { weights, units, entropy, max_weight })
}

/// The biased update direction: the pmf-weighted sum of per-unit gradients.
/// A uniform pmf reduces this to the plain batch mean.
pub fn biased_update<T: Real>(
    per_unit_gradients: &[GradientVector<T>],
    pmf: &BatchPmf<T>,
) -> Result<GradientVector<T>, ReweightError> {
    if per_unit_gradients.len() != pmf.len() {
        return Err(ReweightError::DimensionMismatch(per_unit_gradients.len(), pmf.len()));
    }
    let dim = per_unit_gradients
        .first()
        .ok_or(ReweightError::EmptyBatch)?
        .len();
    let mut out = GradientVector::zeros(dim);
    for (g, &p) in per_unit_gradients.iter().zip(&pmf.weights) {
        if g.len() != dim {
            return Err(ReweightError::DimensionMismatch(g.len(), dim));
        }
        out.axpy(p, g);
    }
    Ok(out)
}

/// Scalar objective whose parameter gradient equals [`biased_update`] of
/// the per-unit gradients: the pmf-weighted loss with frozen weights.
pub fn weighted_objective<T: Real>(
    per_unit_losses: &[T],
    pmf: &BatchPmf<T>,
) -> Result<T, ReweightError> {
    if per_unit_losses.len() != pmf.len() {
        return Err(ReweightError::DimensionMismatch(per_unit_losses.len(), pmf.len()));
    }
    if per_unit_losses.is_empty() {
        return Err(ReweightError::EmptyBatch);
    }
    Ok(per_unit_losses
        .iter()
        .zip(&pmf.weights)
        .map(|(&l, &p)| p * l)
        .sum())
}
