//! Scale-invariant SDR metrics and the permutation-invariant separation loss.
//!
//! SI-SDR is computed with the positive orientation
//! `10*log10(||rho*s||^2 / ||rho*s - e||^2)` where `rho = e's / ||s||^2`
//! projects the reference onto the estimate's scale. Values are capped at
//! `+/- cap_db` so perfect (or catastrophic) reconstructions stay finite.

use crate::real::Real;
use thiserror::Error;

/// Default cap applied to SI-SDR values, in dB.
pub const DEFAULT_CAP_DB: f64 = 60.0;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("reference signal has (near-)zero energy")]
    ZeroReference,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("all sources in the set are inactive")]
    AllSourcesInactive,
    #[error("waveform is empty or contains non-finite samples")]
    InvalidWaveform,
    #[error("source set has mismatched lengths or activity flags")]
    InvalidSourceSet,
}

/// Single-channel waveform with amplitude samples and a sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<T: Real> {
    pub samples: Vec<T>,
    pub sample_rate: u32,
}

impl<T: Real> Waveform<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self, SignalError> {
        if samples.is_empty() || samples.iter().any(|s| !s.is_finite()) {
            return Err(SignalError::InvalidWaveform);
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Self { samples: vec![T::zero(); len], sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> T {
        self.samples.iter().map(|&s| s * s).sum()
    }

    pub fn rms(&self) -> T {
        (self.energy() / T::from_f64c(self.len() as f64)).sqrt()
    }
}

/// A set of N equal-length sources with per-slot activity flags.
/// Inactive slots hold all-zero waveforms.
#[derive(Debug, Clone)]
pub struct SourceSet<T: Real> {
    pub sources: Vec<Waveform<T>>,
    pub active: Vec<bool>,
}

impl<T: Real> SourceSet<T> {
    pub fn new(sources: Vec<Waveform<T>>, active: Vec<bool>) -> Result<Self, SignalError> {
        if sources.is_empty() || sources.len() != active.len() {
            return Err(SignalError::InvalidSourceSet);
        }
        let len = sources[0].len();
        if sources.iter().any(|s| s.len() != len) {
            return Err(SignalError::InvalidSourceSet);
        }
        if !active.iter().any(|&a| a) {
            return Err(SignalError::AllSourcesInactive);
        }
        Ok(Self { sources, active })
    }

    /// All slots active.
    pub fn all_active(sources: Vec<Waveform<T>>) -> Result<Self, SignalError> {
        let active = vec![true; sources.len()];
        Self::new(sources, active)
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn n_samples(&self) -> usize {
        self.sources[0].len()
    }
}

/// Outcome of the permutation search: the best source-to-reference
/// assignment and its per-source SI-SDR values.
#[derive(Debug, Clone)]
pub struct PitResult<T: Real> {
    /// `permutation[j]` is the estimate index matched to reference `j`.
    pub permutation: Vec<usize>,
    /// Per-reference SI-SDR in dB; `None` on inactive slots.
    pub per_source_si_sdr: Vec<Option<T>>,
    /// Arithmetic mean over active slots.
    pub mean_si_sdr: T,
}

fn energy_floor<T: Real>(len: usize) -> T {
    T::from_f64c(1e-12 * len as f64)
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// SI-SDR of `estimate` against `reference` at the default +/-60 dB cap.
pub fn si_sdr<T: Real>(estimate: &Waveform<T>, reference: &Waveform<T>) -> Result<T, SignalError> {
    si_sdr_capped(estimate, reference, T::from_f64c(DEFAULT_CAP_DB))
}

pub fn si_sdr_capped<T: Real>(
    estimate: &Waveform<T>,
    reference: &Waveform<T>,
    cap_db: T,
) -> Result<T, SignalError> {
    Ok(si_sdr_and_grad(estimate, reference, cap_db)?.0)
}

/// SI-SDR value together with its gradient w.r.t. the estimate samples.
/// The gradient is zero wherever the value is clamped at the cap.
pub fn si_sdr_and_grad<T: Real>(
    estimate: &Waveform<T>,
    reference: &Waveform<T>,
    cap_db: T,
) -> Result<(T, Vec<T>), SignalError> {
    if estimate.len() != reference.len() {
        return Err(SignalError::LengthMismatch(estimate.len(), reference.len()));
    }
    let n = reference.len();
    let ref_energy = reference.energy();
    if ref_energy < energy_floor::<T>(n) {
        return Err(SignalError::ZeroReference);
    }

    let e = &estimate.samples;
    let s = &reference.samples;
    let rho = dot(e, s) / ref_energy;
    let target_energy = rho * rho * ref_energy; // ||rho*s||^2
    let err_energy: T = e
        .iter()
        .zip(s)
        .map(|(&ei, &si)| {
            let d = rho * si - ei;
            d * d
        })
        .sum();

    let ten = T::from_f64c(10.0);
    let raw = if target_energy <= T::zero() {
        T::neg_infinity()
    } else if err_energy <= T::zero() {
        T::infinity()
    } else {
        ten * (target_energy / err_energy).log10()
    };

    if raw >= cap_db {
        return Ok((cap_db, vec![T::zero(); n]));
    }
    if raw <= -cap_db {
        return Ok((-cap_db, vec![T::zero(); n]));
    }

    // d SI/d e = (20/ln10) * (rho*s/||rho*s||^2 + err/||err||^2),
    // using err . s = 0 (the projection residual is orthogonal to s).
    let scale = T::from_f64c(20.0 / std::f64::consts::LN_10);
    let grad = e
        .iter()
        .zip(s)
        .map(|(&ei, &si)| {
            let err_i = rho * si - ei;
            scale * (rho * si / target_energy + err_i / err_energy)
        })
        .collect();
    Ok((raw, grad))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    fn heap(k: usize, items: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(items.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, items, out);
            if k % 2 == 0 {
                items.swap(i, k - 1);
            } else {
                items.swap(0, k - 1);
            }
        }
    }
    heap(n, &mut items, &mut out);
    out
}

/// Exhaustive permutation-invariant SI-SDR: picks the estimate-to-reference
/// assignment maximizing the mean SI-SDR over active references.
pub fn pit_si_sdr<T: Real>(
    estimates: &SourceSet<T>,
    references: &SourceSet<T>,
) -> Result<PitResult<T>, SignalError> {
    pit_si_sdr_capped(estimates, references, T::from_f64c(DEFAULT_CAP_DB))
}

pub fn pit_si_sdr_capped<T: Real>(
    estimates: &SourceSet<T>,
    references: &SourceSet<T>,
    cap_db: T,
) -> Result<PitResult<T>, SignalError> {
    let n = references.n_sources();
    if estimates.n_sources() != n {
        return Err(SignalError::LengthMismatch(estimates.n_sources(), n));
    }
    if estimates.n_samples() != references.n_samples() {
        return Err(SignalError::LengthMismatch(
            estimates.n_samples(),
            references.n_samples(),
        ));
    }
    let active: Vec<usize> = (0..n).filter(|&j| references.active[j]).collect();
    if active.is_empty() {
        return Err(SignalError::AllSourcesInactive);
    }

    // Pairwise SI-SDR table: score[j][i] = si_sdr(estimate i, reference j).
    let mut score = vec![vec![T::zero(); n]; n];
    for &j in &active {
        for i in 0..n {
            score[j][i] = si_sdr_capped(&estimates.sources[i], &references.sources[j], cap_db)?;
        }
    }

    let count = T::from_f64c(active.len() as f64);
    let mut best: Option<(T, Vec<usize>)> = None;
    for perm in permutations(n) {
        let mean = active.iter().map(|&j| score[j][perm[j]]).sum::<T>() / count;
        if best.as_ref().map_or(true, |(m, _)| mean > *m) {
            best = Some((mean, perm));
        }
    }
    let (mean, perm) = best.expect("at least one permutation");
    let per_source = (0..n)
        .map(|j| references.active[j].then(|| score[j][perm[j]]))
        .collect();
    Ok(PitResult {
        permutation: perm,
        per_source_si_sdr: per_source,
        mean_si_sdr: mean,
    })
}

/// Per-source SI-SDR improvement terms under the PIT-optimal permutation:
/// `(pit, baselines)` where `baselines[j] = si_sdr(mixture, reference_j)`.
pub fn pit_with_baseline<T: Real>(
    estimates: &SourceSet<T>,
    references: &SourceSet<T>,
    mixture: &Waveform<T>,
    cap_db: T,
) -> Result<(PitResult<T>, Vec<Option<T>>), SignalError> {
    let pit = pit_si_sdr_capped(estimates, references, cap_db)?;
    let baselines = references
        .sources
        .iter()
        .zip(&references.active)
        .map(|(s, &a)| {
            if a {
                si_sdr_capped(mixture, s, cap_db).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((pit, baselines))
}

/// Mean SI-SDR improvement over active sources, in dB.
pub fn si_sdri<T: Real>(
    estimates: &SourceSet<T>,
    references: &SourceSet<T>,
    mixture: &Waveform<T>,
) -> Result<T, SignalError> {
    si_sdri_capped(estimates, references, mixture, T::from_f64c(DEFAULT_CAP_DB))
}

pub fn si_sdri_capped<T: Real>(
    estimates: &SourceSet<T>,
    references: &SourceSet<T>,
    mixture: &Waveform<T>,
    cap_db: T,
) -> Result<T, SignalError> {
    let (pit, baselines) = pit_with_baseline(estimates, references, mixture, cap_db)?;
    let mut sum = T::zero();
    let mut count = T::zero();
    for (sep, base) in pit.per_source_si_sdr.iter().zip(&baselines) {
        if let (Some(sep), Some(base)) = (sep, base) {
            sum += *sep - *base;
            count += T::one();
        }
    }
    Ok(sum / count)
}

/// Per-example training loss: the negative SI-SDR improvement.
pub fn separation_loss<T: Real>(
    estimates: &SourceSet<T>,
    references: &SourceSet<T>,
    mixture: &Waveform<T>,
) -> Result<T, SignalError> {
    Ok(-si_sdri(estimates, references, mixture)?)
}
