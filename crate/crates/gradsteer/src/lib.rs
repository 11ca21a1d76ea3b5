//! Gradient-reweighted training laboratory for toy-scale source
//! separation. A softmax pmf over the units of each batch reshapes the
//! update direction, letting a run trade average accuracy for robustness,
//! faster early convergence, or accuracy on chosen sound classes.

pub mod harness;
pub mod mixgen;
pub mod model;
pub mod optim;
pub mod params;
pub mod real;
pub mod reweight;
pub mod signal;

pub use real::Real;

/// Double-precision aliases used by the CLI and the experiment recipes.
pub type Waveform64 = signal::Waveform<f64>;
pub type SourceSet64 = signal::SourceSet<f64>;
pub type WaveformBatch64 = mixgen::WaveformBatch<f64>;
pub type SeparatorParams64 = params::SeparatorParams<f64>;
pub type GradientVector64 = params::GradientVector<f64>;
pub type BatchPmf64 = reweight::BatchPmf<f64>;
pub type AdamState64 = optim::AdamState<f64>;
