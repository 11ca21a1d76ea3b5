//! Experiment orchestration: configuration, the training loop, evaluation
//! with quantile statistics, the named experiment recipes, and CSV/SVG
//! report emission.

pub mod checkpoint;
pub mod config;
pub mod metrics;
pub mod plot;
pub mod recipes;
pub mod train;

pub use config::{ExperimentConfig, HarnessError};
pub use metrics::MetricsReport;
pub use train::{evaluate, train, RunArtifacts};
