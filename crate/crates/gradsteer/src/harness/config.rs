//! Run configuration: TOML-backed, strict about unknown keys, with
//! conversions into the domain types used by the pipeline.

use crate::mixgen::{ClassBank, ClassPairing, Generator, MixGenError, MixSpec, SourceClass};
use crate::model::{ModelConfig, ModelError};
use crate::optim::OptimError;
use crate::reweight::{Granularity, ReweightError, WeightingMode};
use crate::signal::SignalError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// CLI exit code: 2 for config problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) => 2,
            HarnessError::Numerical(_) => 3,
        }
    }
}

impl From<MixGenError> for HarnessError {
    fn from(e: MixGenError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<ModelError> for HarnessError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::NonFiniteGradient => HarnessError::Numerical(e.to_string()),
            other => HarnessError::Config(other.to_string()),
        }
    }
}

impl From<OptimError> for HarnessError {
    fn from(e: OptimError) -> Self {
        HarnessError::Numerical(e.to_string())
    }
}

impl From<ReweightError> for HarnessError {
    fn from(e: ReweightError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<SignalError> for HarnessError {
    fn from(e: SignalError) -> Self {
        HarnessError::Numerical(e.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub optim: OptimSection,
    pub reweight: ReweightSection,
    pub run: RunSection,
    pub eval: EvalSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSection::default(),
            model: ModelSection::default(),
            optim: OptimSection::default(),
            reweight: ReweightSection::default(),
            run: RunSection::default(),
            eval: EvalSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub n_slots: usize,
    pub segment_len: usize,
    pub snr_range_db: (f64, f64),
    pub sample_rate: u32,
    pub pairing: PairingConfig,
    pub classes: ClassesConfig,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            n_slots: 2,
            segment_len: 2048,
            snr_range_db: (-30.0, 30.0),
            sample_rate: 8000,
            pairing: PairingConfig::Distinct,
            classes: ClassesConfig::Default,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum PairingConfig {
    Distinct,
    Any,
    FixedPair(u32, u32),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum ClassesConfig {
    /// The four built-in synthetic classes.
    Default,
    Custom(Vec<ClassConfig>),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ClassConfig {
    pub id: u32,
    pub name: String,
    #[serde(flatten)]
    pub kind: ClassKind,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ClassKind {
    Tonal { harmonics: usize, f0_hz: (f64, f64) },
    NoiseBand { low_hz: f64, high_hz: f64 },
    Chirp { f0_hz: (f64, f64), f1_hz: (f64, f64) },
    AmMod { carrier_hz: (f64, f64), mod_rate_hz: (f64, f64) },
    WavPool { dir: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub enc_kernel: usize,
    pub enc_stride: usize,
    pub n_bases: usize,
    pub n_blocks: usize,
    pub hidden: usize,
    pub cap_db: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            enc_kernel: m.enc_kernel,
            enc_stride: m.enc_stride,
            n_bases: m.n_bases,
            n_blocks: m.n_blocks,
            hidden: m.hidden,
            cap_db: m.cap_db,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OptimSection {
    pub lr: f64,
    pub clip_norm: f64,
}

impl Default for OptimSection {
    fn default() -> Self {
        Self { lr: 0.001, clip_norm: 5.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ReweightSection {
    pub mode: ModeConfig,
}

impl Default for ReweightSection {
    fn default() -> Self {
        Self { mode: ModeConfig::Uniform }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModeConfig {
    Uniform,
    Robust {
        alpha: f64,
    },
    Curriculum {
        #[serde(default = "default_curriculum_a")]
        a: f64,
        #[serde(default = "default_curriculum_b")]
        b: f64,
        #[serde(default)]
        per_step: bool,
    },
    ClassBias {
        /// Keys are class ids; TOML map keys are strings.
        gamma: BTreeMap<String, f64>,
        #[serde(default = "default_granularity")]
        granularity: GranularityConfig,
    },
}

fn default_curriculum_a() -> f64 {
    10.0
}

fn default_curriculum_b() -> f64 {
    0.5
}

fn default_granularity() -> GranularityConfig {
    GranularityConfig::PerSource
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum GranularityConfig {
    PerExample,
    PerSource,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub eval_every: usize,
    pub out_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            epochs: 30,
            batches_per_epoch: 100,
            batch_size: 16,
            seed: 0,
            eval_every: 1,
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub n_val: usize,
    pub n_test: usize,
    pub quantiles: Vec<f64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            n_val: 256,
            n_test: 512,
            quantiles: vec![1.0, 5.0, 10.0, 25.0, 50.0, 75.0, 90.0, 95.0, 99.0],
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let err = |msg: String| Err(HarnessError::Config(msg));
        if self.run.batch_size < 2 {
            return err("batch_size must be >= 2 (reweighting over one example is vacuous)".into());
        }
        if self.data.snr_range_db.0 > self.data.snr_range_db.1 {
            return err("snr_range_db: lo > hi".into());
        }
        if self.data.segment_len == 0 {
            return err("segment_len must be positive".into());
        }
        if self.data.segment_len < self.model.enc_kernel {
            return err("segment_len shorter than encoder kernel".into());
        }
        if self.model.enc_stride > self.model.enc_kernel {
            return err("enc_stride must not exceed enc_kernel".into());
        }
        if self
            .eval
            .quantiles
            .iter()
            .any(|&q| !(0.0..100.0).contains(&q) || q == 0.0)
        {
            return err("quantiles must lie strictly inside (0, 100)".into());
        }
        if let ModeConfig::Robust { alpha } = &self.reweight.mode {
            if *alpha < 0.0 {
                return err("robust alpha must be >= 0".into());
            }
        }
        if let ModeConfig::Curriculum { a, b, .. } = &self.reweight.mode {
            if *a <= 0.0 || *b < 0.0 {
                return err("curriculum requires a > 0 and b >= 0".into());
            }
        }
        if self.data.n_slots < 2 {
            return err("n_slots must be >= 2".into());
        }
        if let PairingConfig::FixedPair(_, _) = self.data.pairing {
            if self.data.n_slots != 2 {
                return err("fixed-pair mixtures require exactly 2 slots".into());
            }
        }
        if let ModeConfig::ClassBias { .. } = &self.reweight.mode {
            self.parsed_gamma()?;
        }
        Ok(())
    }

    fn parsed_gamma(&self) -> Result<BTreeMap<u32, f64>, HarnessError> {
        match &self.reweight.mode {
            ModeConfig::ClassBias { gamma, .. } => gamma
                .iter()
                .map(|(k, &v)| {
                    k.parse::<u32>()
                        .map(|id| (id, v))
                        .map_err(|_| HarnessError::Config(format!("gamma key '{k}' is not a class id")))
                })
                .collect(),
            _ => Ok(BTreeMap::new()),
        }
    }

    pub fn mix_spec(&self) -> MixSpec {
        MixSpec {
            n_slots: self.data.n_slots,
            segment_len: self.data.segment_len,
            snr_range_db: self.data.snr_range_db,
            class_pairing: match self.data.pairing {
                PairingConfig::Distinct => ClassPairing::DistinctClasses,
                PairingConfig::Any => ClassPairing::AnyClasses,
                PairingConfig::FixedPair(a, b) => ClassPairing::FixedPair(a, b),
            },
            sample_rate: self.data.sample_rate,
        }
    }

    pub fn class_bank(&self) -> Result<ClassBank, HarnessError> {
        match &self.data.classes {
            ClassesConfig::Default => Ok(ClassBank::default_bank()),
            ClassesConfig::Custom(list) => {
                let classes = list
                    .iter()
                    .map(|c| self.build_class(c))
                    .collect::<Result<Vec<_>, _>>()?;
                let mut ids: Vec<u32> = classes.iter().map(|c| c.id).collect();
                ids.sort_unstable();
                ids.dedup();
                if ids.len() != classes.len() {
                    return Err(HarnessError::Config("duplicate class ids".into()));
                }
                Ok(ClassBank::new(classes))
            }
        }
    }

    fn build_class(&self, c: &ClassConfig) -> Result<SourceClass, HarnessError> {
        let nyquist = self.data.sample_rate as f64 / 2.0;
        let check = |f: f64| -> Result<(), HarnessError> {
            if f <= 0.0 || f >= nyquist {
                Err(HarnessError::Config(format!(
                    "class '{}': frequency {f} outside (0, {nyquist})",
                    c.name
                )))
            } else {
                Ok(())
            }
        };
        let generator = match &c.kind {
            ClassKind::Tonal { harmonics, f0_hz } => {
                check(f0_hz.0)?;
                check(f0_hz.1 * *harmonics as f64)?;
                Generator::Tonal { harmonics: *harmonics, f0_hz: *f0_hz }
            }
            ClassKind::NoiseBand { low_hz, high_hz } => {
                check(*low_hz)?;
                check(*high_hz)?;
                Generator::NoiseBand { low_hz: *low_hz, high_hz: *high_hz }
            }
            ClassKind::Chirp { f0_hz, f1_hz } => {
                check(f0_hz.0)?;
                check(f1_hz.1)?;
                Generator::Chirp { f0_hz: *f0_hz, f1_hz: *f1_hz }
            }
            ClassKind::AmMod { carrier_hz, mod_rate_hz } => {
                check(carrier_hz.1)?;
                Generator::AmMod { carrier_hz: *carrier_hz, mod_rate_hz: *mod_rate_hz }
            }
            ClassKind::WavPool { dir } => {
                return crate::mixgen::load_wav_pool(c.id, &c.name, dir, self.data.sample_rate)
                    .map_err(Into::into);
            }
        };
        Ok(SourceClass { id: c.id, name: c.name.clone(), generator })
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            enc_kernel: self.model.enc_kernel,
            enc_stride: self.model.enc_stride,
            n_bases: self.model.n_bases,
            n_blocks: self.model.n_blocks,
            hidden: self.model.hidden,
            n_sources: self.data.n_slots,
            cap_db: self.model.cap_db,
        }
    }

    pub fn weighting_mode(&self) -> WeightingMode {
        match &self.reweight.mode {
            ModeConfig::Uniform => WeightingMode::Uniform,
            ModeConfig::Robust { alpha } => WeightingMode::Robust { alpha: *alpha },
            ModeConfig::Curriculum { a, b, per_step } => {
                WeightingMode::Curriculum { a: *a, b: *b, per_step: *per_step }
            }
            ModeConfig::ClassBias { granularity, .. } => WeightingMode::ClassBias {
                gamma: self.parsed_gamma().expect("gamma validated at load time"),
                granularity: match granularity {
                    GranularityConfig::PerExample => Granularity::PerExample,
                    GranularityConfig::PerSource => Granularity::PerSource,
                },
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "[run]\nepochs = 1\nnot_a_key = 2\n";
        let parsed: Result<ExperimentConfig, _> = toml::from_str(text);
        assert!(parsed.is_err());
    }

    #[test]
    fn batch_size_one_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.run.batch_size = 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn roundtrip_through_toml() {
        let mut cfg = ExperimentConfig::default();
        cfg.reweight.mode = ModeConfig::Robust { alpha: 0.2 };
        let text = toml::to_string(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn class_bias_mode_parses() {
        let text = r#"
[reweight.mode]
kind = "class-bias"
granularity = "per-source"

[reweight.mode.gamma]
0 = 3.0
1 = 0.0
"#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        match cfg.weighting_mode() {
            WeightingMode::ClassBias { gamma, granularity } => {
                assert_eq!(gamma.get(&0), Some(&3.0));
                assert_eq!(granularity, Granularity::PerSource);
            }
            other => panic!("unexpected mode {other:?}"),
        }
    }
}
