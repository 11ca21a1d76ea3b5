//! The training loop (batch -> losses -> pmf -> biased gradient -> clip ->
//! Adam) and fixed-set evaluation. Everything emitted is a pure function
//! of (config, seed).

use crate::harness::checkpoint::save_checkpoint;
use crate::harness::config::{ExperimentConfig, HarnessError};
use crate::harness::metrics::{MetricsReport, METRICS_CSV_HEADER};
use crate::mixgen::{make_batch, ClassBank, MixSpec, WaveformBatch};
use crate::model::{backward_batch, forward, forward_batch, init_params, ModelConfig};
use crate::optim::{adam_step, clip_grad_norm, AdamState};
use crate::params::SeparatorParams;
use crate::reweight::{softmax_pmf, weighting_values, EpochClock, WeightingMode};
use crate::signal::pit_with_baseline;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

/// Reserved stream coordinates so evaluation mixtures never collide with
/// training epochs.
const VAL_EPOCH_TAG: u64 = u64::MAX;
const TEST_EPOCH_TAG: u64 = u64::MAX - 1;

/// Number of trailing epochs averaged into the final test table.
const FINAL_TABLE_EPOCHS: usize = 5;

/// Elementwise average of the trailing test evaluations.
#[derive(Debug, Clone)]
pub struct TestSummary {
    pub mean: f64,
    pub std: f64,
    pub quantiles: Vec<(f64, f64)>,
    pub per_class: BTreeMap<u32, f64>,
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub final_params: SeparatorParams<f64>,
    /// (epoch, validation report); epoch 0 is the initial evaluation.
    pub val_series: Vec<(usize, MetricsReport)>,
    /// Test reports from the trailing epochs that enter the final table.
    pub test_reports: Vec<(usize, MetricsReport)>,
    pub final_test: TestSummary,
    /// Per-example test SI-SDRi at the final parameters.
    pub final_test_values: Vec<f64>,
}

pub fn make_eval_set(
    spec: &MixSpec,
    bank: &ClassBank,
    n: usize,
    seed: u64,
    test: bool,
) -> Result<WaveformBatch<f64>, HarnessError> {
    let tag = if test { TEST_EPOCH_TAG } else { VAL_EPOCH_TAG };
    Ok(make_batch(spec, bank, n, tag, 0, seed)?)
}

/// Evaluate SI-SDRi on a fixed set: per-example values for the overall
/// statistics, per-source values for the per-class means.
pub fn evaluate(
    model_cfg: &ModelConfig,
    params: &SeparatorParams<f64>,
    eval_set: &WaveformBatch<f64>,
    quantile_levels: &[f64],
) -> Result<(MetricsReport, Vec<f64>), HarnessError> {
    let cap = model_cfg.cap_db;
    let mut per_example = Vec::with_capacity(eval_set.len());
    let mut per_source = Vec::new();
    for ex in &eval_set.examples {
        let estimates = forward(model_cfg, params, &ex.mixture)?;
        let (pit, baselines) = pit_with_baseline(&estimates, &ex.sources, &ex.mixture, cap)?;
        let mut sum = 0.0;
        let mut count = 0usize;
        for j in 0..ex.sources.n_sources() {
            if let (Some(sep), Some(base)) = (pit.per_source_si_sdr[j], baselines[j]) {
                let imp = sep - base;
                per_source.push((ex.classes[j], imp));
                sum += imp;
                count += 1;
            }
        }
        per_example.push(sum / count as f64);
    }
    let report = MetricsReport::from_values(&per_example, &per_source, quantile_levels);
    Ok((report, per_example))
}

fn summarize_tests(reports: &[(usize, MetricsReport)]) -> TestSummary {
    let n = reports.len() as f64;
    let mean = reports.iter().map(|(_, r)| r.mean).sum::<f64>() / n;
    let std = reports.iter().map(|(_, r)| r.std).sum::<f64>() / n;
    let levels: Vec<f64> = reports[0].1.quantiles.iter().map(|(q, _)| *q).collect();
    let quantiles = levels
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let v = reports.iter().map(|(_, r)| r.quantiles[i].1).sum::<f64>() / n;
            (q, v)
        })
        .collect();
    let mut per_class: BTreeMap<u32, f64> = BTreeMap::new();
    for (_, r) in reports {
        for (&c, &(m, _)) in &r.per_class {
            *per_class.entry(c).or_insert(0.0) += m / n;
        }
    }
    TestSummary { mean, std, quantiles, per_class }
}

pub fn train(config: &ExperimentConfig) -> Result<RunArtifacts, HarnessError> {
    config.validate()?;
    let spec = config.mix_spec();
    let bank = config.class_bank()?;
    let model_cfg = config.model_config();
    let mode = config.weighting_mode();
    let granularity = mode.granularity();
    let seed = config.run.seed;
    let out_dir = config.run.out_dir.clone();
    std::fs::create_dir_all(&out_dir)?;

    // gamma must cover every class that can occur
    if let WeightingMode::ClassBias { ref gamma, .. } = mode {
        for class in &bank.classes {
            if !gamma.contains_key(&class.id) {
                return Err(HarnessError::Config(format!(
                    "class-bias gamma missing class id {} ({})",
                    class.id, class.name
                )));
            }
        }
    }

    let val_set = make_eval_set(&spec, &bank, config.eval.n_val, seed, false)?;
    let test_set = make_eval_set(&spec, &bank, config.eval.n_test, seed, true)?;

    let mut params: SeparatorParams<f64> = init_params(&model_cfg, seed);
    let mut adam: AdamState<f64> =
        AdamState::new(params.len(), config.optim.lr, config.optim.clip_norm);

    let mut metrics_csv = String::from(METRICS_CSV_HEADER);
    metrics_csv.push('\n');
    let mut convergence_csv = String::from("epoch,mean_sisdri,std_sisdri\n");
    let mut weights_csv = String::from("epoch,step,units,entropy,max_weight,min_f,max_f\n");

    let mut val_series = Vec::new();
    let mut test_reports = Vec::new();
    let mut final_test_values = Vec::new();

    // initial evaluation (epoch 0)
    let (val0, _) = evaluate(&model_cfg, &params, &val_set, &config.eval.quantiles)?;
    let _ = writeln!(metrics_csv, "{}", val0.csv_row(0, "val"));
    let _ = writeln!(convergence_csv, "0,{:.6},{:.6}", val0.mean, val0.std);
    val_series.push((0, val0));

    let epochs = config.run.epochs;
    if epochs == 0 {
        let (test0, values) = evaluate(&model_cfg, &params, &test_set, &config.eval.quantiles)?;
        let _ = writeln!(metrics_csv, "{}", test0.csv_row(0, "test"));
        test_reports.push((0, test0));
        final_test_values = values;
    }

    let mut step: u64 = 0;
    for epoch in 0..epochs {
        for batch_index in 0..config.run.batches_per_epoch {
            let batch = make_batch::<f64>(
                &spec,
                &bank,
                config.run.batch_size,
                epoch as u64,
                batch_index as u64,
                seed,
            )?;
            let fwd = forward_batch(&model_cfg, &params, &batch, granularity)?;
            let clock = EpochClock { epoch: epoch as u64, step };
            let f = weighting_values(&mode, &fwd.per_unit_losses, &fwd.per_unit_classes, clock)?;
            let pmf = softmax_pmf(&f, granularity)?;
            let (min_f, max_f) = f
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            let _ = writeln!(
                weights_csv,
                "{epoch},{step},{},{:.6},{:.6},{:.6},{:.6}",
                pmf.len(),
                pmf.entropy,
                pmf.max_weight,
                min_f,
                max_f
            );
            let grad = match backward_batch(&model_cfg, &params, &fwd, &pmf) {
                Ok(g) => g,
                Err(e) => {
                    let diag = format!(
                        "aborted at epoch {epoch} step {step}: {e}\nlosses: {:?}\n",
                        fwd.per_unit_losses
                    );
                    std::fs::write(out_dir.join("failure.txt"), &diag)?;
                    return Err(e.into());
                }
            };
            let clipped = clip_grad_norm(&grad, adam.clip_norm)?;
            let (new_params, new_adam) = adam_step(&params, &adam, &clipped)?;
            params = new_params;
            adam = new_adam;
            step += 1;
        }

        let completed = epoch + 1;
        let is_last = completed == epochs;
        if completed % config.run.eval_every.max(1) == 0 || is_last {
            let (report, _) = evaluate(&model_cfg, &params, &val_set, &config.eval.quantiles)?;
            let _ = writeln!(metrics_csv, "{}", report.csv_row(completed, "val"));
            let _ = writeln!(convergence_csv, "{completed},{:.6},{:.6}", report.mean, report.std);
            val_series.push((completed, report));
        }
        if completed + FINAL_TABLE_EPOCHS > epochs {
            let (report, values) =
                evaluate(&model_cfg, &params, &test_set, &config.eval.quantiles)?;
            let _ = writeln!(metrics_csv, "{}", report.csv_row(completed, "test"));
            test_reports.push((completed, report));
            if is_last {
                final_test_values = values;
            }
        }
    }

    let final_test = summarize_tests(&test_reports);

    std::fs::write(out_dir.join("metrics.csv"), &metrics_csv)?;
    std::fs::write(out_dir.join("convergence.csv"), &convergence_csv)?;
    std::fs::write(out_dir.join("weights_log.csv"), &weights_csv)?;
    let mut values_csv = String::from("example,sisdri\n");
    for (i, v) in final_test_values.iter().enumerate() {
        let _ = writeln!(values_csv, "{i},{v:.6}");
    }
    std::fs::write(out_dir.join("test_values.csv"), &values_csv)?;
    let config_text = toml::to_string_pretty(config)
        .map_err(|e| HarnessError::Config(format!("serializing config: {e}")))?;
    std::fs::write(out_dir.join("config.toml"), config_text)?;
    save_checkpoint(
        &out_dir.join("checkpoint.ckpt"),
        &model_cfg,
        &params,
        Some(&adam),
        seed,
        epochs,
    )?;

    Ok(RunArtifacts {
        out_dir,
        final_params: params,
        val_series,
        test_reports,
        final_test,
        final_test_values,
    })
}

/// Quantile level lookup on a [`TestSummary`].
impl TestSummary {
    pub fn quantile(&self, level: f64) -> f64 {
        self.quantiles
            .iter()
            .find(|(q, _)| (*q - level).abs() < 1e-9)
            .map(|(_, v)| *v)
            .unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ModeConfig;

    fn tiny_run_config(dir: &std::path::Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.data.segment_len = 128;
        cfg.model.enc_kernel = 8;
        cfg.model.enc_stride = 4;
        cfg.model.n_bases = 8;
        cfg.model.n_blocks = 1;
        cfg.model.hidden = 8;
        cfg.run.epochs = 1;
        cfg.run.batches_per_epoch = 2;
        cfg.run.batch_size = 4;
        cfg.eval.n_val = 8;
        cfg.eval.n_test = 8;
        cfg.run.out_dir = dir.to_path_buf();
        cfg
    }

    #[test]
    fn zero_epochs_emits_initial_evaluation_only() {
        let dir = std::env::temp_dir().join("gradsteer_train_zero_epochs");
        let _ = std::fs::remove_dir_all(&dir);
        let mut cfg = tiny_run_config(&dir);
        cfg.run.epochs = 0;
        let run = train(&cfg).unwrap();
        assert_eq!(run.val_series.len(), 1);
        assert_eq!(run.test_reports.len(), 1);
        let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
        assert_eq!(metrics.lines().count(), 3); // header + val + test
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir = std::env::temp_dir().join("gradsteer_train_determinism");
        let _ = std::fs::remove_dir_all(&dir);
        let cfg = tiny_run_config(&dir);
        train(&cfg).unwrap();
        let first = std::fs::read(dir.join("metrics.csv")).unwrap();
        train(&cfg).unwrap();
        let second = std::fs::read(dir.join("metrics.csv")).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn uniform_and_robust_alpha_zero_bit_identical() {
        let dir_a = std::env::temp_dir().join("gradsteer_train_uniform");
        let dir_b = std::env::temp_dir().join("gradsteer_train_alpha0");
        let _ = std::fs::remove_dir_all(&dir_a);
        let _ = std::fs::remove_dir_all(&dir_b);
        let mut cfg_a = tiny_run_config(&dir_a);
        cfg_a.reweight.mode = ModeConfig::Uniform;
        let mut cfg_b = tiny_run_config(&dir_b);
        cfg_b.reweight.mode = ModeConfig::Robust { alpha: 0.0 };
        let run_a = train(&cfg_a).unwrap();
        let run_b = train(&cfg_b).unwrap();
        assert_eq!(run_a.final_params.values, run_b.final_params.values);
    }
}
