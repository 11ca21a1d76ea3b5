//! The three named experiments: robustness sweep over alpha, curriculum
//! vs baseline convergence, and class-biased training on fixed pairs.
//! Independent (parameter, seed) runs execute in parallel; results are
//! collected in a fixed order so reports stay deterministic.

use crate::harness::config::{ExperimentConfig, GranularityConfig, HarnessError, ModeConfig};
use crate::harness::plot::{histogram_svg, line_band_svg};
use crate::harness::train::{train, RunArtifacts, TestSummary};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Default alpha grid, mirroring the robustness sweep rows.
pub const DEFAULT_ALPHAS: [f64; 4] = [0.0, 1.0 / 15.0, 1.0 / 10.0, 1.0 / 5.0];

#[derive(Debug)]
pub struct SweepRow {
    pub alpha: f64,
    pub seed: u64,
    pub test: TestSummary,
}

#[derive(Debug)]
pub struct RobustSweep {
    pub rows: Vec<SweepRow>,
    pub out_dir: PathBuf,
}

impl RobustSweep {
    /// Median over seeds of a per-run statistic for one alpha.
    pub fn median_over_seeds(&self, alpha: f64, stat: impl Fn(&TestSummary) -> f64) -> f64 {
        let mut values: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| (r.alpha - alpha).abs() < 1e-12)
            .map(|r| stat(&r.test))
            .collect();
        assert!(!values.is_empty(), "no runs for alpha={alpha}");
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        median_sorted(&values)
    }
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn run_variant(
    base: &ExperimentConfig,
    mode: ModeConfig,
    seed: u64,
    out_dir: PathBuf,
) -> Result<RunArtifacts, HarnessError> {
    let mut cfg = base.clone();
    cfg.reweight.mode = mode;
    cfg.run.seed = seed;
    cfg.run.out_dir = out_dir;
    train(&cfg)
}

/// One train+evaluate per (alpha, seed); emits a sweep table CSV and the
/// test SI-SDRi distribution histogram.
pub fn recipe_robust_sweep(
    base: &ExperimentConfig,
    alphas: &[f64],
    seeds: &[u64],
    out_dir: &Path,
) -> Result<RobustSweep, HarnessError> {
    assert!(!seeds.is_empty(), "sweep needs at least one seed");
    std::fs::create_dir_all(out_dir)?;
    let combos: Vec<(f64, u64)> = alphas
        .iter()
        .flat_map(|&a| seeds.iter().map(move |&s| (a, s)))
        .collect();
    let runs: Vec<Result<(f64, u64, RunArtifacts), HarnessError>> = combos
        .par_iter()
        .map(|&(alpha, seed)| {
            let dir = out_dir.join(format!("alpha_{alpha:.4}_seed_{seed}"));
            run_variant(base, ModeConfig::Robust { alpha }, seed, dir)
                .map(|r| (alpha, seed, r))
        })
        .collect();

    let mut rows = Vec::new();
    let mut histogram: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut csv = String::from(
        "alpha,seed,mean_sisdri,std_sisdri,q01,q05,q10,q25,q50,q75,q90,q95,q99\n",
    );
    for run in runs {
        let (alpha, seed, artifacts) = run?;
        let t = &artifacts.final_test;
        let _ = write!(csv, "{alpha:.6},{seed},{:.6},{:.6}", t.mean, t.std);
        for (_, v) in &t.quantiles {
            let _ = write!(csv, ",{v:.6}");
        }
        csv.push('\n');
        histogram
            .entry(format!("alpha={alpha:.4}"))
            .or_default()
            .extend(&artifacts.final_test_values);
        rows.push(SweepRow { alpha, seed, test: artifacts.final_test });
    }
    std::fs::write(out_dir.join("robust_sweep.csv"), &csv)?;

    let sweep = RobustSweep { rows, out_dir: out_dir.to_path_buf() };
    let mut summary = String::from("alpha,median_mean_sisdri,median_q05,median_q01\n");
    for &alpha in alphas {
        let m = sweep.median_over_seeds(alpha, |t| t.mean);
        let q05 = sweep.median_over_seeds(alpha, |t| t.quantile(5.0));
        let q01 = sweep.median_over_seeds(alpha, |t| t.quantile(1.0));
        let _ = writeln!(summary, "{alpha:.6},{m:.6},{q05:.6},{q01:.6}");
    }
    std::fs::write(out_dir.join("robust_summary.csv"), &summary)?;

    let series: Vec<(String, Vec<f64>)> = histogram.into_iter().collect();
    let svg = histogram_svg("Distribution of test SI-SDRi (dB)", "SI-SDRi (dB)", &series);
    std::fs::write(out_dir.join("robust_hist.svg"), svg)?;

    Ok(sweep)
}

#[derive(Debug)]
pub struct CurriculumArm {
    pub seed: u64,
    /// (epoch, mean validation SI-SDRi) series.
    pub series: Vec<(usize, f64)>,
}

#[derive(Debug)]
pub struct CurriculumComparison {
    pub curriculum: Vec<CurriculumArm>,
    pub baseline: Vec<CurriculumArm>,
    pub out_dir: PathBuf,
}

/// Curriculum schedule vs uniform baseline, both arms sharing eval sets
/// per seed. Emits a per-epoch mean +/- std convergence CSV and plot.
pub fn recipe_curriculum(
    base: &ExperimentConfig,
    seeds: &[u64],
    out_dir: &Path,
) -> Result<CurriculumComparison, HarnessError> {
    assert!(seeds.len() >= 2, "convergence comparison needs >= 2 seeds");
    std::fs::create_dir_all(out_dir)?;
    let jobs: Vec<(bool, u64)> = seeds
        .iter()
        .flat_map(|&s| [(true, s), (false, s)])
        .collect();
    let runs: Vec<Result<(bool, u64, RunArtifacts), HarnessError>> = jobs
        .par_iter()
        .map(|&(curriculum, seed)| {
            let (mode, tag) = if curriculum {
                (
                    ModeConfig::Curriculum { a: 10.0, b: 0.5, per_step: false },
                    "curriculum",
                )
            } else {
                (ModeConfig::Uniform, "baseline")
            };
            let dir = out_dir.join(format!("{tag}_seed_{seed}"));
            run_variant(base, mode, seed, dir).map(|r| (curriculum, seed, r))
        })
        .collect();

    let mut curriculum_arms = Vec::new();
    let mut baseline_arms = Vec::new();
    for run in runs {
        let (is_curriculum, seed, artifacts) = run?;
        let series = artifacts
            .val_series
            .iter()
            .map(|(e, r)| (*e, r.mean))
            .collect();
        let arm = CurriculumArm { seed, series };
        if is_curriculum {
            curriculum_arms.push(arm);
        } else {
            baseline_arms.push(arm);
        }
    }

    let mut csv = String::from("epoch,arm,mean_sisdri,std_sisdri\n");
    let mut plot_series = Vec::new();
    for (label, arms) in [("curriculum", &curriculum_arms), ("baseline", &baseline_arms)] {
        let epochs: Vec<usize> = arms[0].series.iter().map(|(e, _)| *e).collect();
        let mut pts = Vec::new();
        for (i, &epoch) in epochs.iter().enumerate() {
            let values: Vec<f64> = arms.iter().map(|a| a.series[i].1).collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
            let _ = writeln!(csv, "{epoch},{label},{mean:.6},{:.6}", var.sqrt());
            pts.push((epoch as f64, mean, var.sqrt()));
        }
        plot_series.push((label.to_string(), pts));
    }
    std::fs::write(out_dir.join("curriculum.csv"), &csv)?;
    let svg = line_band_svg(
        "Mean validation SI-SDRi across epochs",
        "epoch",
        "SI-SDRi (dB)",
        &plot_series,
    );
    std::fs::write(out_dir.join("curriculum.svg"), svg)?;

    Ok(CurriculumComparison {
        curriculum: curriculum_arms,
        baseline: baseline_arms,
        out_dir: out_dir.to_path_buf(),
    })
}

#[derive(Debug)]
pub struct ClassBiasRow {
    pub gamma: (f64, f64),
    pub seed: u64,
    /// class id -> mean test SI-SDRi
    pub per_class: BTreeMap<u32, f64>,
    pub combined: f64,
}

#[derive(Debug)]
pub struct ClassBiasTable {
    pub rows: Vec<ClassBiasRow>,
    pub class_ids: (u32, u32),
    pub out_dir: PathBuf,
}

impl ClassBiasTable {
    pub fn rows_for(&self, gamma: (f64, f64)) -> impl Iterator<Item = &ClassBiasRow> {
        self.rows.iter().filter(move |r| {
            (r.gamma.0 - gamma.0).abs() < 1e-12 && (r.gamma.1 - gamma.1).abs() < 1e-12
        })
    }
}

/// Class-biased training on fixed (A, B) pairs for each gamma setting.
pub fn recipe_class_bias(
    base: &ExperimentConfig,
    gamma_settings: &[(f64, f64)],
    seeds: &[u64],
    out_dir: &Path,
) -> Result<ClassBiasTable, HarnessError> {
    assert!(!seeds.is_empty());
    let (class_a, class_b) = match base.data.pairing {
        crate::harness::config::PairingConfig::FixedPair(a, b) => (a, b),
        _ => {
            return Err(HarnessError::Config(
                "class-bias recipe requires fixed-pair mixtures".into(),
            ))
        }
    };
    std::fs::create_dir_all(out_dir)?;
    // gamma must cover every class in the bank; classes outside the pair get 0
    let zero_gamma: BTreeMap<String, f64> = base
        .class_bank()?
        .classes
        .iter()
        .map(|c| (c.id.to_string(), 0.0))
        .collect();
    let combos: Vec<((f64, f64), u64)> = gamma_settings
        .iter()
        .flat_map(|&g| seeds.iter().map(move |&s| (g, s)))
        .collect();
    let runs: Vec<Result<((f64, f64), u64, RunArtifacts), HarnessError>> = combos
        .par_iter()
        .map(|&(gamma, seed)| {
            let mut gamma_map = zero_gamma.clone();
            gamma_map.insert(class_a.to_string(), gamma.0);
            gamma_map.insert(class_b.to_string(), gamma.1);
            let mode = ModeConfig::ClassBias {
                gamma: gamma_map,
                granularity: GranularityConfig::PerSource,
            };
            let dir = out_dir.join(format!("gamma_{}_{}_seed_{seed}", gamma.0, gamma.1));
            run_variant(base, mode, seed, dir).map(|r| (gamma, seed, r))
        })
        .collect();

    let mut rows = Vec::new();
    let mut csv = String::from("gamma_a,gamma_b,seed,class_a_sisdri,class_b_sisdri,combined\n");
    for run in runs {
        let (gamma, seed, artifacts) = run?;
        let t = &artifacts.final_test;
        let a = t.per_class.get(&class_a).copied().unwrap_or(f64::NAN);
        let b = t.per_class.get(&class_b).copied().unwrap_or(f64::NAN);
        let _ = writeln!(
            csv,
            "{},{},{seed},{a:.6},{b:.6},{:.6}",
            gamma.0, gamma.1, t.mean
        );
        rows.push(ClassBiasRow {
            gamma,
            seed,
            per_class: t.per_class.clone(),
            combined: t.mean,
        });
    }
    std::fs::write(out_dir.join("class_bias.csv"), &csv)?;

    // across-seed mean and std per setting
    let mut summary =
        String::from("gamma_a,gamma_b,class_a_mean,class_a_std,class_b_mean,class_b_std,combined_mean,combined_std\n");
    for &gamma in gamma_settings {
        let subset: Vec<&ClassBiasRow> = rows
            .iter()
            .filter(|r| r.gamma == gamma)
            .collect();
        let stat = |pick: &dyn Fn(&ClassBiasRow) -> f64| {
            let vals: Vec<f64> = subset.iter().map(|r| pick(r)).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            (mean, var.sqrt())
        };
        let (am, astd) = stat(&|r| r.per_class.get(&class_a).copied().unwrap_or(f64::NAN));
        let (bm, bstd) = stat(&|r| r.per_class.get(&class_b).copied().unwrap_or(f64::NAN));
        let (cm, cstd) = stat(&|r| r.combined);
        let _ = writeln!(
            summary,
            "{},{},{am:.6},{astd:.6},{bm:.6},{bstd:.6},{cm:.6},{cstd:.6}",
            gamma.0, gamma.1
        );
    }
    std::fs::write(out_dir.join("class_bias_summary.csv"), &summary)?;

    Ok(ClassBiasTable { rows, class_ids: (class_a, class_b), out_dir: out_dir.to_path_buf() })
}

/// Re-render the SVG reports of a finished run directory from its CSVs.
pub fn rerender_run(run_dir: &Path) -> Result<(), HarnessError> {
    let conv_path = run_dir.join("convergence.csv");
    if conv_path.exists() {
        let text = std::fs::read_to_string(&conv_path)?;
        let mut pts = Vec::new();
        for line in text.lines().skip(1) {
            let mut parts = line.split(',');
            let epoch: f64 = parts.next().and_then(|s| s.parse().ok()).unwrap_or(0.0);
            let mean: f64 = parts.next().and_then(|s| s.parse().ok()).unwrap_or(0.0);
            let std: f64 = parts.next().and_then(|s| s.parse().ok()).unwrap_or(0.0);
            pts.push((epoch, mean, std));
        }
        let svg = line_band_svg(
            "Mean validation SI-SDRi across epochs",
            "epoch",
            "SI-SDRi (dB)",
            &[("validation".to_string(), pts)],
        );
        std::fs::write(run_dir.join("convergence.svg"), svg)?;
    }
    let values_path = run_dir.join("test_values.csv");
    if values_path.exists() {
        let text = std::fs::read_to_string(&values_path)?;
        let values: Vec<f64> = text
            .lines()
            .skip(1)
            .filter_map(|l| l.split(',').nth(1)?.parse().ok())
            .collect();
        if !values.is_empty() {
            let svg = histogram_svg(
                "Distribution of test SI-SDRi (dB)",
                "SI-SDRi (dB)",
                &[("test".to_string(), values)],
            );
            std::fs::write(run_dir.join("test_hist.svg"), svg)?;
        }
    }
    Ok(())
}
