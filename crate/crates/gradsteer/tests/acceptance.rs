//! Acceptance suite: one test per release gate. The first group pins exact
//! algebraic contracts (pmf, update rule, gradients, signal metrics,
//! optimizer, reproducibility); the second reproduces the direction of the
//! three headline experiments at desk scale, where absolute numbers are not
//! expected to match any full-scale reference.
//!
//! Each test ends with a single `PASS` line naming the gate.

use gradsteer::harness::config::{ExperimentConfig, ModeConfig, PairingConfig};
use gradsteer::harness::recipes::{recipe_class_bias, recipe_curriculum, recipe_robust_sweep};
use gradsteer::harness::train::train;
use gradsteer::mixgen::{generate_source, make_batch, mix_at_snr, ClassBank, MixSpec};
use gradsteer::model::{
    backward_batch, batch_losses, forward_batch, init_params, ModelConfig,
};
use gradsteer::optim::{adam_step, clip_grad_norm, AdamState};
use gradsteer::params::{GradientVector, SeparatorParams};
use gradsteer::reweight::{
    softmax_pmf, weighted_objective, weighting_values, BatchPmf, EpochClock, Granularity,
    WeightingMode,
};
use gradsteer::signal::{pit_si_sdr, si_sdr, si_sdri, SourceSet, Waveform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("gradsteer_acceptance").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

// ---------------------------------------------------------------------------
// 1. pmf correctness

#[test]
fn criterion_01_pmf_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x01);
    let clock = EpochClock::default();
    for _ in 0..1000 {
        let b = rng.gen_range(2..=64usize);
        let f: Vec<f64> = (0..b).map(|_| rng.gen_range(-700.0..700.0)).collect();

        let pmf = softmax_pmf(&f, Granularity::PerExample).unwrap();
        let total: f64 = pmf.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-9, "weights must sum to 1");

        // shift invariance
        let c = rng.gen_range(-350.0..350.0);
        let shifted: Vec<f64> = f.iter().map(|x| x + c).collect();
        let pmf_shift = softmax_pmf(&shifted, Granularity::PerExample).unwrap();
        for (a, s) in pmf.weights.iter().zip(&pmf_shift.weights) {
            assert!((a - s).abs() < 1e-12, "pmf must be shift invariant");
        }

        // Robust(alpha=0) is exactly uniform
        let zeros = weighting_values(
            &WeightingMode::Robust { alpha: 0.0 },
            &f,
            &[],
            clock,
        )
        .unwrap();
        let uniform = softmax_pmf(&zeros, Granularity::PerExample).unwrap();
        for &p in &uniform.weights {
            assert!((p - 1.0 / b as f64).abs() < 1e-12, "alpha=0 must be uniform");
        }

        // Robust with alpha > 0: weights ordered like the losses
        let alpha = rng.gen_range(0.01..1.0);
        let fr = weighting_values(&WeightingMode::Robust { alpha }, &f, &[], clock).unwrap();
        let pr = softmax_pmf(&fr, Granularity::PerExample).unwrap();
        // Curriculum (beta < 0): weights ordered opposite to the losses
        let fc = weighting_values(
            &WeightingMode::Curriculum { a: 10.0, b: 0.5, per_step: false },
            &f,
            &[],
            EpochClock { epoch: rng.gen_range(0..100), step: 0 },
        )
        .unwrap();
        let pc = softmax_pmf(&fc, Granularity::PerExample).unwrap();
        for i in 0..b {
            for j in 0..b {
                if f[i] > f[j] {
                    assert!(pr.weights[i] >= pr.weights[j], "robust must be monotone");
                    assert!(pc.weights[i] <= pc.weights[j], "curriculum must be antitone");
                    // strictness whenever the softmax has not underflowed
                    if pr.weights[j] > 1e-300 {
                        assert!(pr.weights[i] > pr.weights[j]);
                    }
                    if pc.weights[i] > 1e-300 {
                        assert!(pc.weights[i] < pc.weights[j]);
                    }
                }
            }
        }
    }
    assert!(start.elapsed().as_secs_f64() < 5.0, "pmf suite exceeded 5 s");
    println!("criterion 01 pmf correctness: PASS");
}

// ---------------------------------------------------------------------------
// Shared tiny model for the gradient-level gates.

fn tiny_model() -> ModelConfig {
    ModelConfig {
        enc_kernel: 8,
        enc_stride: 4,
        n_bases: 8,
        n_blocks: 1,
        hidden: 8,
        n_sources: 2,
        cap_db: 60.0,
    }
}

fn tiny_batch(b: usize, epoch: u64, batch_index: u64, seed: u64) -> gradsteer::mixgen::WaveformBatch<f64> {
    let spec = MixSpec { segment_len: 128, ..MixSpec::default() };
    make_batch(&spec, &ClassBank::default_bank(), b, epoch, batch_index, seed).unwrap()
}

fn one_hot_pmf(n: usize, i: usize, units: Granularity) -> BatchPmf<f64> {
    let mut weights = vec![0.0; n];
    weights[i] = 1.0;
    BatchPmf { weights, units, entropy: 0.0, max_weight: 1.0 }
}

fn relative_norm_diff(a: &GradientVector<f64>, b: &GradientVector<f64>) -> f64 {
    let diff: f64 = a
        .0
        .iter()
        .zip(&b.0)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    diff / b.norm().max(1e-300)
}

// ---------------------------------------------------------------------------
// 2. biased update equals the explicit weighted sum of per-unit gradients

#[test]
fn criterion_02_biased_update_oracle_equivalence() {
    let start = Instant::now();
    let cfg = tiny_model();
    assert!(cfg.param_count() <= 5000, "oracle model must stay tiny");
    let params: SeparatorParams<f64> = init_params(&cfg, 5);
    let clock = EpochClock { epoch: 3, step: 17 };
    let gamma: BTreeMap<u32, f64> =
        BTreeMap::from([(0, 1.5), (1, 0.0), (2, -0.7), (3, 0.3)]);
    let modes = [
        WeightingMode::Uniform,
        WeightingMode::Robust { alpha: 0.2 },
        WeightingMode::Curriculum { a: 10.0, b: 0.5, per_step: false },
        WeightingMode::ClassBias { gamma, granularity: Granularity::PerSource },
    ];

    for batch_index in 0..50u64 {
        let batch = tiny_batch(4, 0, batch_index, 99);
        for mode in &modes {
            let gran = mode.granularity();
            let fwd = forward_batch(&cfg, &params, &batch, gran).unwrap();
            let f = weighting_values(mode, &fwd.per_unit_losses, &fwd.per_unit_classes, clock)
                .unwrap();
            let pmf = softmax_pmf(&f, gran).unwrap();
            let joint = backward_batch(&cfg, &params, &fwd, &pmf).unwrap();

            // oracle: backward once per unit, then weight and sum explicitly
            let n = pmf.len();
            let mut oracle = GradientVector::zeros(params.len());
            for u in 0..n {
                let unit = backward_batch(&cfg, &params, &fwd, &one_hot_pmf(n, u, gran)).unwrap();
                oracle.axpy(pmf.weights[u], &unit);
            }
            let rel = relative_norm_diff(&joint, &oracle);
            assert!(rel <= 1e-8, "mode {mode:?}: relative diff {rel:.3e}");
        }
    }
    assert!(start.elapsed().as_secs_f64() < 60.0, "oracle suite exceeded 1 min");
    println!("criterion 02 biased-update oracle equivalence: PASS");
}

// ---------------------------------------------------------------------------
// 3. uniform mode recovers the plain batch mean; alpha=0 pipeline identity

#[test]
fn criterion_03_uniform_mean_recovery() {
    let cfg = tiny_model();
    let params: SeparatorParams<f64> = init_params(&cfg, 11);
    let batch = tiny_batch(6, 1, 0, 42);
    let gran = Granularity::PerExample;
    let fwd = forward_batch(&cfg, &params, &batch, gran).unwrap();
    let n = fwd.per_unit_losses.len();

    let uniform = BatchPmf::uniform(n, gran).unwrap();
    let update = backward_batch(&cfg, &params, &fwd, &uniform).unwrap();

    let mut mean = GradientVector::zeros(params.len());
    for u in 0..n {
        let g = backward_batch(&cfg, &params, &fwd, &one_hot_pmf(n, u, gran)).unwrap();
        mean.axpy(1.0 / n as f64, &g);
    }
    let rel = relative_norm_diff(&update, &mean);
    assert!(rel <= 1e-10, "uniform update must equal the batch mean: {rel:.3e}");

    // full pipeline: Robust(alpha=0) is bit-identical to Uniform
    let dir_u = scratch_dir("c3_uniform");
    let dir_r = scratch_dir("c3_alpha0");
    let mut cfg_u = pipeline_config(&dir_u);
    cfg_u.reweight.mode = ModeConfig::Uniform;
    let mut cfg_r = pipeline_config(&dir_r);
    cfg_r.reweight.mode = ModeConfig::Robust { alpha: 0.0 };
    let run_u = train(&cfg_u).unwrap();
    let run_r = train(&cfg_r).unwrap();
    assert_eq!(
        run_u.final_params.values, run_r.final_params.values,
        "alpha=0 must be bit-identical to uniform"
    );
    let metrics_u = std::fs::read(dir_u.join("metrics.csv")).unwrap();
    let metrics_r = std::fs::read(dir_r.join("metrics.csv")).unwrap();
    assert_eq!(metrics_u, metrics_r);
    println!("criterion 03 uniform-mean recovery: PASS");
}

fn pipeline_config(out_dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.data.segment_len = 128;
    cfg.model.enc_kernel = 8;
    cfg.model.enc_stride = 4;
    cfg.model.n_bases = 8;
    cfg.model.n_blocks = 1;
    cfg.model.hidden = 8;
    cfg.run.epochs = 2;
    cfg.run.batches_per_epoch = 3;
    cfg.run.batch_size = 4;
    cfg.eval.n_val = 8;
    cfg.eval.n_test = 8;
    cfg.run.out_dir = out_dir.to_path_buf();
    cfg
}

// ---------------------------------------------------------------------------
// 4. analytic gradients against central finite differences

#[test]
fn criterion_04_finite_difference_gradients() {
    let cfg = tiny_model();
    let params: SeparatorParams<f64> = init_params(&cfg, 7);
    let gran = Granularity::PerExample;
    let mut rng = ChaCha8Rng::seed_from_u64(0x04);

    for input in 0..10u64 {
        let batch = tiny_batch(2, 2, input, 1234);
        let fwd = forward_batch(&cfg, &params, &batch, gran).unwrap();
        let f = weighting_values(
            &WeightingMode::Robust { alpha: 0.3 },
            &fwd.per_unit_losses,
            &fwd.per_unit_classes,
            EpochClock::default(),
        )
        .unwrap();
        // the pmf is frozen: both the analytic gradient and the finite
        // differences below treat it as a constant
        let pmf = softmax_pmf(&f, gran).unwrap();
        let analytic = backward_batch(&cfg, &params, &fwd, &pmf).unwrap();

        let mut checked = 0;
        while checked < 20 {
            let k = rng.gen_range(0..params.len());
            // skip coordinates whose gradient is numerically negligible;
            // central differences cannot resolve them above cancellation noise
            if analytic.0[k].abs() < 1e-6 {
                continue;
            }
            let h = 1e-5 * (1.0 + params.values[k].abs());
            let objective = |theta: f64| -> f64 {
                let mut p = params.clone();
                p.values[k] = theta;
                let losses = batch_losses(&cfg, &p, &batch, gran).unwrap();
                weighted_objective(&losses, &pmf).unwrap()
            };
            let fd = (objective(params.values[k] + h) - objective(params.values[k] - h))
                / (2.0 * h);
            let rel = (fd - analytic.0[k]).abs() / fd.abs().max(analytic.0[k].abs());
            assert!(
                rel < 1e-4,
                "input {input} coord {k}: analytic {} vs fd {fd} (rel {rel:.3e})",
                analytic.0[k]
            );
            checked += 1;
        }
    }
    println!("criterion 04 finite-difference gradients: PASS");
}

// ---------------------------------------------------------------------------
// 5. signal metric suite

/// Independent lexicographic permutation enumeration (the library uses
/// Heap's algorithm internally).
fn lex_permutations(n: usize) -> Vec<Vec<usize>> {
    fn build(prefix: &mut Vec<usize>, remaining: &[usize], out: &mut Vec<Vec<usize>>) {
        if remaining.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for (i, &r) in remaining.iter().enumerate() {
            prefix.push(r);
            let mut rest = remaining.to_vec();
            rest.remove(i);
            build(prefix, &rest, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    build(&mut Vec::new(), &(0..n).collect::<Vec<_>>(), &mut out);
    out
}

fn random_wave(rng: &mut ChaCha8Rng, len: usize) -> Waveform<f64> {
    let samples: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Waveform::new(samples, 8000).unwrap()
}

#[test]
fn criterion_05_signal_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x05);

    // PIT equals an independent exhaustive search
    for _ in 0..200 {
        let n = rng.gen_range(1..=4usize);
        let len = rng.gen_range(32..=64usize);
        let estimates =
            SourceSet::all_active((0..n).map(|_| random_wave(&mut rng, len)).collect()).unwrap();
        let references =
            SourceSet::all_active((0..n).map(|_| random_wave(&mut rng, len)).collect()).unwrap();
        let pit = pit_si_sdr(&estimates, &references).unwrap();

        let mut best = f64::NEG_INFINITY;
        for perm in lex_permutations(n) {
            let mean = (0..n)
                .map(|j| {
                    si_sdr(&estimates.sources[perm[j]], &references.sources[j]).unwrap()
                })
                .sum::<f64>()
                / n as f64;
            best = best.max(mean);
        }
        assert!(
            (pit.mean_si_sdr - best).abs() < 1e-9,
            "pit {} vs exhaustive {best}",
            pit.mean_si_sdr
        );
    }

    let bank = ClassBank::default_bank();
    for trial in 0..50u64 {
        let mut gen_rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let class = &bank.classes[(trial % 4) as usize];
        let s1 = generate_source::<f64>(class, 256, 8000, &mut gen_rng).unwrap();
        let other = &bank.classes[((trial + 1) % 4) as usize];
        let s2 = generate_source::<f64>(other, 256, 8000, &mut gen_rng).unwrap();
        let estimate = random_wave(&mut rng, 256);

        // target-scale invariance
        let base = si_sdr(&estimate, &s1).unwrap();
        for scale in [0.5, 3.7, -2.0] {
            let scaled = Waveform::new(
                s1.samples.iter().map(|&x| scale * x).collect(),
                8000,
            )
            .unwrap();
            let v = si_sdr(&estimate, &scaled).unwrap();
            assert!((v - base).abs() < 1e-9, "scale {scale}: {v} vs {base}");
        }

        // mix_at_snr achieves the requested SNR exactly
        let snr = rng.gen_range(-30.0..30.0);
        let (mixture, scaled_s2, _) = mix_at_snr(&s1, &s2, snr).unwrap();
        let achieved = 10.0 * (s1.energy() / scaled_s2.energy()).log10();
        assert!((achieved - snr).abs() < 1e-9, "snr {snr} vs achieved {achieved}");

        // using the mixture itself as every estimate gives zero improvement
        let sources = SourceSet::all_active(vec![s1, scaled_s2]).unwrap();
        let estimates =
            SourceSet::all_active(vec![mixture.clone(), mixture.clone()]).unwrap();
        let improvement = si_sdri(&estimates, &sources, &mixture).unwrap();
        assert!(improvement.abs() < 1e-9, "mixture-as-estimate SI-SDRi {improvement}");
    }
    println!("criterion 05 signal suite: PASS");
}

// ---------------------------------------------------------------------------
// Shared desk-scale config for the trend gates (6-8). Small enough to keep
// each sweep under its runtime budget on one CPU.

fn trend_config(epochs: usize, out_dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.data.segment_len = 512;
    cfg.model.enc_kernel = 16;
    cfg.model.enc_stride = 8;
    cfg.model.n_bases = 32;
    cfg.model.n_blocks = 2;
    cfg.model.hidden = 32;
    cfg.optim.lr = 0.003;
    cfg.run.epochs = epochs;
    cfg.run.batches_per_epoch = 60;
    cfg.run.batch_size = 8;
    cfg.eval.n_val = 64;
    cfg.eval.n_test = 64;
    cfg.run.out_dir = out_dir.to_path_buf();
    cfg
}

const TREND_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

// ---------------------------------------------------------------------------
// 6. robustness trade-off: alpha > 0 lifts the low tail, costs some mean

#[test]
fn criterion_06_robustness_trend() {
    let start = Instant::now();
    let out = scratch_dir("c6_robust");
    let cfg = trend_config(12, &out);
    let sweep = recipe_robust_sweep(&cfg, &[0.0, 0.2], &TREND_SEEDS, &out).unwrap();

    let q05_base = sweep.median_over_seeds(0.0, |t| t.quantile(5.0));
    let q05_robust = sweep.median_over_seeds(0.2, |t| t.quantile(5.0));
    let mean_base = sweep.median_over_seeds(0.0, |t| t.mean);
    let mean_robust = sweep.median_over_seeds(0.2, |t| t.mean);

    assert!(
        q05_robust > q05_base,
        "5th percentile must improve: alpha=0.2 q05 {q05_robust:.3} vs alpha=0 q05 {q05_base:.3}"
    );
    assert!(
        mean_robust <= mean_base + 0.5,
        "mean must not improve materially: alpha=0.2 {mean_robust:.3} vs alpha=0 {mean_base:.3}"
    );
    assert!(start.elapsed().as_secs_f64() < 1800.0, "robust sweep exceeded 30 min");
    println!(
        "criterion 06 robustness trend: PASS (q05 {q05_base:.2} -> {q05_robust:.2} dB, \
         mean {mean_base:.2} -> {mean_robust:.2} dB)"
    );
}

// ---------------------------------------------------------------------------
// 7. curriculum: faster early convergence than the uniform baseline

#[test]
fn criterion_07_curriculum_trend() {
    let start = Instant::now();
    let out = scratch_dir("c7_curriculum");
    let epochs = 8;
    let cfg = trend_config(epochs, &out);
    let cmp = recipe_curriculum(&cfg, &TREND_SEEDS, &out).unwrap();

    let checkpoint_epoch = epochs / 4; // 25% of the budget
    let at = |arm: &gradsteer::harness::recipes::CurriculumArm| -> f64 {
        arm.series
            .iter()
            .find(|(e, _)| *e == checkpoint_epoch)
            .map(|(_, v)| *v)
            .expect("validation series covers every epoch")
    };
    let mut wins = 0;
    for seed in TREND_SEEDS {
        let curriculum = cmp.curriculum.iter().find(|a| a.seed == seed).unwrap();
        let baseline = cmp.baseline.iter().find(|a| a.seed == seed).unwrap();
        if at(curriculum) > at(baseline) {
            wins += 1;
        }
    }
    assert!(
        wins >= 4,
        "curriculum must lead at epoch {checkpoint_epoch} in >= 4 of 5 seeds (got {wins})"
    );
    assert!(start.elapsed().as_secs_f64() < 1800.0, "curriculum comparison exceeded 30 min");
    println!("criterion 07 curriculum trend: PASS ({wins}/5 seeds ahead at 25% budget)");
}

// ---------------------------------------------------------------------------
// 8. class bias steers per-class quality in both directions

#[test]
fn criterion_08_class_bias_trend() {
    let start = Instant::now();
    let out = scratch_dir("c8_class_bias");
    let mut cfg = trend_config(12, &out);
    cfg.data.pairing = PairingConfig::FixedPair(0, 1);
    let settings = [(0.0, 0.0), (3.0, 0.0), (0.0, 3.0)];
    let table = recipe_class_bias(&cfg, &settings, &TREND_SEEDS, &out).unwrap();
    let (class_a, class_b) = table.class_ids;

    let per_class = |gamma: (f64, f64), seed: u64, class: u32| -> f64 {
        table
            .rows_for(gamma)
            .find(|r| r.seed == seed)
            .and_then(|r| r.per_class.get(&class).copied())
            .expect("every (gamma, seed) run reports both classes")
    };
    let mut wins_a = 0;
    let mut wins_b = 0;
    for seed in TREND_SEEDS {
        if per_class((3.0, 0.0), seed, class_a) > per_class((0.0, 0.0), seed, class_a) {
            wins_a += 1;
        }
        if per_class((0.0, 3.0), seed, class_b) > per_class((0.0, 0.0), seed, class_b) {
            wins_b += 1;
        }
    }
    assert!(wins_a >= 4, "bias toward class {class_a} must help it in >= 4 of 5 seeds (got {wins_a})");
    assert!(wins_b >= 4, "bias toward class {class_b} must help it in >= 4 of 5 seeds (got {wins_b})");
    assert!(start.elapsed().as_secs_f64() < 1800.0, "class-bias table exceeded 30 min");
    println!("criterion 08 class-bias trend: PASS ({wins_a}/5 and {wins_b}/5 seeds)");
}

// ---------------------------------------------------------------------------
// 9. optimizer suite

#[test]
fn criterion_09_optimizer_suite() {
    // Adam first step with a unit gradient: delta theta = -lr / (1 + eps)
    let manifest = vec![gradsteer::params::LayerEntry { name: "w".into(), offset: 0, extent: 3 }];
    let params = SeparatorParams { values: vec![0.0f64; 3], manifest };
    let state = AdamState::new(3, 0.25, 5.0);
    let (stepped, _) = adam_step(&params, &state, &GradientVector(vec![1.0; 3])).unwrap();
    for &v in &stepped.values {
        assert!((v + 0.25 / (1.0 + 1e-8)).abs() < 1e-12);
    }

    // clipping: exact rescale above the threshold, untouched below
    let g = GradientVector(vec![6.0f64, 8.0]);
    assert_eq!(clip_grad_norm(&g, 5.0).unwrap().0, vec![3.0, 4.0]);
    let small = GradientVector(vec![1.0f64, 2.0]);
    assert_eq!(clip_grad_norm(&small, 5.0).unwrap().0, small.0);

    // determinism: identical trajectories from identical inputs
    let cfg = tiny_model();
    let p0: SeparatorParams<f64> = init_params(&cfg, 3);
    let mut runs = Vec::new();
    for _ in 0..2 {
        let mut p = p0.clone();
        let mut s = AdamState::new(p.len(), 0.01, 5.0);
        for step in 0..5u64 {
            let delta = GradientVector(
                (0..p.len()).map(|i| ((i as u64 + step) % 7) as f64 * 0.1 - 0.3).collect(),
            );
            let clipped = clip_grad_norm(&delta, s.clip_norm).unwrap();
            let (np, ns) = adam_step(&p, &s, &clipped).unwrap();
            p = np;
            s = ns;
        }
        runs.push(p.values);
    }
    assert_eq!(runs[0], runs[1]);

    // checkpoint round trip is bit-exact, including optimizer state
    let dir = scratch_dir("c9_checkpoint");
    let mut adam = AdamState::new(p0.len(), 0.001, 5.0);
    adam.m[1] = -1.25e-13;
    adam.v[2] = 0.75;
    adam.step_count = 41;
    let path = dir.join("model.ckpt");
    gradsteer::harness::checkpoint::save_checkpoint(&path, &cfg, &p0, Some(&adam), 3, 9).unwrap();
    let loaded = gradsteer::harness::checkpoint::load_checkpoint::<f64>(&path).unwrap();
    assert_eq!(loaded.params.values, p0.values);
    let la = loaded.adam.as_ref().unwrap();
    assert_eq!(la.m, adam.m);
    assert_eq!(la.v, adam.v);
    assert_eq!(la.step_count, adam.step_count);
    let again = dir.join("again.ckpt");
    gradsteer::harness::checkpoint::save_checkpoint(
        &again,
        &loaded.model,
        &loaded.params,
        loaded.adam.as_ref(),
        loaded.seed,
        loaded.epoch,
    )
    .unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    println!("criterion 09 optimizer suite: PASS");
}

// ---------------------------------------------------------------------------
// 10. byte-identical reruns

#[test]
fn criterion_10_reproducibility() {
    let out_a = scratch_dir("c10_first");
    let out_b = scratch_dir("c10_second");
    let mut first = None;
    for out in [&out_a, &out_b] {
        let mut cfg = pipeline_config(out);
        cfg.run.seed = 7;
        recipe_robust_sweep(&cfg, &[0.2], &[7], out).unwrap();
        let metrics = std::fs::read(out.join("alpha_0.2000_seed_7").join("metrics.csv")).unwrap();
        match &first {
            None => first = Some(metrics),
            Some(reference) => assert_eq!(
                reference, &metrics,
                "reruns with identical config and seed must be byte-identical"
            ),
        }
    }
    println!("criterion 10 reproducibility: PASS");
}
