//! Evaluation statistics: mean/std, empirical quantiles with linear
//! interpolation between order statistics, and per-class means.

use std::collections::BTreeMap;

/// Fixed metrics.csv header; the schema is part of the external contract.
pub const METRICS_CSV_HEADER: &str =
    "epoch,split,mean_sisdri,std_sisdri,q01,q05,q10,q25,q50,q75,q90,q95,q99";

/// Quantile levels emitted in metrics.csv, in percent.
pub const CSV_QUANTILES: [f64; 9] = [1.0, 5.0, 10.0, 25.0, 50.0, 75.0, 90.0, 95.0, 99.0];

#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub n_examples: usize,
    pub mean: f64,
    pub std: f64,
    /// (level in percent, value) pairs, sorted by level.
    pub quantiles: Vec<(f64, f64)>,
    /// Per-class mean SI-SDRi over per-source values: class id -> (mean, count).
    pub per_class: BTreeMap<u32, (f64, usize)>,
}

/// Empirical quantile at `level` percent, linearly interpolating between
/// the closest order statistics. `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], level: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = level / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

impl MetricsReport {
    /// Build from per-example SI-SDRi values plus per-source
    /// (class, SI-SDRi) pairs.
    pub fn from_values(
        per_example: &[f64],
        per_source: &[(u32, f64)],
        quantile_levels: &[f64],
    ) -> Self {
        let n = per_example.len();
        assert!(n > 0, "report needs at least one example");
        let mean = per_example.iter().sum::<f64>() / n as f64;
        let var = per_example.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let mut sorted = per_example.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite metric values"));
        let mut levels = quantile_levels.to_vec();
        levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let quantiles = levels.iter().map(|&q| (q, quantile(&sorted, q))).collect();

        let mut per_class: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
        for &(class, v) in per_source {
            let e = per_class.entry(class).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
        for (_, e) in per_class.iter_mut() {
            e.0 /= e.1 as f64;
        }
        Self { n_examples: n, mean, std: var.sqrt(), quantiles, per_class }
    }

    fn quantile_at(&self, level: f64) -> f64 {
        self.quantiles
            .iter()
            .find(|(q, _)| (*q - level).abs() < 1e-9)
            .map(|(_, v)| *v)
            .unwrap_or(f64::NAN)
    }

    /// One metrics.csv data row (without trailing newline).
    pub fn csv_row(&self, epoch: usize, split: &str) -> String {
        let mut row = format!("{epoch},{split},{:.6},{:.6}", self.mean, self.std);
        for level in CSV_QUANTILES {
            row.push_str(&format!(",{:.6}", self.quantile_at(level)));
        }
        row
    }
}
