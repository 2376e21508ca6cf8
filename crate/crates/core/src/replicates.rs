//! Independent replicates, run in parallel or sequentially, and their
//! aggregation. Results are always ordered by replicate index, so the
//! execution mode never changes the output.

use serde::{Deserialize, Serialize};

use crate::engine::{run, EngineConfig, RunOutput};
use crate::error::Result;
use crate::metrics::MetricsRow;
use crate::rng::replicate_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Rayon work-stealing pool. Same as `Sequential` without the
    /// `parallel` feature.
    #[default]
    Parallel,
    Sequential,
}

/// Maps `f` over `items`, preserving order.
pub fn map_ordered<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Runs `count` replicates of `cfg`; replicate `i` uses
/// `replicate_seed(cfg.seed, i)`.
pub fn run_replicates(cfg: &EngineConfig, count: usize, exec: Execution) -> Result<Vec<RunOutput>> {
    cfg.validate()?;
    let configs: Vec<EngineConfig> =
        (0..count).map(|i| EngineConfig { seed: replicate_seed(cfg.seed, i), ..cfg.clone() }).collect();
    map_ordered(exec, &configs, run).into_iter().collect()
}

/// Column names of the per-round metrics table, after `round`.
pub const METRIC_COLUMNS: [&str; 8] = [
    "current_rate",
    "cumulative_rate",
    "beta_t",
    "alpha_q",
    "recovered",
    "carriers_virus",
    "carriers_cure",
    "detections",
];

pub fn row_values(row: &MetricsRow) -> [f64; 8] {
    [
        row.current_rate,
        row.cumulative_rate,
        row.beta_t,
        row.alpha_q_t,
        row.recovered as f64,
        row.carriers_virus as f64,
        row.carriers_cure as f64,
        row.detections as f64,
    ]
}

/// Per-round mean and sample standard deviation across replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub replicates: usize,
    pub rounds: Vec<u32>,
    pub mean: Vec<[f64; 8]>,
    /// Zero when there is a single replicate.
    pub std: Vec<[f64; 8]>,
}

impl Aggregate {
    pub fn column_mean(&self, col: usize) -> Vec<f64> {
        self.mean.iter().map(|r| r[col]).collect()
    }
}

pub fn aggregate(tables: &[&[MetricsRow]]) -> Aggregate {
    let len = tables.iter().map(|t| t.len()).min().unwrap_or(0);
    let n = tables.len() as f64;
    let mut agg = Aggregate {
        replicates: tables.len(),
        rounds: Vec::with_capacity(len),
        mean: Vec::with_capacity(len),
        std: Vec::with_capacity(len),
    };
    for i in 0..len {
        agg.rounds.push(tables[0][i].round);
        let vals: Vec<[f64; 8]> = tables.iter().map(|t| row_values(&t[i])).collect();
        let mut mean = [0.0; 8];
        let mut std = [0.0; 8];
        for c in 0..8 {
            mean[c] = vals.iter().map(|v| v[c]).sum::<f64>() / n;
            if tables.len() > 1 {
                let ss: f64 = vals.iter().map(|v| (v[c] - mean[c]).powi(2)).sum();
                std[c] = (ss / (n - 1.0)).sqrt();
            }
        }
        agg.mean.push(mean);
        agg.std.push(std);
    }
    agg
}

pub fn aggregate_outputs(outputs: &[RunOutput]) -> Aggregate {
    let tables: Vec<&[MetricsRow]> = outputs.iter().map(|o| o.metrics.as_slice()).collect();
    aggregate(&tables)
}

/// Headline numbers of a current/cumulative rate series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub peak_current: f64,
    pub peak_round: u32,
    /// First round after the peak with current rate at most 0.10.
    pub recovery_round: Option<u32>,
    /// First round with cumulative rate at least 0.85.
    pub cumulative_85_round: Option<u32>,
    /// First round with cumulative rate at least 0.95.
    pub cumulative_95_round: Option<u32>,
}

pub const RECOVERY_THRESHOLD: f64 = 0.10;

pub fn summarize(rounds: &[u32], current: &[f64], cumulative: &[f64]) -> Summary {
    let mut peak_idx = 0;
    for (i, &c) in current.iter().enumerate() {
        if c > current[peak_idx] {
            peak_idx = i;
        }
    }
    let first_at_least = |x: f64| cumulative.iter().position(|&c| c >= x).map(|i| rounds[i]);
    Summary {
        peak_current: current.get(peak_idx).copied().unwrap_or(0.0),
        peak_round: rounds.get(peak_idx).copied().unwrap_or(0),
        recovery_round: current
            .iter()
            .enumerate()
            .skip(peak_idx + 1)
            .find(|(_, &c)| c <= RECOVERY_THRESHOLD)
            .map(|(i, _)| rounds[i]),
        cumulative_85_round: first_at_least(0.85),
        cumulative_95_round: first_at_least(0.95),
    }
}

pub fn summarize_rows(rows: &[MetricsRow]) -> Summary {
    let rounds: Vec<u32> = rows.iter().map(|r| r.round).collect();
    let cur: Vec<f64> = rows.iter().map(|r| r.current_rate).collect();
    let cum: Vec<f64> = rows.iter().map(|r| r.cumulative_rate).collect();
    summarize(&rounds, &cur, &cum)
}

pub fn summarize_aggregate(agg: &Aggregate) -> Summary {
    summarize(&agg.rounds, &agg.column_mean(0), &agg.column_mean(1))
}

/// Median of `values`; NaN for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Per-round median of one column across replicates.
pub fn median_series(outputs: &[RunOutput], col: usize) -> Vec<f64> {
    let len = outputs.iter().map(|o| o.metrics.len()).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let vals: Vec<f64> = outputs.iter().map(|o| row_values(&o.metrics[i])[col]).collect();
            median(&vals)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> EngineConfig {
        EngineConfig { agents: 32, rounds: 20, seed: 99, ..EngineConfig::default() }
    }

    #[test]
    fn parallel_equals_sequential() {
        let a = run_replicates(&small(), 6, Execution::Parallel).unwrap();
        let b = run_replicates(&small(), 6, Execution::Sequential).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.seed, y.seed);
            assert_eq!(x.metrics, y.metrics);
        }
    }

    #[test]
    fn replicates_use_distinct_seeds() {
        let out = run_replicates(&small(), 4, Execution::Sequential).unwrap();
        let mut seeds: Vec<u64> = out.iter().map(|o| o.seed).collect();
        seeds.dedup();
        assert_eq!(seeds.len(), 4);
    }

    #[test]
    fn aggregate_mean_and_sample_std() {
        let out = run_replicates(&small(), 3, Execution::Sequential).unwrap();
        let agg = aggregate_outputs(&out);
        assert_eq!(agg.rounds.len(), 21);
        let last: Vec<f64> = out.iter().map(|o| o.metrics[20].cumulative_rate).collect();
        let mean = last.iter().sum::<f64>() / 3.0;
        let var = last.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 2.0;
        assert!((agg.mean[20][1] - mean).abs() < 1e-12);
        assert!((agg.std[20][1] - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn summary_fields() {
        let rounds: Vec<u32> = (0..6).collect();
        let cur = [0.0, 0.2, 0.6, 0.3, 0.05, 0.0];
        let cum = [0.01, 0.3, 0.86, 0.9, 0.96, 0.96];
        let s = summarize(&rounds, &cur, &cum);
        assert_eq!(s.peak_current, 0.6);
        assert_eq!(s.peak_round, 2);
        assert_eq!(s.recovery_round, Some(4));
        assert_eq!(s.cumulative_85_round, Some(2));
        assert_eq!(s.cumulative_95_round, Some(4));
        let s = summarize(&rounds, &[0.0, 0.5, 0.9, 0.9, 0.95, 1.0], &[0.0; 6]);
        assert_eq!(s.recovery_round, None);
        assert_eq!(s.cumulative_85_round, None);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
