//! Monte Carlo over episodes and sweeps over the channel capacity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::episode::{run_episode, TraceSummary};
use crate::error::{domain, Result};
use crate::rng::mix;

/// Aggregate of `runs` episodes at one capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub capacity_bits: f64,
    pub runs: u64,
    pub successes: u64,
    pub success_fraction: f64,
    /// Mean LQR cost over runs that stayed bounded; NaN if none did.
    pub mean_lqr_cost: f64,
    pub diverged: u64,
}

impl SweepRow {
    /// Binomial standard error of the success fraction.
    pub fn std_error(&self) -> f64 {
        let p = self.success_fraction;
        (p * (1.0 - p) / self.runs as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// Seed of episode `index` within an experiment.
pub fn episode_seed(seed: u64, index: u64) -> u64 {
    mix(seed, index)
}

/// Runs `cfg.runs` independent episodes. Episodes run in parallel and are
/// folded in index order, so the result does not depend on the thread count.
pub fn monte_carlo(cfg: &ExperimentConfig) -> Result<SweepRow> {
    cfg.validate()?;
    let summaries: Vec<TraceSummary> = (0..cfg.runs)
        .into_par_iter()
        .map(|i| run_episode(cfg, episode_seed(cfg.seed, i)).map(|t| t.summary))
        .collect::<Result<_>>()?;
    let successes = summaries.iter().filter(|s| s.success).count() as u64;
    let diverged = summaries.iter().filter(|s| s.diverged).count() as u64;
    let (sum, n) = summaries
        .iter()
        .filter_map(|s| s.lqr_cost.filter(|c| c.is_finite()))
        .fold((0.0, 0u64), |(acc, n), c| (acc + c, n + 1));
    Ok(SweepRow {
        capacity_bits: cfg.capacity_bits,
        runs: cfg.runs,
        successes,
        success_fraction: successes as f64 / cfg.runs as f64,
        mean_lqr_cost: if n == 0 { f64::NAN } else { sum / n as f64 },
        diverged,
    })
}

/// Seed used for grid point `j` of a sweep.
pub fn grid_seed(seed: u64, j: u64) -> u64 {
    mix(mix(seed, 0x53_5745_4550), j)
}

/// One Monte Carlo row per capacity, each with its own seed.
pub fn sweep_capacity(cfg: &ExperimentConfig, capacity_grid: &[f64]) -> Result<SweepResult> {
    if capacity_grid.is_empty() {
        return Err(domain("capacity grid is empty"));
    }
    let rows = capacity_grid
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            let mut point = cfg.clone();
            point.capacity_bits = c;
            point.seed = grid_seed(cfg.seed, j as u64);
            monte_carlo(&point)
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult { rows })
}

/// Evenly spaced capacities from `lo` to `hi` times `log2 a`.
pub fn capacity_grid(cfg: &ExperimentConfig, lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let crit = cfg.critical_bits();
    match points {
        0 => vec![],
        1 => vec![lo * crit],
        _ => (0..points).map(|i| (lo + (hi - lo) * i as f64 / (points - 1) as f64) * crit).collect(),
    }
}

/// Indices `j` where the success fraction drops from row `j` to `j + 1` by
/// more than two combined standard errors.
pub fn monotonicity_violations(result: &SweepResult) -> Vec<usize> {
    result
        .rows
        .windows(2)
        .enumerate()
        .filter(|(_, w)| {
            let se = (w[0].std_error().powi(2) + w[1].std_error().powi(2)).sqrt();
            w[1].success_fraction < w[0].success_fraction - 2.0 * se
        })
        .map(|(j, _)| j)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(runs: u64) -> ExperimentConfig {
        ExperimentConfig { runs, ..ExperimentConfig::default() }
    }

    #[test]
    fn single_run_gives_a_zero_or_one_fraction() {
        let row = monte_carlo(&small(1)).unwrap();
        assert!(row.success_fraction == 0.0 || row.success_fraction == 1.0);
        assert!(row.successes <= row.runs);
    }

    #[test]
    fn one_point_grid_gives_one_row() {
        let cfg = small(20);
        let res = sweep_capacity(&cfg, &[cfg.capacity_bits]).unwrap();
        assert_eq!(res.rows.len(), 1);
        assert!(sweep_capacity(&cfg, &[]).is_err());
    }

    #[test]
    fn far_above_threshold_nearly_always_stabilizes() {
        let cfg = small(200);
        let res = sweep_capacity(&cfg, &[2.0 * cfg.critical_bits()]).unwrap();
        assert!(res.rows[0].success_fraction >= 0.95, "{:?}", res.rows[0]);
    }

    #[test]
    fn results_do_not_depend_on_the_thread_count() {
        let cfg = small(40);
        let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        let one = pool(1).install(|| monte_carlo(&cfg).unwrap());
        let four = pool(4).install(|| monte_carlo(&cfg).unwrap());
        assert_eq!(one, four);
    }

    #[test]
    fn violations_are_flagged() {
        let row = |p: f64| SweepRow {
            capacity_bits: 0.0,
            runs: 500,
            successes: (p * 500.0) as u64,
            success_fraction: p,
            mean_lqr_cost: 0.0,
            diverged: 0,
        };
        let ok = SweepResult { rows: vec![row(0.0), row(0.5), row(0.49), row(0.95)] };
        assert!(monotonicity_violations(&ok).is_empty());
        let bad = SweepResult { rows: vec![row(0.0), row(0.9), row(0.5)] };
        assert_eq!(monotonicity_violations(&bad), vec![1]);
    }

    #[test]
    fn grid_spacing() {
        let cfg = small(1);
        let g = capacity_grid(&cfg, 0.5, 1.5, 3);
        assert_eq!(g.len(), 3);
        assert!((g[1] - cfg.critical_bits()).abs() < 1e-15);
        assert_eq!(capacity_grid(&cfg, 1.0, 2.0, 1), vec![cfg.critical_bits()]);
    }
}
