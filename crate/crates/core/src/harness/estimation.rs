//! Open-loop estimation over a real timing code.
//!
//! Each trial draws `X(0)`, encodes it once with a nested codebook and sends
//! the codeword through an exponential-delay channel. At `t_n = Γ n E(D)`
//! the decoder uses every symbol received so far, and the error
//! `|X(t_n) - X̂(t_n)| = e^{a t_n} |X(0) - X̂(0)|` is recorded exactly.

use std::collections::BTreeMap;
use std::f64::consts::E;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::capped_columns;
use crate::capacity::{capacity_exponential, mutual_information};
use crate::channel::{count_received_by, transmit, DelayModel};
use crate::codec::{ml_decode_prefix, Codebook, DecodeSchedule, Layout};
use crate::dist::DiscretizedDist;
use crate::error::{config, Error, Result};
use crate::quantizer::{path_prefix, InitialCondition};
use crate::rng::{mix, substream, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationConfig {
    /// Continuous-time growth rate.
    pub a: f64,
    pub l: f64,
    /// `E(S)` of the exponential service delay.
    pub mean_s: f64,
    /// Ratio `t_n / (n E(D))`.
    pub gamma: f64,
    pub epsilons: Vec<f64>,
    /// Coding rates as fractions of the channel capacity.
    pub rate_fractions: Vec<f64>,
    pub n_values: Vec<u32>,
    pub trials: u64,
    pub seed: u64,
    pub max_depth: u32,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            a: 0.15,
            l: 1.0,
            mean_s: 1.0,
            gamma: 1.1,
            epsilons: vec![0.1],
            rate_fractions: vec![0.8, 1.5],
            n_values: vec![2, 4, 6, 8],
            trials: 1000,
            seed: 1,
            max_depth: 18,
        }
    }
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(config(format!("a must be nonnegative, got {}", self.a)));
        }
        if !(self.l > 0.0 && self.mean_s > 0.0 && self.gamma > 0.0) {
            return Err(config("l, mean_s and gamma must be positive"));
        }
        if self.epsilons.is_empty() || self.rate_fractions.is_empty() || self.n_values.is_empty() {
            return Err(config("epsilons, rate_fractions and n_values must be nonempty"));
        }
        if self.rate_fractions.iter().any(|r| !(*r > 0.0)) || self.n_values.contains(&0) {
            return Err(config("rate fractions and n values must be positive"));
        }
        if self.trials == 0 {
            return Err(config("need at least one trial"));
        }
        Ok(())
    }

    /// Parses a flat TOML table; absent keys keep their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn mean_d(&self) -> f64 {
        E * self.mean_s
    }

    /// Quantizer bits kept for the mutual-information estimate, so that the
    /// joint table has at most `trials / 4` cells.
    pub fn mi_bits(&self) -> u32 {
        let mut bits = 1;
        while 4u64.pow(bits + 1) * 4 <= self.trials && bits < 8 {
            bits += 1;
        }
        bits
    }
}

/// One `(rate, n, ε)` cell of the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationRow {
    pub rate_fraction: f64,
    pub rate_nats: f64,
    pub n: u32,
    pub t_n: f64,
    pub epsilon: f64,
    pub trials: u64,
    pub exceed: u64,
    pub exceed_fraction: f64,
    pub mean_received: f64,
    pub max_received: u32,
    /// Miller-Madow plug-in `I(Q(X(0)); Q(X̂(0)))` in nats.
    pub mi_plugin: f64,
    pub mi_std_error: f64,
    /// `κ I(W; W + S)` with `κ` the largest number of symbols any trial used.
    pub mi_bound: f64,
}

struct Trial {
    error: f64,
    #[cfg(test)]
    correct: bool,
    #[cfg(test)]
    depth: u32,
    received: u32,
    truth: u64,
    decoded: (u32, u64),
}

/// Plug-in mutual information with the Miller-Madow correction and a
/// delta-method standard error.
pub fn plugin_mutual_information(pairs: &[(u64, (u32, u64))]) -> (f64, f64) {
    let n = pairs.len() as f64;
    let mut joint: BTreeMap<(u64, (u32, u64)), f64> = BTreeMap::new();
    let mut px: BTreeMap<u64, f64> = BTreeMap::new();
    let mut py: BTreeMap<(u32, u64), f64> = BTreeMap::new();
    for &(x, y) in pairs {
        *joint.entry((x, y)).or_default() += 1.0;
        *px.entry(x).or_default() += 1.0;
        *py.entry(y).or_default() += 1.0;
    }
    let h = |counts: &mut dyn Iterator<Item = f64>| -> (f64, usize) {
        let mut acc = 0.0;
        let mut bins = 0;
        for c in counts {
            let p = c / n;
            acc -= p * p.ln();
            bins += 1;
        }
        (acc + (bins as f64 - 1.0) / (2.0 * n), bins)
    };
    let (hx, _) = h(&mut px.values().copied());
    let (hy, _) = h(&mut py.values().copied());
    let (hxy, _) = h(&mut joint.values().copied());
    let mi = (hx + hy - hxy).max(0.0);
    // variance of the pointwise information ln p(x,y) / (p(x) p(y))
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for (&(x, y), &c) in &joint {
        let pmi = (c * n / (px[&x] * py[&y])).ln();
        m1 += c / n * pmi;
        m2 += c / n * pmi * pmi;
    }
    let se = ((m2 - m1 * m1).max(0.0) / n).sqrt();
    (mi, se)
}

/// Mutual information carried by one symbol when `W` follows the
/// capacity-achieving mixture, from a fine discretization.
pub fn symbol_information(mean_s: f64) -> Result<f64> {
    let step = mean_s / 100.0;
    let w = DiscretizedDist::mixture_ceil(mean_s, step, 30.0 * mean_s)?;
    let s = DiscretizedDist::exponential_ceil(mean_s, step, 30.0 * mean_s)?;
    mutual_information(&w, &s)
}

fn run_trial(
    cfg: &EstimationConfig,
    schedule: DecodeSchedule,
    cols: u32,
    t_n: f64,
    mi_bits: u32,
    seed: u64,
) -> Result<Trial> {
    let x0 = InitialCondition::sample(cfg.l, cfg.max_depth + 64, &mut substream(seed, Purpose::InitialState, 0))?;
    let codebook = Codebook::generate(
        cols,
        schedule,
        Layout::Nested,
        cfg.mean_s,
        mix(seed, Purpose::Codebook as u64),
        cfg.max_depth,
    )?;
    let row = x0.path(codebook.depth()).index().expect("capped depth fits u64");
    let model = DelayModel::Exponential { mean: cfg.mean_s };
    let trace = transmit(&codebook.row(row), &model, &mut substream(seed, Purpose::Delays, 0))?;
    let k = count_received_by(&trace, t_n);
    let path = ml_decode_prefix(&codebook, &trace.inter_reception[..k], &model)?;
    let error = x0.offset_from(&path).scaled(cfg.a * t_n).abs();
    let shown = path.depth().min(mi_bits);
    Ok(Trial {
        error,
        #[cfg(test)]
        correct: path == x0.path(path.depth()),
        #[cfg(test)]
        depth: path.depth(),
        received: k as u32,
        truth: x0.path(mi_bits).index().expect("few bits"),
        decoded: (shown, path_prefix(&path, shown)?.index().expect("few bits")),
    })
}

/// Runs every `(rate, n)` cell; rows are ordered by rate, then `n`, then `ε`.
pub fn estimation_experiment(cfg: &EstimationConfig) -> Result<Vec<EstimationRow>> {
    cfg.validate()?;
    let capacity = capacity_exponential(cfg.mean_s)?;
    let per_symbol = symbol_information(cfg.mean_s)?;
    let mi_bits = cfg.mi_bits();
    let mut rows = Vec::new();
    for (ri, &fraction) in cfg.rate_fractions.iter().enumerate() {
        let rate = fraction * capacity;
        let schedule = DecodeSchedule::new(rate, cfg.mean_d())?;
        let cols = capped_columns(&schedule, cfg.max_depth)?;
        for (ni, &n) in cfg.n_values.iter().enumerate() {
            let t_n = cfg.gamma * n as f64 * cfg.mean_d();
            let cell_seed = mix(mix(cfg.seed, ri as u64), ni as u64);
            let trials: Vec<Trial> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| run_trial(cfg, schedule, cols, t_n, mi_bits, mix(cell_seed, t)))
                .collect::<Result<_>>()
                .map_err(|e| match e {
                    Error::DecodeFailure => Error::Domain("transmitted codeword became infeasible".into()),
                    other => other,
                })?;
            let pairs: Vec<_> = trials.iter().map(|t| (t.truth, t.decoded)).collect();
            let (mi, se) = plugin_mutual_information(&pairs);
            let max_received = trials.iter().map(|t| t.received).max().unwrap_or(0);
            let mean_received =
                trials.iter().map(|t| t.received as f64).sum::<f64>() / cfg.trials as f64;
            for &epsilon in &cfg.epsilons {
                let exceed = trials.iter().filter(|t| t.error > epsilon).count() as u64;
                rows.push(EstimationRow {
                    rate_fraction: fraction,
                    rate_nats: rate,
                    n,
                    t_n,
                    epsilon,
                    trials: cfg.trials,
                    exceed,
                    exceed_fraction: exceed as f64 / cfg.trials as f64,
                    mean_received,
                    max_received,
                    mi_plugin: mi,
                    mi_std_error: se,
                    mi_bound: max_received as f64 * per_symbol,
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plugin_mi_of_independent_and_identical_variables() {
        let same: Vec<_> = (0..4000u64).map(|i| (i % 4, (2, i % 4))).collect();
        let (mi, _) = plugin_mutual_information(&same);
        assert!((mi - 4f64.ln()).abs() < 0.01, "{mi}");
        let indep: Vec<_> = (0..4000u64).map(|i| (i % 4, (2, (i / 4) % 4))).collect();
        let (mi, _) = plugin_mutual_information(&indep);
        assert!(mi < 0.01, "{mi}");
    }

    #[test]
    fn shipped_config_matches_the_defaults() {
        let text = include_str!("../../../../configs/estimation.toml");
        assert_eq!(EstimationConfig::from_toml_str(text).unwrap(), EstimationConfig::default());
        assert!(EstimationConfig::from_toml_str("trials = 0").is_err());
        assert!(EstimationConfig::from_toml_str("nope = 1").is_err());
    }

    #[test]
    fn one_symbol_carries_about_one_nat() {
        let i = symbol_information(1.0).unwrap();
        assert!(i > 0.95 && i < 1.01, "{i}");
    }

    #[test]
    fn without_growth_correct_decodes_meet_the_cell_bound() {
        let cfg = EstimationConfig {
            a: 0.0,
            rate_fractions: vec![0.3],
            n_values: vec![3],
            trials: 200,
            epsilons: vec![0.5],
            ..EstimationConfig::default()
        };
        let rate = 0.3 * capacity_exponential(1.0).unwrap();
        let schedule = DecodeSchedule::new(rate, cfg.mean_d()).unwrap();
        let cols = capped_columns(&schedule, cfg.max_depth).unwrap();
        let t_n = cfg.gamma * 3.0 * cfg.mean_d();
        let mut correct = 0;
        for s in 0..200 {
            let t = run_trial(&cfg, schedule, cols, t_n, 3, s).unwrap();
            assert_eq!(t.depth, schedule.bits_after(t.received.min(cols)));
            if t.correct {
                correct += 1;
                assert!(t.error <= cfg.l / 2f64.powi(t.depth as i32));
            }
        }
        assert!(correct > 100, "{correct}");
        let rows = estimation_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].mi_plugin <= rows[0].mi_bound + 3.0 * rows[0].mi_std_error);
    }

    #[test]
    fn config_checks_and_mi_bits() {
        assert!(EstimationConfig::default().validate().is_ok());
        assert!(EstimationConfig { n_values: vec![], ..Default::default() }.validate().is_err());
        assert!(EstimationConfig { a: -1.0, ..Default::default() }.validate().is_err());
        assert_eq!(EstimationConfig::default().mi_bits(), 3);
        assert_eq!(EstimationConfig { trials: 10, ..Default::default() }.mi_bits(), 1);
    }

    #[test]
    fn experiment_is_deterministic() {
        let cfg = EstimationConfig { trials: 60, n_values: vec![2, 3], ..Default::default() };
        assert_eq!(estimation_experiment(&cfg).unwrap(), estimation_experiment(&cfg).unwrap());
    }
}
