//! Random timing codebook, one-time encoding and the anytime ML decoder.
//!
//! Two layouts share one representation. In the flat layout every entry of
//! the `2^{n'} x n` matrix is an independent draw from the
//! capacity-achieving mixture. In the nested layout column `i` (0-based) is
//! indexed by the first `n'_{i+1}` bits of the quantizer path, where
//! `n'_k = ceil(k R E(D))` counts bits; the first `k` symbols of any row then
//! depend only on its depth-`n'_k` prefix, which is what a one-time encoding
//! of the infinite codeword needs.
//!
//! Entries are never stored. Entry `(col, idx)` is the mixture inverse CDF
//! applied to a hash of `(seed, col, idx)`, so a codebook costs nothing to
//! build and the decoder evaluates only the entries it visits.

use std::collections::HashSet;
use std::f64::consts::LN_2;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{transmit, DelayModel, MixtureWaitingTime};
use crate::error::{config, domain, Error, Result};
use crate::quantizer::{dequantize, quantize, BitPath};
use crate::rng::{mix, substream, Purpose};

/// Default cap on the codebook depth `n'` (65536 rows).
pub const DEFAULT_MAX_DEPTH: u32 = 16;

/// Hard ceiling on any depth we are willing to allocate tables for.
const ABSOLUTE_MAX_DEPTH: u32 = 30;

/// Snap tolerance for `ceil` when `k R E(D)` lands on an integer up to rounding.
const CEIL_SNAP: f64 = 1e-9;

fn snapped_ceil(x: f64) -> u32 {
    let r = x.round();
    if (x - r).abs() <= CEIL_SNAP * r.abs().max(1.0) {
        r as u32
    } else {
        x.ceil() as u32
    }
}

/// Source-channel schedule: after `n` received symbols the decoder can
/// resolve `n' = ceil(n * bits_per_symbol)` quantizer bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeSchedule {
    /// `R E(D) / ln 2`: bits carried per symbol.
    bits_per_symbol: f64,
    /// `E(D)` in seconds.
    mean_d: f64,
}

impl DecodeSchedule {
    /// Schedule for rate `rate_nats` (nats per second) and mean
    /// inter-reception time `mean_d`.
    pub fn new(rate_nats: f64, mean_d: f64) -> Result<Self> {
        if !(rate_nats > 0.0 && rate_nats.is_finite()) {
            return Err(domain(format!("rate must be positive, got {rate_nats}")));
        }
        if !(mean_d > 0.0 && mean_d.is_finite()) {
            return Err(domain(format!("E(D) must be positive, got {mean_d}")));
        }
        Ok(Self { bits_per_symbol: rate_nats * mean_d / LN_2, mean_d })
    }

    /// Schedule that resolves exactly `n_prime` bits after `n` symbols.
    pub fn from_counts(n: u32, n_prime: u32, mean_d: f64) -> Result<Self> {
        if n == 0 || n_prime == 0 {
            return Err(domain(format!("need n >= 1 and n' >= 1, got n={n}, n'={n_prime}")));
        }
        let rate = n_prime as f64 * LN_2 / (n as f64 * mean_d);
        let s = Self::new(rate, mean_d)?;
        Ok(Self { bits_per_symbol: n_prime as f64 / n as f64, ..s })
    }

    /// `R` in nats per second.
    pub fn rate_nats(&self) -> f64 {
        self.bits_per_symbol * LN_2 / self.mean_d
    }

    pub fn mean_d(&self) -> f64 {
        self.mean_d
    }

    pub fn bits_per_symbol(&self) -> f64 {
        self.bits_per_symbol
    }

    /// `n'` after `n` symbols.
    pub fn bits_after(&self, n: u32) -> u32 {
        snapped_ceil(n as f64 * self.bits_per_symbol)
    }

    /// Smallest `n` whose `n'` reaches `n_prime` bits.
    pub fn symbols_for(&self, n_prime: u32) -> u32 {
        let mut n = snapped_ceil(n_prime as f64 / self.bits_per_symbol);
        while n > 0 && self.bits_after(n - 1) >= n_prime {
            n -= 1;
        }
        while self.bits_after(n) < n_prime {
            n += 1;
        }
        n
    }

    /// `(n, n')` for `n = 1..=n_max`.
    pub fn pairs(&self, n_max: u32) -> Vec<(u32, u32)> {
        (1..=n_max).map(|n| (n, self.bits_after(n))).collect()
    }
}

/// How codebook columns relate to the quantizer path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Independent entries for every row and column.
    #[default]
    Flat,
    /// Column `i` depends only on the first `n'_{i+1}` path bits.
    Nested,
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Hashed { keys: Vec<u64>, law: MixtureWaitingTime },
    Explicit(Vec<Vec<f64>>),
}

/// Random timing codebook with `2^{n'}` rows and `n` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    schedule: DecodeSchedule,
    layout: Layout,
    /// Path bits that index column `i`.
    depths: Vec<u32>,
    storage: Storage,
    mean_s: f64,
    seed: u64,
}

impl Codebook {
    /// Codebook for `cols` symbols under `schedule`.
    pub fn generate(
        cols: u32,
        schedule: DecodeSchedule,
        layout: Layout,
        mean_s: f64,
        seed: u64,
        max_depth: u32,
    ) -> Result<Self> {
        if cols == 0 {
            return Err(domain("codebook needs at least one column"));
        }
        let law = MixtureWaitingTime::new(mean_s)?;
        let depth = schedule.bits_after(cols);
        check_depth(depth, max_depth)?;
        let depths: Vec<u32> = match layout {
            Layout::Flat => vec![depth; cols as usize],
            Layout::Nested => (1..=cols).map(|k| schedule.bits_after(k)).collect(),
        };
        let base = mix(seed, Purpose::Codebook as u64);
        let keys = (0..cols as u64).map(|c| mix(base, c)).collect();
        Ok(Self { schedule, layout, depths, storage: Storage::Hashed { keys, law }, mean_s, seed })
    }

    /// Flat codebook from explicit rows; the row count must be a power of two.
    pub fn from_rows(rows: Vec<Vec<f64>>, mean_s: f64) -> Result<Self> {
        if !rows.len().is_power_of_two() {
            return Err(domain(format!("{} rows is not a power of two", rows.len())));
        }
        let cols = rows[0].len();
        if cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(domain("rows must be nonempty and of equal length"));
        }
        if rows.iter().flatten().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(domain("waiting times must be finite and nonnegative"));
        }
        let depth = rows.len().trailing_zeros();
        let mean_d = std::f64::consts::E * mean_s;
        let schedule = DecodeSchedule { bits_per_symbol: depth as f64 / cols as f64, mean_d };
        Ok(Self {
            schedule,
            layout: Layout::Flat,
            depths: vec![depth; cols],
            storage: Storage::Explicit(rows),
            mean_s,
            seed: 0,
        })
    }

    pub fn cols(&self) -> usize {
        self.depths.len()
    }

    /// `n'`, the bit depth of a full row.
    pub fn depth(&self) -> u32 {
        *self.depths.last().expect("codebook has columns")
    }

    pub fn rows(&self) -> u64 {
        1u64 << self.depth()
    }

    /// Bits resolved by the first `k` columns.
    pub fn depth_after(&self, k: usize) -> u32 {
        if k == 0 {
            0
        } else {
            self.depths[k - 1]
        }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn schedule(&self) -> &DecodeSchedule {
        &self.schedule
    }

    pub fn mean_s(&self) -> f64 {
        self.mean_s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Entry of column `col` for the depth-`depths[col]` prefix `idx`.
    #[inline]
    fn cell(&self, col: usize, idx: u64) -> f64 {
        match &self.storage {
            Storage::Hashed { keys, law } => law.from_uniform(to_unit(mix(keys[col], idx)), self.mean_s),
            Storage::Explicit(rows) => rows[idx as usize][col],
        }
    }

    /// Hash words above this bound map to waiting times above `d`. The bound
    /// carries a small margin, so it only screens; callers still compare
    /// the waiting time itself.
    fn screen(&self, d: f64) -> u64 {
        if d < 0.0 {
            return 0;
        }
        let tail = -(-d / (std::f64::consts::E * self.mean_s)).exp_m1();
        let cdf = MixtureWaitingTime::ZERO_MASS + (1.0 - MixtureWaitingTime::ZERO_MASS) * tail;
        if cdf + 1e-9 >= 1.0 {
            u64::MAX
        } else {
            (((cdf + 1e-9) * UNIT).ceil() as u64) << 11 | 0x7FF
        }
    }

    /// `w_{col, row}`.
    pub fn entry(&self, row: u64, col: usize) -> f64 {
        self.cell(col, row >> (self.depth() - self.depths[col]))
    }

    /// Full codeword of `row`.
    pub fn row(&self, row: u64) -> Vec<f64> {
        (0..self.cols()).map(|c| self.entry(row, c)).collect()
    }

    /// First `k` symbols of the codeword selected by a path of depth at
    /// least `n'_k`.
    pub fn prefix_codeword(&self, path: &BitPath, k: usize) -> Result<Vec<f64>> {
        if k > self.cols() {
            return Err(domain(format!("asked for {k} symbols from {} columns", self.cols())));
        }
        let need = self.depth_after(k);
        if path.depth() < need {
            return Err(domain(format!("path of depth {} cannot select {need} bits", path.depth())));
        }
        let bits = path.bits();
        Ok((0..k)
            .map(|c| {
                let idx = bits[..self.depths[c] as usize]
                    .iter()
                    .fold(0u64, |acc, &b| (acc << 1) | b as u64);
                self.cell(c, idx)
            })
            .collect())
    }

    /// Every independent draw in the codebook, column by column.
    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.cols()).flat_map(move |c| (0..1u64 << self.depths[c]).map(move |i| self.cell(c, i)))
    }

    /// Lowest pair of identical rows, if any. Identical rows have positive
    /// probability because of the atom at zero; the decoder resolves such
    /// ties toward the lower index.
    pub fn first_duplicate_rows(&self) -> Option<(u64, u64)> {
        let mut seen = std::collections::HashMap::new();
        for r in 0..self.rows() {
            let key: Vec<u64> = self.row(r).iter().map(|w| w.to_bits()).collect();
            if let Some(&first) = seen.get(&key) {
                return Some((first, r));
            }
            seen.insert(key, r);
        }
        None
    }

    /// Number of distinct rows.
    pub fn distinct_rows(&self) -> usize {
        (0..self.rows())
            .map(|r| self.row(r).iter().map(|w| w.to_bits()).collect::<Vec<_>>())
            .collect::<HashSet<_>>()
            .len()
    }
}

const UNIT: f64 = (1u64 << 53) as f64;

fn to_unit(h: u64) -> f64 {
    (h >> 11) as f64 / UNIT
}

fn check_depth(depth: u32, max_depth: u32) -> Result<()> {
    let cap = max_depth.min(ABSOLUTE_MAX_DEPTH);
    if depth > cap {
        return Err(Error::Resource(format!("codebook depth n'={depth} exceeds the cap of {cap} bits")));
    }
    Ok(())
}

/// Flat `2^{n_prime} x n` codebook of i.i.d. mixture draws.
pub fn build_codebook(n: u32, n_prime: u32, mean_s: f64, seed: u64) -> Result<Codebook> {
    build_codebook_with(n, n_prime, mean_s, seed, Layout::Flat, DEFAULT_MAX_DEPTH)
}

/// Codebook with `n` columns, `n_prime` bits per full row, the given
/// layout and depth cap.
pub fn build_codebook_with(
    n: u32,
    n_prime: u32,
    mean_s: f64,
    seed: u64,
    layout: Layout,
    max_depth: u32,
) -> Result<Codebook> {
    if !(mean_s > 0.0 && mean_s.is_finite()) {
        return Err(domain(format!("E(S) must be positive, got {mean_s}")));
    }
    let schedule = DecodeSchedule::from_counts(n, n_prime, std::f64::consts::E * mean_s)?;
    Codebook::generate(n, schedule, layout, mean_s, seed, max_depth)
}

/// Waiting-time sequence for `x0`: the codeword of the row named by its
/// depth-`n'` quantizer path.
pub fn encode(x0: f64, l: f64, codebook: &Codebook) -> Result<Vec<f64>> {
    let path = quantize(x0, l, codebook.depth())?;
    Ok(codebook.row(path.index().expect("depth is capped below 64")))
}

/// Subtracts the known part of the delay and rejects laws the decoder does
/// not cover.
fn waiting_budget(inter_reception: &[f64], model: &DelayModel) -> Result<Vec<f64>> {
    model.validate()?;
    match *model {
        DelayModel::Exponential { .. } => Ok(inter_reception.to_vec()),
        DelayModel::Degenerate { value } => Ok(inter_reception.iter().map(|d| d - value).collect()),
        DelayModel::Geometric { .. } => Err(config(
            "ML decoding covers exponential and constant delays; use abstract-error mode for geometric delays",
        )),
    }
}

struct Search<'a> {
    cb: &'a Codebook,
    budget: &'a [f64],
    /// `suffix[i] = budget[i] + ... + budget[k-1]`
    suffix: Vec<f64>,
    /// Per-column screening bounds on the raw hash word.
    screens: Vec<u64>,
    slack: f64,
    best_sum: f64,
    best: Option<u64>,
}

impl Search<'_> {
    fn visit(&mut self, col: usize, prefix: u64, acc: f64) {
        if col == self.budget.len() {
            if self.best.is_none() || acc > self.best_sum {
                self.best_sum = acc;
                self.best = Some(prefix);
            }
            return;
        }
        if self.best.is_some() && acc + self.suffix[col] + self.slack <= self.best_sum {
            return;
        }
        let grow = self.cb.depths[col] - self.cb.depth_after(col);
        let base = prefix << grow;
        let d = self.budget[col];
        let tol = 4.0 * f64::EPSILON * d.abs();
        let children = base..base + (1u64 << grow);
        match &self.cb.storage {
            Storage::Hashed { keys, law } => {
                let key = keys[col];
                let bound = self.screens[col];
                for child in children {
                    let h = mix(key, child);
                    if h > bound {
                        continue;
                    }
                    let w = law.from_uniform(to_unit(h), self.cb.mean_s);
                    if w <= d + tol {
                        self.visit(col + 1, child, acc + w);
                    }
                }
            }
            Storage::Explicit(_) => {
                for child in children {
                    let w = self.cb.cell(col, child);
                    if w <= d + tol {
                        self.visit(col + 1, child, acc + w);
                    }
                }
            }
        }
    }
}

/// Row-by-row search for the flat layout. Hash screening rejects most rows
/// after a column or two without evaluating a waiting time.
fn scan_flat(
    cb: &Codebook,
    keys: &[u64],
    law: &MixtureWaitingTime,
    budget: &[f64],
    screens: &[u64],
) -> Result<BitPath> {
    let k = budget.len();
    let mut best: Option<(u64, f64)> = None;
    'rows: for row in 0..cb.rows() {
        for c in 0..k {
            if mix(keys[c], row) > screens[c] {
                continue 'rows;
            }
        }
        let mut acc = 0.0;
        for c in 0..k {
            let w = law.from_uniform(to_unit(mix(keys[c], row)), cb.mean_s);
            if w > budget[c] + 4.0 * f64::EPSILON * budget[c].abs() {
                continue 'rows;
            }
            acc += w;
        }
        if best.is_none_or(|(_, b)| acc > b) {
            best = Some((row, acc));
        }
    }
    best.map(|(row, _)| BitPath::from_index(row, cb.depth())).ok_or(Error::DecodeFailure)
}

/// Maximum-likelihood prefix from the first `k = inter_reception.len()`
/// symbols. Returns the depth-`n'_k` bit path. Among feasible rows
/// (`w_i <= D_i` for every observed symbol) the exponential likelihood is
/// increasing in `sum_i w_i`; ties go to the lowest index.
pub fn ml_decode_prefix(
    codebook: &Codebook,
    inter_reception: &[f64],
    model: &DelayModel,
) -> Result<BitPath> {
    let k = inter_reception.len();
    if k > codebook.cols() {
        return Err(domain(format!(
            "{k} observations for a codebook with {} columns",
            codebook.cols()
        )));
    }
    let budget = waiting_budget(inter_reception, model)?;
    let mut suffix = vec![0.0; k + 1];
    for i in (0..k).rev() {
        suffix[i] = suffix[i + 1] + budget[i].max(0.0);
    }
    let slack = 1e-9 * (1.0 + suffix[0]);
    let screens: Vec<u64> =
        budget.iter().map(|&d| codebook.screen(d + 4.0 * f64::EPSILON * d.abs())).collect();
    if let (Layout::Flat, Storage::Hashed { keys, law }) = (codebook.layout, &codebook.storage) {
        if k > 0 {
            return scan_flat(codebook, keys, law, &budget, &screens);
        }
    }
    let mut search =
        Search { cb: codebook, budget: &budget, suffix, screens, slack, best_sum: 0.0, best: None };
    search.visit(0, 0, 0.0);
    match search.best {
        Some(idx) => Ok(BitPath::from_index(idx, codebook.depth_after(k))),
        None => Err(Error::DecodeFailure),
    }
}

/// Full-row ML decode; `inter_reception` must cover every column.
pub fn ml_decode(codebook: &Codebook, inter_reception: &[f64], model: &DelayModel) -> Result<u64> {
    if inter_reception.len() != codebook.cols() {
        return Err(domain(format!(
            "full decode needs {} observations, got {}",
            codebook.cols(),
            inter_reception.len()
        )));
    }
    let path = ml_decode_prefix(codebook, inter_reception, model)?;
    Ok(path.index().expect("depth is capped below 64"))
}

/// Decoded estimate of the initial state: the midpoint of the decoded cell.
pub fn decode_initial_state(
    codebook: &Codebook,
    inter_reception: &[f64],
    model: &DelayModel,
    l: f64,
) -> Result<f64> {
    let path = ml_decode_prefix(codebook, inter_reception, model)?;
    Ok(dequantize(&path, l))
}

/// Whether each trial draws its own codebook.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookMode {
    /// A fresh codebook per trial: the random-coding average.
    #[default]
    Fresh,
    /// One codebook shared by every trial.
    Fixed,
}

/// Parameters of an error-rate measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRateSpec {
    pub n: u32,
    pub n_prime: u32,
    pub mean_s: f64,
    pub delay: DelayModel,
    pub trials: u64,
    pub seed: u64,
    pub mode: CodebookMode,
    pub layout: Layout,
    pub max_depth: u32,
}

impl ErrorRateSpec {
    /// Exponential delays with mean `mean_s`, fresh codebooks, default cap.
    pub fn new(n: u32, n_prime: u32, mean_s: f64, trials: u64, seed: u64) -> Self {
        Self {
            n,
            n_prime,
            mean_s,
            delay: DelayModel::Exponential { mean: mean_s },
            trials,
            seed,
            mode: CodebookMode::Fresh,
            layout: Layout::Flat,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }

    /// Rate in nats per second, `n' ln 2 / (n E(D))` with `E(D) = e E(S)`.
    pub fn rate_nats(&self) -> f64 {
        self.n_prime as f64 * LN_2 / (self.n as f64 * std::f64::consts::E * self.mean_s)
    }
}

/// Outcome of an error-rate measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRate {
    pub trials: u64,
    pub errors: u64,
}

impl ErrorRate {
    pub fn rate(&self) -> f64 {
        self.errors as f64 / self.trials as f64
    }

    /// Binomial standard error of [`ErrorRate::rate`].
    pub fn std_error(&self) -> f64 {
        let p = self.rate();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Empirical probability that the ML decoder misses the transmitted row.
/// Decode failures count as errors.
pub fn measure_error_rate(spec: &ErrorRateSpec) -> Result<ErrorRate> {
    if spec.trials == 0 {
        return Err(domain("need at least one trial"));
    }
    spec.delay.validate()?;
    let build = |seed| {
        build_codebook_with(spec.n, spec.n_prime, spec.mean_s, seed, spec.layout, spec.max_depth)
    };
    // fails early on a bad spec even in fresh mode
    let first = build(spec.seed)?;
    let shared = (spec.mode == CodebookMode::Fixed).then_some(first);
    let errors = (0..spec.trials)
        .into_par_iter()
        .map(|t| -> Result<u64> {
            let trial_seed = mix(spec.seed, t);
            let owned;
            let cb = match &shared {
                Some(cb) => cb,
                None => {
                    owned = build(trial_seed)?;
                    &owned
                }
            };
            let mut rng = substream(trial_seed, Purpose::Trial, 0);
            let sent = rng.random_range(0..cb.rows());
            let mut delays = substream(trial_seed, Purpose::Delays, 0);
            let trace = transmit(&cb.row(sent), &spec.delay, &mut delays)?;
            match ml_decode(cb, &trace.inter_reception, &spec.delay) {
                Ok(got) => Ok((got != sent) as u64),
                Err(Error::DecodeFailure) => Ok(1),
                Err(e) => Err(e),
            }
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(ErrorRate { trials: spec.trials, errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EXP1: DelayModel = DelayModel::Exponential { mean: 1.0 };

    /// Exhaustive ML over every row: feasible rows only, largest sum wins,
    /// first index on ties.
    fn brute_force(cb: &Codebook, d: &[f64]) -> Option<u64> {
        let mut best: Option<(u64, f64)> = None;
        for r in 0..cb.rows() {
            let row = cb.row(r);
            if row.iter().zip(d).all(|(w, d)| *w <= *d) {
                let s: f64 = row.iter().sum();
                if !matches!(best, Some((_, b)) if s <= b) {
                    best = Some((r, s));
                }
            }
        }
        best.map(|(r, _)| r)
    }

    fn hand_codebook(rows: &[&[f64]]) -> Codebook {
        Codebook::from_rows(rows.iter().map(|r| r.to_vec()).collect(), 1.0).unwrap()
    }

    #[test]
    fn schedule_counts() {
        let s = DecodeSchedule::from_counts(8, 12, 2.0).unwrap();
        assert_eq!(s.pairs(4), vec![(1, 2), (2, 3), (3, 5), (4, 6)]);
        assert_eq!(s.bits_after(8), 12);
        for np in 1..=12 {
            let n = s.symbols_for(np);
            assert!(s.bits_after(n) >= np);
            assert!(n == 0 || s.bits_after(n - 1) < np);
        }
        let r = DecodeSchedule::new(s.rate_nats(), 2.0).unwrap();
        assert_eq!(r.bits_after(8), 12);
        assert!(DecodeSchedule::new(0.0, 1.0).is_err());
    }

    #[test]
    fn codebook_shape_and_determinism() {
        let a = build_codebook(4, 6, 1.0, 11).unwrap();
        assert_eq!(a.rows(), 64);
        assert_eq!(a.cols(), 4);
        assert!(a.entries().all(|w| w >= 0.0));
        assert_eq!(a, build_codebook(4, 6, 1.0, 11).unwrap());
        assert_ne!(a, build_codebook(4, 6, 1.0, 12).unwrap());
        let b = build_codebook(1, 1, 1.0, 3).unwrap();
        assert_eq!((b.rows(), b.cols()), (2, 1));
    }

    #[test]
    fn entries_follow_the_mixture_law() {
        let cb = build_codebook(2, 16, 2.0, 8).unwrap();
        let draws: Vec<f64> = cb.entries().collect();
        assert_eq!(draws.len(), 2 << 16);
        let zeros = draws.iter().filter(|w| **w == 0.0).count() as f64 / draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((zeros - (-1.0f64).exp()).abs() < 0.01, "zero fraction {zeros}");
        let want = (std::f64::consts::E - 1.0) * 2.0;
        assert!((mean - want).abs() < 0.02 * want, "mean {mean} vs {want}");
    }

    #[test]
    fn depth_cap_is_a_resource_error() {
        assert!(matches!(build_codebook(4, 17, 1.0, 0), Err(Error::Resource(_))));
        assert!(build_codebook_with(4, 17, 1.0, 0, Layout::Nested, 18).is_ok());
        assert!(build_codebook(0, 1, 1.0, 0).is_err());
        assert!(build_codebook(1, 1, 0.0, 0).is_err());
    }

    #[test]
    fn rows_sharing_a_prefix_share_leading_symbols() {
        let cb = build_codebook_with(6, 12, 1.0, 5, Layout::Nested, 16).unwrap();
        for k in 1..=6 {
            let d = cb.depth_after(k);
            for r in (0..cb.rows()).step_by(37) {
                let sibling = r ^ ((1u64 << (cb.depth() - d)) - 1);
                assert_eq!(cb.row(r)[..k], cb.row(sibling)[..k]);
            }
        }
    }

    #[test]
    fn encode_examples() {
        let cb = build_codebook(3, 3, 1.0, 9).unwrap();
        assert_eq!(encode(-0.99, 1.0, &cb).unwrap(), cb.row(0));
        assert_eq!(encode(0.3, 1.0, &cb).unwrap(), cb.row(5));
        assert!(encode(1.0, 1.0, &cb).is_err());
        // two points in the same depth-2 cell share the symbols that depth resolves
        let cb = build_codebook_with(6, 6, 1.0, 9, Layout::Nested, 16).unwrap();
        let (a, b) = (encode(0.30, 1.0, &cb).unwrap(), encode(0.45, 1.0, &cb).unwrap());
        let k = cb.schedule().symbols_for(2) as usize;
        assert_eq!(a[..k], b[..k]);
        let p = quantize(0.3, 1.0, 6).unwrap();
        assert_eq!(cb.prefix_codeword(&p, 6).unwrap(), a);
    }

    #[test]
    fn ml_decode_examples() {
        let single = hand_codebook(&[&[0.5, 0.5]]);
        assert_eq!(ml_decode(&single, &[1.0, 1.0], &EXP1).unwrap(), 0);
        let cb = hand_codebook(&[&[0.0, 2.0], &[1.0, 0.0]]);
        assert_eq!(ml_decode(&cb, &[1.5, 2.5], &EXP1).unwrap(), 0);
        let cb = hand_codebook(&[&[3.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(ml_decode(&cb, &[1.5, 2.5], &EXP1).unwrap(), 1);
        assert!(matches!(ml_decode(&cb, &[-1.0, 2.5], &EXP1), Err(Error::DecodeFailure)));
        let one = build_codebook(1, 1, 1.0, 0).unwrap();
        let w = one.row(0)[0].max(one.row(1)[0]);
        assert!(ml_decode(&one, &[w + 1.0], &EXP1).is_ok());
        assert!(ml_decode(&one, &[1.0, 2.0], &EXP1).is_err());
        assert!(matches!(
            ml_decode(&one, &[1.0], &DelayModel::Geometric { mean: 2.0 }),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn ties_go_to_the_lowest_row() {
        let cb = hand_codebook(&[&[1.0, 1.0], &[0.5, 1.5], &[2.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(ml_decode(&cb, &[3.0, 3.0], &EXP1).unwrap(), 0);
    }

    #[test]
    fn noiseless_channel_recovers_the_cell_midpoint() {
        let cb = build_codebook(3, 3, 1.0, 21).unwrap();
        let zero = DelayModel::Degenerate { value: 0.0 };
        let w = encode(0.3, 1.0, &cb).unwrap();
        if cb.distinct_rows() as u64 == cb.rows() {
            assert_eq!(decode_initial_state(&cb, &w, &zero, 1.0).unwrap(), 0.375);
        }
        // with duplicates the decoder still lands on a row with the same codeword
        let got = ml_decode(&cb, &w, &zero).unwrap();
        assert_eq!(cb.row(got), w);
        let shifted: Vec<f64> = w.iter().map(|x| x + 0.25).collect();
        let const_delay = DelayModel::Degenerate { value: 0.25 };
        assert_eq!(cb.row(ml_decode(&cb, &shifted, &const_delay).unwrap()), w);
    }

    #[test]
    fn anytime_prefix_decoding_refines() {
        let cb = build_codebook_with(8, 12, 1.0, 4, Layout::Nested, 16).unwrap();
        let sent = 0b1011_0010_0111u64;
        let mut rng = substream(1, Purpose::Delays, 0);
        let trace = transmit(&cb.row(sent), &EXP1, &mut rng).unwrap();
        let truth = BitPath::from_index(sent, 12);
        for k in 0..=8 {
            let p = ml_decode_prefix(&cb, &trace.inter_reception[..k], &EXP1).unwrap();
            assert_eq!(p.depth(), cb.depth_after(k));
            // the transmitted prefix is always feasible, so a path exists
            let true_prefix = crate::quantizer::path_prefix(&truth, p.depth()).unwrap();
            let sum = |q: &BitPath| cb.prefix_codeword(q, k).unwrap().iter().sum::<f64>();
            assert!(sum(&p) >= sum(&true_prefix));
        }
    }

    #[test]
    fn measured_rates_are_deterministic_and_zero_when_noiseless() {
        let spec = ErrorRateSpec::new(4, 4, 1.0, 200, 3);
        assert_eq!(measure_error_rate(&spec).unwrap(), measure_error_rate(&spec).unwrap());
        let mut fixed = spec.clone();
        fixed.mode = CodebookMode::Fixed;
        assert_eq!(measure_error_rate(&fixed).unwrap(), measure_error_rate(&fixed).unwrap());
        // a noiseless channel never errs on a codebook whose rows are distinct
        let mut noiseless = spec.clone();
        noiseless.delay = DelayModel::Degenerate { value: 0.0 };
        noiseless.mode = CodebookMode::Fixed;
        noiseless.seed = (0..)
            .find(|&s| {
                let cb = build_codebook(4, 4, 1.0, s).unwrap();
                cb.distinct_rows() as u64 == cb.rows()
            })
            .unwrap();
        assert_eq!(measure_error_rate(&noiseless).unwrap().errors, 0);
        let mut too_big = spec;
        too_big.n_prime = 40;
        assert!(matches!(measure_error_rate(&too_big), Err(Error::Resource(_))));
    }

    #[test]
    fn error_rate_examples() {
        let low = measure_error_rate(&ErrorRateSpec::new(12, 2, 1.0, 2000, 17)).unwrap();
        assert!(low.rate() < 0.1, "below-capacity rate {}", low.rate());
        let high = measure_error_rate(&ErrorRateSpec::new(4, 12, 1.0, 2000, 17)).unwrap();
        assert!(high.rate() > 0.5, "above-capacity rate {}", high.rate());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn branch_and_bound_matches_exhaustive_search(
            seed in any::<u64>(),
            n in 1u32..5,
            np in 1u32..9,
            sent_frac in 0.0f64..1.0,
            mean_s in 0.2f64..3.0,
            nested in any::<bool>(),
        ) {
            let layout = if nested { Layout::Nested } else { Layout::Flat };
            let cb = build_codebook_with(n, np, mean_s, seed, layout, 16).unwrap();
            let sent = ((sent_frac * cb.rows() as f64) as u64).min(cb.rows() - 1);
            let model = DelayModel::Exponential { mean: mean_s };
            let mut rng = substream(seed, Purpose::Delays, 0);
            let trace = transmit(&cb.row(sent), &model, &mut rng).unwrap();
            let got = ml_decode(&cb, &trace.inter_reception, &model).unwrap();
            prop_assert_eq!(Some(got), brute_force(&cb, &trace.inter_reception));
        }
    }
}
