//! Timing capacity and the information-theoretic condition checks.
//!
//! The capacity of the telephone signaling channel is
//! `sup_χ sup_{E(W) ≤ χ} I(W; W+S) / (E(S) + χ)`. For exponential service it
//! has the closed form `1 / (e E(S))`; for other laws
//! [`capacity_numeric`] discretizes `W` on a lattice and solves the inner
//! problem by a mean-constrained Blahut–Arimoto iteration.

use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::dist::{entropy, DiscretizedDist};
use crate::error::{domain, Result};

/// `1 / (e E(S))` nats per unit time.
pub fn capacity_exponential(mean_s: f64) -> Result<f64> {
    if !(mean_s > 0.0) {
        return Err(domain(format!(
            "exponential timing capacity needs E(S) > 0 (E(S) = {mean_s} gives infinite capacity)"
        )));
    }
    Ok(1.0 / (E * mean_s))
}

/// `I(W; W + S) = H(W + S) - H(S)` in nats, with the law of `W + S`
/// obtained by convolving the two distributions on their merged grid.
pub fn mutual_information(input: &DiscretizedDist, delay: &DiscretizedDist) -> Result<f64> {
    if input.is_empty() || delay.is_empty() {
        return Err(domain("mutual information of an empty distribution"));
    }
    let mut sums: Vec<(f64, f64)> = Vec::with_capacity(input.len() * delay.len());
    for (w, pw) in input.support().iter().zip(input.probs()) {
        for (s, ps) in delay.support().iter().zip(delay.probs()) {
            sums.push((w + s, pw * ps));
        }
    }
    sums.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<f64> = Vec::with_capacity(sums.len());
    let mut last = f64::NAN;
    for (v, p) in sums {
        if (v - last).abs() <= 1e-9 * (1.0 + v.abs()) {
            *merged.last_mut().unwrap() += p;
        } else {
            merged.push(p);
            last = v;
        }
    }
    Ok((entropy(&merged) - delay.entropy()).max(0.0))
}

/// Knobs for [`capacity_numeric`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityOptions {
    /// Lattice spacing of the input (and of the delay support).
    pub grid_step: f64,
    /// Convergence tolerance in nats: an inner solve stops once the
    /// Blahut–Arimoto bound gap, or the objective gain over the last
    /// [`STALL_WINDOW`] iterations, falls below it.
    pub tol: f64,
    /// Iteration cap per inner solve.
    pub max_iter: usize,
    /// Input support is truncated at this multiple of `χ`.
    pub support_multiple: f64,
    /// Golden-section steps used to refine the best grid `χ`.
    pub refine_steps: usize,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        Self { grid_step: 0.05, tol: 1e-6, max_iter: 20_000, support_multiple: 20.0, refine_steps: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    pub capacity_nats_per_sec: f64,
    pub optimal_chi: f64,
    pub optimal_input: DiscretizedDist,
    /// Mutual information per symbol at the optimum.
    pub information_nats: f64,
    /// Blahut–Arimoto iterations summed over all inner solves.
    pub iterations: usize,
    pub converged: bool,
    /// Blahut–Arimoto certificate gap (nats) of the reported law: the inner
    /// optimum exceeds the reported objective by at most this much.
    pub bound_gap: f64,
    /// Whether every inner iteration was nondecreasing in its objective.
    pub monotone: bool,
}

/// Iterations over which objective progress is measured for the stall test.
pub const STALL_WINDOW: usize = 25;

/// A default `χ` grid: geometric from `0.1 E(S)` to `5 E(S)`.
pub fn default_chi_grid(mean_s: f64, points: usize) -> Vec<f64> {
    let (lo, hi) = (0.1 * mean_s, 5.0 * mean_s);
    let points = points.max(2);
    (0..points)
        .map(|i| lo * (hi / lo).powf(i as f64 / (points - 1) as f64))
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// The channel `D = W + S` on the integer lattice.
struct LatticeChannel {
    delay: Vec<f64>,
    neg_entropy: f64,
    step: f64,
}

/// One Blahut–Arimoto solution for a fixed multiplier.
struct Inner {
    input: Vec<f64>,
    gap: f64,
    information: f64,
    mean: f64,
    iterations: usize,
    converged: bool,
    monotone: bool,
}

impl LatticeChannel {
    fn new(delay: &DiscretizedDist, step: f64) -> Result<Self> {
        let idx = delay.lattice_indices(step).ok_or_else(|| {
            domain(format!("delay support is not on the lattice of spacing {step}"))
        })?;
        let mut dense = vec![0.0; idx.last().copied().unwrap_or(0) + 1];
        for (k, p) in idx.iter().zip(delay.probs()) {
            dense[*k] += p;
        }
        // drop leading zeros: a constant shift of S changes nothing but E(S)
        let first = dense.iter().position(|p| *p > 0.0).unwrap_or(0);
        dense.drain(..first);
        let neg_entropy = -entropy(&dense);
        Ok(Self { delay: dense, neg_entropy, step })
    }

    /// Per-input divergences `D(P_{D|W=w} || P_D)` and the output law.
    fn divergences(&self, input: &[f64], out: &mut Vec<f64>, div: &mut [f64]) {
        let ls = self.delay.len();
        out.clear();
        out.resize(input.len() + ls - 1, 0.0);
        for (w, &pw) in input.iter().enumerate() {
            let dst = &mut out[w..w + ls];
            for (o, ps) in dst.iter_mut().zip(&self.delay) {
                *o += pw * ps;
            }
        }
        for q in out.iter_mut() {
            *q = q.max(1e-300).ln();
        }
        for (w, d) in div.iter_mut().enumerate() {
            *d = self.neg_entropy - dot(&self.delay, &out[w..w + ls]);
        }
    }

    /// Maximizes `I(W; D) - s E(W)` over laws on `0..input.len()` lattice
    /// points, starting from `input`.
    fn solve(&self, mut input: Vec<f64>, s: f64, opts: &CapacityOptions) -> Inner {
        let n = input.len();
        let cost: Vec<f64> = (0..n).map(|w| s * w as f64 * self.step).collect();
        let mut out = Vec::new();
        let mut div = vec![0.0; n];
        let mut last_objective = f64::NEG_INFINITY;
        let mut monotone = true;
        let mut converged = false;
        let mut iterations = 0;
        let mut weights = vec![0.0; n];
        let mut history: Vec<f64> = Vec::new();
        let mut gap;
        loop {
            self.divergences(&input, &mut out, &mut div);
            let objective = dot(&input, &div) - dot(&input, &cost);
            if objective < last_objective - 1e-12 * (1.0 + last_objective.abs()) {
                monotone = false;
            }
            last_objective = objective;
            history.push(objective);
            let mut upper = f64::NEG_INFINITY;
            for w in 0..n {
                let g = div[w] - cost[w];
                upper = upper.max(g);
                weights[w] = g;
            }
            let z: f64 = input.iter().zip(&weights).map(|(p, g)| p * (g - upper).exp()).sum();
            let lower = upper + z.ln();
            gap = upper - lower;
            let stalled = history.len() > STALL_WINDOW
                && objective - history[history.len() - 1 - STALL_WINDOW] <= opts.tol;
            if gap <= opts.tol || stalled {
                converged = true;
                break;
            }
            if iterations >= opts.max_iter {
                break;
            }
            for (p, g) in input.iter_mut().zip(&weights) {
                *p *= (g - lower).exp();
            }
            let total: f64 = input.iter().sum();
            input.iter_mut().for_each(|p| *p /= total);
            iterations += 1;
        }
        let mean = self.step * input.iter().enumerate().map(|(w, p)| w as f64 * p).sum::<f64>();
        let information = dot(&input, &div);
        Inner { input, gap, information, mean, iterations, converged, monotone }
    }
}

/// Geometric starting law with mean close to `chi` on `n` lattice points.
fn initial_law(chi: f64, step: f64, n: usize) -> Vec<f64> {
    let m = (chi / step).max(1e-3);
    let r = m / (1.0 + m);
    let mut p: Vec<f64> = (0..n).map(|k| r.powi(k as i32)).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

/// Resizes a warm-start law to `n` points.
fn reshape(prev: &[f64], n: usize) -> Vec<f64> {
    let mut p: Vec<f64> = prev.iter().copied().take(n).collect();
    let floor = 1e-12;
    p.resize(n, floor);
    p.iter_mut().for_each(|x| *x = x.max(floor));
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

/// Best law for one mean budget.
struct ChiSolution {
    chi: f64,
    multiplier: f64,
    ratio: f64,
    information: f64,
    input: Vec<f64>,
    gap: f64,
    iterations: usize,
    converged: bool,
    monotone: bool,
}

fn solve_chi(
    channel: &LatticeChannel,
    mean_s: f64,
    chi: f64,
    warm: Option<(&[f64], f64)>,
    opts: &CapacityOptions,
) -> ChiSolution {
    let n = ((opts.support_multiple * chi / opts.grid_step).ceil() as usize).max(2) + 1;
    let (start, s_guess) = match warm {
        Some((p, s)) => (reshape(p, n), s.max(1e-6)),
        None => (initial_law(chi, opts.grid_step, n), 1.0 / chi),
    };
    let mut iterations = 0;
    let mut converged = true;
    let mut monotone = true;
    let mut track = |inner: &Inner| {
        iterations += inner.iterations;
        converged &= inner.converged;
        monotone &= inner.monotone;
    };
    let feasible = |inner: &Inner| inner.mean <= chi * (1.0 + 1e-9);

    // bracket the multiplier: `lo` side has E(W) > χ, `hi` side is feasible
    let first = channel.solve(start, s_guess, opts);
    track(&first);
    let (mut s_lo, mut f_lo, mut s_hi, mut hi);
    if feasible(&first) {
        s_hi = s_guess;
        hi = first;
        let mut s = s_guess;
        loop {
            s *= 0.5;
            if s < 1e-9 {
                // the mean budget does not bind
                let free = channel.solve(hi.input.clone(), 0.0, opts);
                track(&free);
                if feasible(&free) {
                    s_lo = 0.0;
                    f_lo = 0.0;
                    s_hi = 0.0;
                    hi = free;
                } else {
                    s_lo = 0.0;
                    f_lo = free.mean - chi;
                }
                break;
            }
            let trial = channel.solve(hi.input.clone(), s, opts);
            track(&trial);
            if feasible(&trial) {
                s_hi = s;
                hi = trial;
            } else {
                s_lo = s;
                f_lo = trial.mean - chi;
                break;
            }
        }
    } else {
        s_lo = s_guess;
        f_lo = first.mean - chi;
        s_hi = 2.0 * s_guess;
        hi = channel.solve(first.input, s_hi, opts);
        track(&hi);
        while !feasible(&hi) {
            s_lo = s_hi;
            f_lo = hi.mean - chi;
            s_hi *= 2.0;
            hi = channel.solve(hi.input, s_hi, opts);
            track(&hi);
        }
    }

    // Illinois false position on E(W) - χ
    let mut f_hi = hi.mean - chi;
    let mut side = 0i8;
    for _ in 0..60 {
        if (hi.mean - chi).abs() <= 1e-6 * chi || s_hi == 0.0 || (s_hi - s_lo) <= 1e-12 * s_hi {
            break;
        }
        let s = (s_lo * f_hi - s_hi * f_lo) / (f_hi - f_lo);
        let trial = channel.solve(hi.input.clone(), s, opts);
        track(&trial);
        let f = trial.mean - chi;
        if f > 0.0 {
            s_lo = s;
            f_lo = f;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            s_hi = s;
            f_hi = f;
            hi = trial;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    ChiSolution {
        chi,
        multiplier: s_hi,
        ratio: hi.information / (mean_s + chi),
        information: hi.information,
        input: hi.input,
        gap: hi.gap,
        iterations,
        converged,
        monotone,
    }
}

/// Numeric timing capacity for a delay law on the lattice of spacing
/// `opts.grid_step`.
///
/// Each `χ` in `chi_grid` is solved independently; the best grid point is
/// then refined by golden-section search between its neighbours.
/// Non-convergence is reported through [`CapacityResult::converged`].
pub fn capacity_numeric(
    delay: &DiscretizedDist,
    chi_grid: &[f64],
    opts: &CapacityOptions,
) -> Result<CapacityResult> {
    if !(opts.grid_step > 0.0) {
        return Err(domain("grid step must be positive"));
    }
    if chi_grid.is_empty() || chi_grid.iter().any(|c| !(*c > 0.0)) {
        return Err(domain("chi grid must be nonempty and positive"));
    }
    if chi_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(domain("chi grid must be strictly ascending"));
    }
    let mean_s = delay.mean();
    if !(mean_s > 0.0) {
        return Err(domain("delay has zero mean: the timing capacity is infinite"));
    }
    let channel = LatticeChannel::new(delay, opts.grid_step)?;

    let mut iterations = 0;
    let mut converged = true;
    let mut monotone = true;
    let mut solutions: Vec<ChiSolution> = Vec::with_capacity(chi_grid.len());
    for &chi in chi_grid {
        let warm = solutions.last().map(|s| (s.input.as_slice(), s.multiplier));
        let sol = solve_chi(&channel, mean_s, chi, warm, opts);
        solutions.push(sol);
    }
    for s in &solutions {
        iterations += s.iterations;
        converged &= s.converged;
        monotone &= s.monotone;
    }
    let best_idx = solutions
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.ratio.total_cmp(&b.1.ratio))
        .map(|(i, _)| i)
        .unwrap();

    let mut best = solutions.swap_remove(best_idx);
    if chi_grid.len() > 1 && opts.refine_steps > 0 {
        let lo = chi_grid[best_idx.saturating_sub(1)];
        let hi = chi_grid[(best_idx + 1).min(chi_grid.len() - 1)];
        let (mut a, mut b) = (lo, hi);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let mut eval = |chi: f64, warm: (&[f64], f64)| {
            let s = solve_chi(&channel, mean_s, chi, Some(warm), opts);
            iterations += s.iterations;
            converged &= s.converged;
            monotone &= s.monotone;
            s
        };
        let mut sc = eval(c, (&best.input, best.multiplier));
        let mut sd = eval(d, (&best.input, best.multiplier));
        for _ in 0..opts.refine_steps {
            if sc.ratio >= sd.ratio {
                b = d;
                d = c;
                c = b - g * (b - a);
                let warm = (sc.input.clone(), sc.multiplier);
                sd = std::mem::replace(&mut sc, eval(c, (&warm.0, warm.1)));
            } else {
                a = c;
                c = d;
                d = a + g * (b - a);
                let warm = (sd.input.clone(), sd.multiplier);
                sc = std::mem::replace(&mut sd, eval(d, (&warm.0, warm.1)));
            }
        }
        for cand in [sc, sd] {
            if cand.ratio > best.ratio {
                best = cand;
            }
        }
    }

    let support: Vec<f64> = (0..best.input.len()).map(|k| k as f64 * opts.grid_step).collect();
    let optimal_input = DiscretizedDist::new(support, best.input.clone())?;
    Ok(CapacityResult {
        capacity_nats_per_sec: best.ratio.max(0.0),
        optimal_chi: best.chi,
        optimal_input,
        information_nats: best.information,
        iterations,
        converged,
        bound_gap: best.gap,
        monotone,
    })
}

/// Necessary condition for estimation: `I(W; W+S) ≥ a Γ E(W + S)`.
pub fn necessary_rate_holds(
    a: f64,
    gamma: f64,
    input: &DiscretizedDist,
    delay: &DiscretizedDist,
) -> Result<bool> {
    if !(gamma >= 1.0) {
        return Err(domain(format!("Γ must be at least 1, got {gamma}")));
    }
    let info = mutual_information(input, delay)?;
    Ok(info >= a * gamma * (input.mean() + delay.mean()))
}

/// Sufficient condition for exponential delays: `1/(e E(S)) > a Γ`.
pub fn sufficient_condition_holds(a: f64, gamma: f64, mean_s: f64) -> Result<bool> {
    if !(gamma >= 1.0) {
        return Err(domain(format!("Γ must be at least 1, got {gamma}")));
    }
    Ok(capacity_exponential(mean_s)? > a * gamma)
}

/// Lower bound on the rate-distortion function of the open-loop state at
/// time `t`: `(1 - φ)(a t + h(X(0))) - ln(2ε) - (ln 2)/2` nats.
pub fn rd_lower_bound(a: f64, t: f64, h_x0: f64, eps: f64, phi: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(domain(format!("ε must be positive, got {eps}")));
    }
    if !(0.0..=1.0).contains(&phi) {
        return Err(domain(format!("φ must lie in [0, 1], got {phi}")));
    }
    Ok((1.0 - phi) * (a * t + h_x0) - (2.0 * eps).ln() - LN_2 / 2.0)
}

/// Upper bound `κ_n I(W; W+S)` on what `κ_n` received symbols can carry.
pub fn mi_chain_bound(kappa_n: u64, input: &DiscretizedDist, delay: &DiscretizedDist) -> Result<f64> {
    if kappa_n == 0 {
        return Ok(0.0);
    }
    Ok(kappa_n as f64 * mutual_information(input, delay)?)
}

/// Bits to nats.
pub fn bits_to_nats(bits: f64) -> f64 {
    bits * LN_2
}

/// Nats to bits.
pub fn nats_to_bits(nats: f64) -> f64 {
    nats / LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    /// Hand enumeration of `H(W+S) - H(S)` on integer lattices; independent
    /// of the merged-grid code path.
    fn mi_enumerate(w: &[(u32, f64)], s: &[(u32, f64)]) -> f64 {
        let mut out: BTreeMap<u32, f64> = BTreeMap::new();
        for (wv, wp) in w {
            for (sv, sp) in s {
                *out.entry(wv + sv).or_default() += wp * sp;
            }
        }
        let h = |it: &mut dyn Iterator<Item = f64>| -> f64 {
            it.filter(|p| *p > 0.0).map(|p| -p * p.ln()).sum()
        };
        h(&mut out.values().copied()) - h(&mut s.iter().map(|x| x.1))
    }

    #[test]
    fn closed_form_examples() {
        assert_relative_eq!(capacity_exponential(1.0).unwrap(), 1.0 / E, max_relative = 1e-15);
        let m = 1.0 / (E * 1.2);
        assert_relative_eq!(capacity_exponential(m).unwrap(), 1.2, max_relative = 1e-14);
        assert_relative_eq!(capacity_exponential(E).unwrap(), 0.135_335_283_236_612_7, max_relative = 1e-14);
        assert!(capacity_exponential(0.0).is_err());
        assert!(capacity_exponential(-1.0).is_err());
    }

    #[test]
    fn mutual_information_examples() {
        let delay = DiscretizedDist::uniform(vec![0.0, 1.0]).unwrap();
        let point = DiscretizedDist::point_mass(0.0).unwrap();
        assert_eq!(mutual_information(&point, &delay).unwrap(), 0.0);

        let w = DiscretizedDist::new(vec![0.0, 1.0, 3.0], vec![0.2, 0.5, 0.3]).unwrap();
        assert_relative_eq!(mutual_information(&w, &point).unwrap(), w.entropy(), max_relative = 1e-14);

        let oracle = mi_enumerate(&[(0, 0.5), (1, 0.5)], &[(0, 0.5), (1, 0.5)]);
        assert_relative_eq!(oracle, 0.5 * LN_2, max_relative = 1e-14);
        let mi = mutual_information(&delay, &delay).unwrap();
        assert!((mi - 0.346_573_590_279_972_6).abs() < 1e-12);
        assert!((mi - oracle).abs() < 1e-14);
    }

    #[test]
    fn sufficient_condition_examples() {
        assert!(sufficient_condition_holds(1.0, 1.0, 1.0 / (2.0 * E)).unwrap());
        assert!(!sufficient_condition_holds(1.0, 1.0, 1.0 / E).unwrap());
        assert!(sufficient_condition_holds(0.3, 1.1, 1.0).unwrap());
        assert!(sufficient_condition_holds(0.3, 0.5, 1.0).is_err());
    }

    #[test]
    fn necessary_condition_examples() {
        let delay = DiscretizedDist::exponential_ceil(1.0, 0.05, 25.0).unwrap();
        let input = DiscretizedDist::mixture_ceil(1.0, 0.05, 25.0).unwrap();
        assert!(necessary_rate_holds(0.0, 1.0, &input, &delay).unwrap());
        assert!(!necessary_rate_holds(1.2, 1.0, &input, &delay).unwrap());
        for w in [vec![0.0, 1.0], vec![0.0, 0.5, 3.0, 7.0]] {
            let law = DiscretizedDist::uniform(w).unwrap();
            assert!(!necessary_rate_holds(1.2, 1.0, &law, &delay).unwrap());
        }
        assert!(necessary_rate_holds(0.3, 1.0, &input, &delay).unwrap());
    }

    #[test]
    fn rd_bound_examples() {
        assert_relative_eq!(rd_lower_bound(1.0, 0.0, 0.0, 0.5, 0.0).unwrap(), -LN_2 / 2.0);
        assert_relative_eq!(
            rd_lower_bound(1.0, 10.0, LN_2, 0.5, 0.0).unwrap(),
            10.0 + LN_2 - LN_2 / 2.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            rd_lower_bound(3.0, 7.0, 2.0, 0.1, 1.0).unwrap(),
            -(0.2f64).ln() - LN_2 / 2.0,
            max_relative = 1e-15
        );
        assert!(rd_lower_bound(1.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(rd_lower_bound(1.0, 1.0, 0.0, 0.1, 1.5).is_err());
    }

    #[test]
    fn chain_bound_examples() {
        let u = DiscretizedDist::uniform(vec![0.0, 1.0]).unwrap();
        assert_eq!(mi_chain_bound(0, &u, &u).unwrap(), 0.0);
        assert!((mi_chain_bound(5, &u, &u).unwrap() - 1.732_867_951_399_863).abs() < 1e-12);
        let point = DiscretizedDist::point_mass(2.0).unwrap();
        assert_eq!(mi_chain_bound(1, &point, &u).unwrap(), 0.0);
    }

    #[test]
    fn numeric_rejects_zero_delay() {
        let zero = DiscretizedDist::point_mass(0.0).unwrap();
        assert!(capacity_numeric(&zero, &[1.0], &CapacityOptions::default()).is_err());
    }

    #[test]
    fn numeric_dominates_two_atom_search_for_uniform_delay() {
        let delay = DiscretizedDist::uniform(vec![1.0, 2.0]).unwrap();
        let opts = CapacityOptions { grid_step: 1.0, tol: 1e-9, support_multiple: 30.0, ..Default::default() };
        let grid = default_chi_grid(delay.mean(), 12);
        let res = capacity_numeric(&delay, &grid, &opts).unwrap();
        assert!(res.converged && res.monotone);

        // oracle: inputs {0, w} with P(W = w) = p
        let mut oracle = 0.0f64;
        for w in 1..=12u32 {
            for k in 1..1000 {
                let p = k as f64 / 1000.0;
                let mi = mi_enumerate(&[(0, 1.0 - p), (w, p)], &[(1, 0.5), (2, 0.5)]);
                oracle = oracle.max(mi / (1.5 + p * w as f64));
            }
        }
        assert!(oracle > 0.2, "oracle {oracle}");
        assert!(
            res.capacity_nats_per_sec >= oracle - 1e-9,
            "numeric {} below two-atom oracle {oracle}",
            res.capacity_nats_per_sec
        );
        // and the value stays below the noiseless ceiling sup H(W)/(1.5 + E W)
        assert!(res.capacity_nats_per_sec < 1.0);
    }

    #[test]
    fn mixture_input_carries_one_nat_per_mean_interreception() {
        let delay = DiscretizedDist::exponential_ceil(1.0, 0.02, 30.0).unwrap();
        let input = DiscretizedDist::mixture_ceil(1.0, 0.02, 30.0).unwrap();
        let mi = mutual_information(&input, &delay).unwrap();
        let rate = mi / (input.mean() + delay.mean());
        let closed = capacity_exponential(1.0).unwrap();
        assert!((rate - closed).abs() < 0.05 * closed, "rate {rate} vs {closed}");
    }

    proptest! {
        #[test]
        fn mutual_information_bounds(
            w in proptest::collection::vec(0.01f64..1.0, 1..6),
            s in proptest::collection::vec(0.01f64..1.0, 1..6),
        ) {
            let norm = |v: &[f64]| { let t: f64 = v.iter().sum(); v.iter().map(|x| x / t).collect::<Vec<_>>() };
            let wd = DiscretizedDist::new((0..w.len()).map(|k| k as f64).collect(), norm(&w)).unwrap();
            let sd = DiscretizedDist::new((0..s.len()).map(|k| 0.5 * k as f64).collect(), norm(&s)).unwrap();
            let mi = mutual_information(&wd, &sd).unwrap();
            prop_assert!(mi >= 0.0);
            prop_assert!(mi <= wd.entropy() + 1e-12);
            let wi: Vec<(u32, f64)> = wd.probs().iter().enumerate().map(|(k, p)| (2 * k as u32, *p)).collect();
            let si: Vec<(u32, f64)> = sd.probs().iter().enumerate().map(|(k, p)| (k as u32, *p)).collect();
            prop_assert!((mi - mi_enumerate(&wi, &si)).abs() < 1e-12);
        }
    }
}
