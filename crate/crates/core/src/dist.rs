//! Finite distributions on nonnegative grids.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// A probability law on a finite, strictly ascending set of nonnegative
/// points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedDist {
    support: Vec<f64>,
    probs: Vec<f64>,
    mean: f64,
}

impl DiscretizedDist {
    /// Validates and renormalizes; weights must already sum to one within
    /// `1e-9`.
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(domain("distribution has empty support"));
        }
        if support.len() != probs.len() {
            return Err(domain(format!(
                "{} support points but {} weights",
                support.len(),
                probs.len()
            )));
        }
        if support.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(domain("support points must be finite and nonnegative"));
        }
        if support.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(domain("support must be strictly ascending"));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(domain("weights must be nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(domain(format!("weights sum to {total}, not 1")));
        }
        let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
        let mean = support.iter().zip(&probs).map(|(s, p)| s * p).sum();
        Ok(Self { support, probs, mean })
    }

    pub fn point_mass(at: f64) -> Result<Self> {
        Self::new(vec![at], vec![1.0])
    }

    /// Equal weights on the given points (sorted and deduplicated).
    pub fn uniform(mut points: Vec<f64>) -> Result<Self> {
        points.sort_by(f64::total_cmp);
        points.dedup();
        let p = 1.0 / points.len().max(1) as f64;
        let n = points.len();
        Self::new(points, vec![p; n])
    }

    /// Exponential law with the given mean, rounded up onto the grid
    /// `{step, 2 step, ...}` and truncated at `truncation` (the tail mass is
    /// folded into the last atom).
    ///
    /// Rounding up makes the discrete channel a degraded version of the
    /// continuous one for lattice inputs, so capacities computed from it are
    /// lower bounds.
    pub fn exponential_ceil(mean: f64, step: f64, truncation: f64) -> Result<Self> {
        if !(mean > 0.0 && step > 0.0 && truncation >= step) {
            return Err(domain("exponential discretization needs mean > 0 and truncation >= step > 0"));
        }
        let atoms = (truncation / step).round().max(1.0) as usize;
        let mut support = Vec::with_capacity(atoms);
        let mut probs = Vec::with_capacity(atoms);
        let mut prev_survival = 1.0;
        for j in 1..=atoms {
            let survival = (-(j as f64) * step / mean).exp();
            support.push(j as f64 * step);
            probs.push(if j == atoms { prev_survival } else { prev_survival - survival });
            prev_survival = survival;
        }
        Self::new(support, probs)
    }

    /// Geometric law on `{1, 2, ...}` with the given mean, truncated once the
    /// remaining tail mass drops below `tail` (folded into the last atom).
    pub fn geometric(mean: f64, tail: f64) -> Result<Self> {
        if !(mean >= 1.0 && tail > 0.0) {
            return Err(domain("geometric law needs mean >= 1"));
        }
        let p = 1.0 / mean;
        let mut support = Vec::new();
        let mut probs = Vec::new();
        let mut survival = 1.0;
        let mut k = 1.0;
        loop {
            let mass = survival * p;
            survival -= mass;
            support.push(k);
            if survival < tail {
                probs.push(mass + survival);
                break;
            }
            probs.push(mass);
            k += 1.0;
        }
        Self::new(support, probs)
    }

    /// The capacity-achieving waiting-time law for exponential service of
    /// mean `mean_s`: mass `1/e` at zero, the rest exponential with mean
    /// `e mean_s`, rounded up onto the grid and truncated.
    pub fn mixture_ceil(mean_s: f64, step: f64, truncation: f64) -> Result<Self> {
        let tail = Self::exponential_ceil(E * mean_s, step, truncation)?;
        let mut support = vec![0.0];
        let mut probs = vec![1.0 / E];
        support.extend_from_slice(&tail.support);
        probs.extend(tail.probs.iter().map(|p| p * (1.0 - 1.0 / E)));
        Self::new(support, probs)
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        entropy(&self.probs)
    }

    /// Lattice indices of the support for grid spacing `step`, if every
    /// point lies on the lattice.
    pub fn lattice_indices(&self, step: f64) -> Option<Vec<usize>> {
        self.support
            .iter()
            .map(|s| {
                let k = (s / step).round();
                ((s - k * step).abs() <= 1e-9 * (1.0 + s.abs())).then_some(k as usize)
            })
            .collect()
    }
}

/// Shannon entropy of a weight vector in nats; zero weights contribute zero.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}
