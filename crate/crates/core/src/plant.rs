//! Scalar LTI plant: `dX/dt = aX + bU` in continuous time and
//! `X[m+1] = aX[m] + U[m]` in discrete time.
//!
//! Continuous trajectories are propagated in closed form. Inputs are always
//! piecewise constant (held between decode events), so each segment's
//! contribution to the convolution integral is integrated exactly.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Time base of a plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeBase {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    /// Growth rate per unit time (continuous) or per step (discrete).
    pub a: f64,
    /// Input gain; zero for open-loop estimation.
    pub b: f64,
    /// Bound on the initial state, `|X(0)| < l`.
    pub l: f64,
    pub time_base: TimeBase,
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0) || !self.l.is_finite() {
            return Err(domain(format!("initial-state bound must be positive, got {}", self.l)));
        }
        match self.time_base {
            TimeBase::Continuous if !(self.a > 0.0) => {
                Err(domain(format!("continuous plant needs a > 0, got {}", self.a)))
            }
            TimeBase::Discrete if !(self.a > 1.0) => {
                Err(domain(format!("discrete plant needs a > 1, got {}", self.a)))
            }
            _ => Ok(()),
        }
    }
}

/// A state sample; `time` is seconds (continuous) or the step index (discrete).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub x: f64,
    pub time: f64,
}

/// One constant piece of an input signal on `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub value: f64,
}

/// Piecewise-constant input signal, segments contiguous from time zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InputSignal {
    segments: Vec<Segment>,
}

impl InputSignal {
    pub fn new() -> Self {
        Self::default()
    }

    /// Constant input `value` on `[0, end)`.
    pub fn constant(value: f64, end: f64) -> Self {
        Self { segments: vec![Segment { start: 0.0, end, value }] }
    }

    pub fn from_segments(segments: Vec<Segment>) -> Self {
        Self { segments }
    }

    /// Appends a piece starting where the signal currently ends.
    pub fn push(&mut self, end: f64, value: f64) {
        let start = self.end();
        self.segments.push(Segment { start, end, value });
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// End of the covered interval.
    pub fn end(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }

    /// Checks that the segments tile `[0, t]` without gaps or overlaps.
    pub fn check_covers(&self, t: f64) -> Result<()> {
        if t == 0.0 && self.segments.is_empty() {
            return Ok(());
        }
        let mut cursor = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.end >= s.start) || !s.value.is_finite() {
                return Err(Error::MalformedSignal(format!("segment {i} is invalid: {s:?}")));
            }
            if (s.start - cursor).abs() > 1e-12 * (1.0 + cursor.abs()) {
                return Err(Error::MalformedSignal(format!(
                    "segment {i} starts at {} but previous piece ended at {cursor}",
                    s.start
                )));
            }
            cursor = s.end;
            if cursor >= t {
                return Ok(());
            }
        }
        Err(Error::MalformedSignal(format!("signal covers [0, {cursor}) but {t} was requested")))
    }
}

/// `x0 * e^(a t)` in closed form.
pub fn evolve_open_loop(x0: f64, a: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(domain(format!("elapsed time must be nonnegative, got {t}")));
    }
    if x0 == 0.0 {
        return Ok(0.0);
    }
    let growth = (a * t).exp();
    let x = x0 * growth;
    if !x.is_finite() {
        return Err(Error::Saturation(format!("e^({a}*{t}) overflows")));
    }
    Ok(x)
}

/// `X[m+1] = a X[m] + u`.
#[inline]
pub fn step_closed_loop_discrete(x: f64, a: f64, u: f64) -> f64 {
    a * x + u
}

/// Contribution of a constant input `u` applied on `[s, e]` to the state at
/// time `t >= e`: `b u (e^{a(t-s)} - e^{a(t-e)}) / a`.
fn segment_response(a: f64, b: f64, u: f64, s: f64, e: f64, t: f64) -> f64 {
    let width = e - s;
    if a == 0.0 {
        return b * u * width;
    }
    // e^{a(t-e)} (e^{a w} - 1) / a, written with expm1 for small a*w
    b * u * (a * (t - e)).exp() * (a * width).exp_m1() / a
}

/// The control convolution `∫_0^t e^{a(t-τ)} b u(τ) dτ` for a
/// piecewise-constant `u`.
pub fn control_convolution(a: f64, b: f64, u: &InputSignal, t: f64) -> Result<f64> {
    u.check_covers(t)?;
    let mut acc = 0.0;
    for seg in u.segments() {
        if seg.start >= t {
            break;
        }
        let end = seg.end.min(t);
        acc += segment_response(a, b, seg.value, seg.start, end, t);
    }
    if !acc.is_finite() {
        return Err(Error::Saturation(format!("control response at t={t} overflows")));
    }
    Ok(acc)
}

/// Closed-loop state `e^{at} x0 + ∫_0^t e^{a(t-τ)} b u(τ) dτ`.
pub fn closed_loop_state_continuous(
    x0: f64,
    a: f64,
    b: f64,
    u: &InputSignal,
    t: f64,
) -> Result<f64> {
    let free = evolve_open_loop(x0, a, t)?;
    Ok(free + control_convolution(a, b, u, t)?)
}
