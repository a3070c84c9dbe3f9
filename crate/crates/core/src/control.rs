//! Certainty-equivalent control from decoded initial conditions.
//!
//! The controller never observes the state. It reconstructs `X̂` by running
//! the plant forward from the latest decoded `X̂(0)` with the inputs it has
//! already applied, so the estimation error is always the free response of
//! `X(0) - X̂(0)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::plant::{closed_loop_state_continuous, InputSignal, TimeBase};

/// What the controller does after a decoding error, until the next decode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorBehavior {
    /// Apply no input.
    #[default]
    OpenLoop,
    /// Keep using the estimate from before the faulty decode.
    PreviousEstimate,
    /// Apply `+K X̂` instead of `-K X̂`.
    OppositeControl,
}

impl ErrorBehavior {
    pub const ALL: [ErrorBehavior; 3] =
        [ErrorBehavior::OpenLoop, ErrorBehavior::PreviousEstimate, ErrorBehavior::OppositeControl];

    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorBehavior::OpenLoop => "open_loop",
            ErrorBehavior::PreviousEstimate => "previous_estimate",
            ErrorBehavior::OppositeControl => "opposite_control",
        }
    }
}

impl fmt::Display for ErrorBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorBehavior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "open_loop" | "openloop" => Ok(ErrorBehavior::OpenLoop),
            "previous_estimate" | "previousestimate" => Ok(ErrorBehavior::PreviousEstimate),
            "opposite_control" | "oppositecontrol" => Ok(ErrorBehavior::OppositeControl),
            other => Err(config(format!(
                "unknown error behavior '{other}' (expected open_loop, previous_estimate or opposite_control)"
            ))),
        }
    }
}

/// Whether the latest decode is trusted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ControlStatus {
    #[default]
    Normal,
    /// The latest decode was wrong; the behavior applies until the next one.
    Erroneous(ErrorBehavior),
}

/// `U = -k x̂` normally; `+k x̂` or `0` during an error episode.
/// Under [`ErrorBehavior::PreviousEstimate`] the law is unchanged and the
/// caller supplies the estimate built from the previous decode.
pub fn control_input(x_hat: f64, k: f64, status: ControlStatus) -> f64 {
    match status {
        ControlStatus::Normal | ControlStatus::Erroneous(ErrorBehavior::PreviousEstimate) => -k * x_hat,
        ControlStatus::Erroneous(ErrorBehavior::OppositeControl) => k * x_hat,
        ControlStatus::Erroneous(ErrorBehavior::OpenLoop) => 0.0,
    }
}

/// `a^m x̂(0) + Σ_{j<m} a^{m-1-j} U[j]`, by forward recursion.
pub fn estimate_state_discrete(x0_hat: f64, a: f64, inputs: &[f64], m: usize) -> Result<f64> {
    if inputs.len() < m {
        return Err(Error::MalformedSignal(format!(
            "estimate at step {m} needs {m} inputs, have {}",
            inputs.len()
        )));
    }
    Ok(inputs[..m].iter().fold(x0_hat, |x, u| a * x + u))
}

/// `e^{at} x̂(0)` plus the exact convolution of the logged inputs.
pub fn estimate_state_continuous(
    x0_hat: f64,
    a: f64,
    b: f64,
    input_log: &InputSignal,
    t: f64,
) -> Result<f64> {
    closed_loop_state_continuous(x0_hat, a, b, input_log, t)
}

/// Free-response extrapolation of an estimate over `dt` seconds.
pub fn hold_extrapolate(x_hat: f64, a: f64, dt: f64) -> Result<f64> {
    if !(dt >= 0.0) {
        return Err(domain(format!("extrapolation interval must be nonnegative, got {dt}")));
    }
    Ok(x_hat * (a * dt).exp())
}

/// Free-response extrapolation over `steps` discrete steps.
pub fn hold_extrapolate_discrete(x_hat: f64, a: f64, steps: u32) -> f64 {
    x_hat * a.powi(steps as i32)
}

/// `a - b k < 0` in continuous time, `|a - b k| < 1` in discrete time.
pub fn gain_is_stabilizing(a: f64, b: f64, k: f64, time_base: TimeBase) -> bool {
    match time_base {
        TimeBase::Continuous => a - b * k < 0.0,
        TimeBase::Discrete => (a - b * k).abs() < 1.0,
    }
}

/// Controller-side record of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EstimatorState {
    /// Estimate of `X(0)` the controller currently acts on.
    pub x0_hat: f64,
    /// Depth of the latest decode.
    pub bits_resolved: u32,
    /// Time (or step) of the latest decode.
    pub last_decode_time: Option<f64>,
    pub status: ControlStatus,
    /// Applied inputs; appended to, never rewritten.
    pub input_log: InputSignal,
}

impl EstimatorState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Installs a decode. A wrong decode under `PreviousEstimate` leaves
    /// `x0_hat` alone; the other behaviors adopt the wrong value, which only
    /// matters for `OppositeControl`.
    pub fn apply_decode(&mut self, x0_hat: f64, bits: u32, time: f64, correct: bool, behavior: ErrorBehavior) {
        self.bits_resolved = bits;
        self.last_decode_time = Some(time);
        if correct {
            self.status = ControlStatus::Normal;
            self.x0_hat = x0_hat;
        } else {
            self.status = ControlStatus::Erroneous(behavior);
            if behavior != ErrorBehavior::PreviousEstimate {
                self.x0_hat = x0_hat;
            }
        }
    }

    /// Appends an input held until `until`.
    pub fn push_input(&mut self, until: f64, u: f64) {
        self.input_log.push(until, u);
    }
}
