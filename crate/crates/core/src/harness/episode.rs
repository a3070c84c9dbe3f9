//! One closed-loop run of the discrete-time plant.
//!
//! The true initial state is held exactly (see [`InitialCondition`]). The
//! simulation works in error coordinates: with `δ = X(0) - X̂(0)`, the
//! controller's estimate is `X̂[m] = X[m] - a^m δ` for any input history, so
//! the state recursion `X[m+1] = a X[m] + b U[m]` never needs the estimate
//! recursion that would amplify rounding by `a^m`.

use std::f64::consts::{E, LN_2};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Mode};
use crate::channel::{count_received_by, transmit, ChannelTrace, DelayModel};
use crate::codec::{ml_decode_prefix, Codebook, DecodeSchedule, Layout};
use crate::control::{control_input, ControlStatus, ErrorBehavior};
use crate::error::{domain, Error, Result};
use crate::quantizer::{BitPath, InitialCondition};
use crate::rng::{mix, substream, Purpose};

/// Steps covered by the LQR cost.
pub const LQR_STEPS: u32 = 200;

/// Extra exact bits kept below the deepest decode.
const GUARD_BITS: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub m: u32,
    pub x: f64,
    /// Input applied during step `m`; zero on the final record.
    pub u: f64,
    pub x_hat: f64,
    pub decode_event: bool,
    pub decode_correct: bool,
    pub bits_resolved: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub success: bool,
    pub diverged: bool,
    /// `None` when the horizon is shorter than the cost window.
    pub lqr_cost: Option<f64>,
    pub final_abs_state: f64,
    pub max_abs_state: f64,
    pub receptions: u32,
    pub decode_errors: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub steps: Vec<StepRecord>,
    pub summary: TraceSummary,
}

/// `(1/200) [ Σ_{m<200} (0.01 X² + 0.5 U²) + 0.01 X[200]² ]`; infinite for
/// a run that diverged inside the window.
pub fn lqr_cost(trace: &SimTrace) -> Result<f64> {
    let last = trace.steps.last().map_or(0, |s| s.m);
    if last < LQR_STEPS {
        if trace.summary.diverged {
            return Ok(f64::INFINITY);
        }
        return Err(domain(format!("LQR cost needs {LQR_STEPS} steps, trace has {last}")));
    }
    let running: f64 =
        trace.steps[..LQR_STEPS as usize].iter().map(|s| 0.01 * s.x * s.x + 0.5 * s.u * s.u).sum();
    let terminal = 0.01 * trace.steps[LQR_STEPS as usize].x.powi(2);
    Ok((running + terminal) / LQR_STEPS as f64)
}

/// Source of decode outcomes.
trait Decoder {
    /// Receptions completed by step `m`.
    fn received_by(&mut self, m: u32) -> u32;
    /// Path the decoder reports after `k` receptions, and its depth.
    fn decode(&mut self, k: u32, x0: &InitialCondition) -> Result<BitPath>;
}

/// Geometric reception gaps and a biased coin per decode.
struct AbstractDecoder<R> {
    mean_d: f64,
    bits_per_reception: f64,
    eta: f64,
    gaps: R,
    coin: R,
    wrong: R,
    next_reception: u64,
    received: u32,
}

impl<R: Rng> AbstractDecoder<R> {
    fn depth(&self, k: u32) -> u32 {
        // n' = ceil(k E(D) C) with the same rounding snap as the codec
        let x = k as f64 * self.bits_per_reception;
        let r = x.round();
        if (x - r).abs() <= 1e-9 * r.max(1.0) {
            r as u32
        } else {
            x.ceil() as u32
        }
    }

    fn gap(&mut self) -> u64 {
        // geometric on {1, 2, ...} with mean E(D)
        let p = 1.0 / self.mean_d;
        if p >= 1.0 {
            return 1;
        }
        let u: f64 = self.gaps.random();
        1 + ((1.0 - u).ln() / (1.0 - p).ln()).floor() as u64
    }
}

impl<R: Rng> Decoder for AbstractDecoder<R> {
    fn received_by(&mut self, m: u32) -> u32 {
        while self.next_reception <= m as u64 {
            self.received += 1;
            self.next_reception += self.gap();
        }
        self.received
    }

    fn decode(&mut self, k: u32, x0: &InitialCondition) -> Result<BitPath> {
        let depth = self.depth(k);
        let truth = x0.path(depth);
        let p_err = (-self.eta * k as f64).exp();
        if depth == 0 || self.coin.random::<f64>() >= p_err {
            return Ok(truth);
        }
        // uniform over the 2^depth - 1 wrong paths
        loop {
            let bits: Vec<bool> = (0..depth).map(|_| self.wrong.random::<bool>()).collect();
            let cand = BitPath::from_bits(bits);
            if cand != truth {
                return Ok(cand);
            }
        }
    }
}

/// Nested codebook over an exponential-delay channel, decoded by ML.
struct CodedDecoder {
    codebook: Codebook,
    trace: ChannelTrace,
    model: DelayModel,
}

impl Decoder for CodedDecoder {
    fn received_by(&mut self, m: u32) -> u32 {
        count_received_by(&self.trace, m as f64) as u32
    }

    fn decode(&mut self, k: u32, _x0: &InitialCondition) -> Result<BitPath> {
        let k = (k as usize).min(self.codebook.cols());
        ml_decode_prefix(&self.codebook, &self.trace.inter_reception[..k], &self.model)
    }
}

/// Columns of the deepest nested codebook the cap allows at `schedule`.
pub(crate) fn capped_columns(schedule: &DecodeSchedule, max_depth: u32) -> Result<u32> {
    let mut cols = 0;
    while schedule.bits_after(cols + 1) <= max_depth {
        cols += 1;
        if cols > 1 << 20 {
            break;
        }
    }
    if cols == 0 {
        return Err(Error::Resource(format!(
            "one symbol already needs {} bits, above the cap of {max_depth}",
            schedule.bits_after(1)
        )));
    }
    Ok(cols)
}

fn coded_decoder(cfg: &ExperimentConfig, seed: u64, x0: &InitialCondition) -> Result<CodedDecoder> {
    let mean_s = cfg.mean_d / E;
    let schedule = DecodeSchedule::new(cfg.capacity_bits * LN_2, cfg.mean_d)?;
    let cols = capped_columns(&schedule, cfg.max_depth)?;
    let codebook =
        Codebook::generate(cols, schedule, Layout::Nested, mean_s, mix(seed, Purpose::Codebook as u64), cfg.max_depth)?;
    let row = x0.path(codebook.depth()).index().expect("capped depth fits u64");
    let model = DelayModel::Exponential { mean: mean_s };
    let trace = transmit(&codebook.row(row), &model, &mut substream(seed, Purpose::Delays, 0))?;
    Ok(CodedDecoder { codebook, trace, model })
}

/// Simulates one episode.
pub fn run_episode(cfg: &ExperimentConfig, episode_seed: u64) -> Result<SimTrace> {
    cfg.validate()?;
    let horizon = cfg.horizon;
    let bits_per_reception = cfg.mean_d * cfg.capacity_bits;
    let deepest = match cfg.mode {
        Mode::AbstractError => ((horizon as f64 + 1.0) * bits_per_reception).ceil() as u32 + 1,
        Mode::FullCoding => cfg.max_depth,
    };
    let mut init_rng = substream(episode_seed, Purpose::InitialState, 0);
    let x0 = InitialCondition::sample(cfg.l, deepest + GUARD_BITS, &mut init_rng)?;

    let mut decoder: Box<dyn Decoder> = match cfg.mode {
        Mode::AbstractError => {
            let mut d = AbstractDecoder {
                mean_d: cfg.mean_d,
                bits_per_reception,
                eta: cfg.eta,
                gaps: substream(episode_seed, Purpose::Receptions, 0),
                coin: substream(episode_seed, Purpose::DecodeCoin, 0),
                wrong: substream(episode_seed, Purpose::WrongPath, 0),
                next_reception: 0,
                received: 0,
            };
            d.next_reception = d.gap();
            Box::new(d)
        }
        Mode::FullCoding => Box::new(coded_decoder(cfg, episode_seed, &x0)?),
    };

    let ln_a = cfg.a.ln();
    let limit = cfg.divergence_factor * cfg.l;
    let mut x = x0.value();
    // before any decode the estimate is the empty-path midpoint, 0
    let mut delta = x0.offset_from(&BitPath::empty());
    let mut status = ControlStatus::Normal;
    let mut received = 0;
    let mut bits = 0;
    let mut decode_errors = 0;
    let mut diverged = false;
    let mut max_abs = x.abs();
    let mut steps = Vec::with_capacity(horizon as usize + 1);

    for m in 0..=horizon {
        let now = decoder.received_by(m);
        let mut event = false;
        let mut correct = false;
        if now > received {
            received = now;
            let path = decoder.decode(now, &x0)?;
            bits = path.depth();
            event = true;
            correct = path == x0.path(bits);
            if correct {
                status = ControlStatus::Normal;
                delta = x0.offset_from(&path);
            } else {
                decode_errors += 1;
                status = ControlStatus::Erroneous(cfg.error_behavior);
                if cfg.error_behavior != ErrorBehavior::PreviousEstimate {
                    delta = x0.offset_from(&path);
                }
            }
        }
        let x_hat = x - delta.scaled(m as f64 * ln_a);
        let u = if m < horizon { control_input(x_hat, cfg.k, status) } else { 0.0 };
        steps.push(StepRecord { m, x, u, x_hat, decode_event: event, decode_correct: correct, bits_resolved: bits });
        if m == horizon {
            break;
        }
        x = cfg.a * x + cfg.b * u;
        max_abs = max_abs.max(x.abs());
        if !(x.abs() <= limit) {
            diverged = true;
            steps.push(StepRecord {
                m: m + 1,
                x,
                u: 0.0,
                x_hat: f64::NAN,
                decode_event: false,
                decode_correct: false,
                bits_resolved: bits,
            });
            break;
        }
    }

    let last = steps.last().expect("at least one step");
    let success = !diverged
        && steps.get(cfg.success_step as usize).is_some_and(|s| s.x.abs() <= cfg.success_threshold);
    let mut trace = SimTrace {
        summary: TraceSummary {
            success,
            diverged,
            lqr_cost: None,
            final_abs_state: last.x.abs(),
            max_abs_state: max_abs,
            receptions: received,
            decode_errors,
        },
        steps,
    };
    trace.summary.lqr_cost = lqr_cost(&trace).ok();
    Ok(trace)
}
