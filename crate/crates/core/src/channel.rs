//! The telephone signaling channel.
//!
//! The encoder waits `W_i` after the acknowledgment of symbol `i - 1`, then
//! sends a zero-payload symbol that suffers an i.i.d. service delay `S_i`.
//! The receiver observes only the inter-reception times `D_i = W_i + S_i`.
//! Acknowledgments are instantaneous, so nothing ever queues and the channel
//! starts with a reception at `t = 0`.

use std::f64::consts::E;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};

/// Law of the service delay `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayModel {
    /// Exponential with the given mean (seconds).
    Exponential { mean: f64 },
    /// Geometric on `{1, 2, ...}` with the given mean (steps), `p = 1/mean`.
    Geometric { mean: f64 },
    /// Constant delay.
    Degenerate { value: f64 },
}

impl DelayModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DelayModel::Exponential { mean } if !(mean > 0.0 && mean.is_finite()) => {
                Err(config(format!("exponential delay needs a positive mean, got {mean}")))
            }
            DelayModel::Geometric { mean } if !(mean >= 1.0 && mean.is_finite()) => {
                Err(config(format!("geometric delay needs mean >= 1, got {mean}")))
            }
            DelayModel::Degenerate { value } if !(value >= 0.0 && value.is_finite()) => {
                Err(config(format!("degenerate delay must be nonnegative, got {value}")))
            }
            _ => Ok(()),
        }
    }

    /// `E(S)`.
    pub fn mean(&self) -> f64 {
        match *self {
            DelayModel::Exponential { mean } | DelayModel::Geometric { mean } => mean,
            DelayModel::Degenerate { value } => value,
        }
    }

    /// Service rate `1/E(S)`; infinite for a zero-delay channel.
    pub fn rate(&self) -> f64 {
        1.0 / self.mean()
    }

    fn sampler(&self) -> Result<DelaySampler> {
        self.validate()?;
        Ok(match *self {
            DelayModel::Exponential { mean } => DelaySampler::Exp(
                Exp::new(1.0 / mean).map_err(|e| config(format!("exponential delay: {e}")))?,
            ),
            DelayModel::Geometric { mean } => DelaySampler::Geo(
                Geometric::new(1.0 / mean).map_err(|e| config(format!("geometric delay: {e}")))?,
            ),
            DelayModel::Degenerate { value } => DelaySampler::Const(value),
        })
    }
}

enum DelaySampler {
    Exp(Exp<f64>),
    Geo(Geometric),
    Const(f64),
}

impl DelaySampler {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DelaySampler::Exp(d) => d.sample(rng),
            // rand_distr counts failures before the first success
            DelaySampler::Geo(d) => (d.sample(rng) + 1) as f64,
            DelaySampler::Const(v) => *v,
        }
    }
}

/// `n` i.i.d. delays.
pub fn sample_delays<R: Rng + ?Sized>(model: &DelayModel, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    let sampler = model.sampler()?;
    Ok((0..n).map(|_| sampler.draw(rng)).collect())
}

/// The capacity-achieving waiting-time law for exponential service:
/// an atom at zero with mass `1/e`, otherwise exponential with mean
/// `e E(S)`. Under it `E(W) = (e - 1) E(S)` and `D = W + S` is exponential
/// with mean `e E(S)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureWaitingTime {
    tail: Exp<f64>,
}

impl MixtureWaitingTime {
    pub const ZERO_MASS: f64 = 1.0 / E;

    pub fn new(mean_s: f64) -> Result<Self> {
        if !(mean_s > 0.0 && mean_s.is_finite()) {
            return Err(domain(format!("mixture law needs E(S) > 0, got {mean_s}")));
        }
        let tail = Exp::new(1.0 / (E * mean_s)).map_err(|e| config(e.to_string()))?;
        Ok(Self { tail })
    }

    /// Inverse-CDF draw from a uniform in `[0, 1)`; lets table-driven
    /// codebooks share the law without holding an RNG per entry.
    pub fn from_uniform(&self, u: f64, mean_s: f64) -> f64 {
        if u < Self::ZERO_MASS {
            0.0
        } else {
            // conditional on the tail, (u - 1/e)/(1 - 1/e) is uniform
            let v = (u - Self::ZERO_MASS) / (1.0 - Self::ZERO_MASS);
            -(E * mean_s) * (-v).ln_1p()
        }
    }
}

impl Distribution<f64> for MixtureWaitingTime {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if rng.random::<f64>() < Self::ZERO_MASS {
            0.0
        } else {
            self.tail.sample(rng)
        }
    }
}

/// One realization of the channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTrace {
    pub waiting_times: Vec<f64>,
    pub delays: Vec<f64>,
    /// `D_i = W_i + S_i`.
    pub inter_reception: Vec<f64>,
    /// `T_n = D_1 + ... + D_n`; `T_0 = 0` is implicit.
    pub reception_times: Vec<f64>,
}

impl ChannelTrace {
    /// Assembles a trace from waiting times and already-drawn delays.
    pub fn from_parts(waiting_times: Vec<f64>, delays: Vec<f64>) -> Result<Self> {
        if waiting_times.len() != delays.len() {
            return Err(domain(format!(
                "{} waiting times but {} delays",
                waiting_times.len(),
                delays.len()
            )));
        }
        if let Some((i, w)) = waiting_times.iter().enumerate().find(|(_, w)| !(**w >= 0.0)) {
            return Err(domain(format!("waiting time {i} is negative or NaN: {w}")));
        }
        if let Some((i, s)) = delays.iter().enumerate().find(|(_, s)| !(**s >= 0.0)) {
            return Err(domain(format!("delay {i} is negative or NaN: {s}")));
        }
        let inter_reception: Vec<f64> =
            waiting_times.iter().zip(&delays).map(|(w, s)| w + s).collect();
        let reception_times = inter_reception
            .iter()
            .scan(0.0, |t, d| {
                *t += d;
                Some(*t)
            })
            .collect();
        Ok(Self { waiting_times, delays, inter_reception, reception_times })
    }

    pub fn len(&self) -> usize {
        self.waiting_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waiting_times.is_empty()
    }

    /// Writes the `i,W_i,S_i,D_i,T_i` CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "W_i", "S_i", "D_i", "T_i"])?;
        for i in 0..self.len() {
            w.write_record(&[
                (i + 1).to_string(),
                self.waiting_times[i].to_string(),
                self.delays[i].to_string(),
                self.inter_reception[i].to_string(),
                self.reception_times[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sends `waiting_times` through the channel, drawing one delay per symbol.
pub fn transmit<R: Rng + ?Sized>(
    waiting_times: &[f64],
    model: &DelayModel,
    rng: &mut R,
) -> Result<ChannelTrace> {
    if let Some((i, w)) = waiting_times.iter().enumerate().find(|(_, w)| !(**w >= 0.0)) {
        return Err(domain(format!("waiting time {i} is negative or NaN: {w}")));
    }
    let delays = sample_delays(model, waiting_times.len(), rng)?;
    ChannelTrace::from_parts(waiting_times.to_vec(), delays)
}

/// Largest `n` with `T_n <= t`.
pub fn count_received_by(trace: &ChannelTrace, t: f64) -> usize {
    trace.reception_times.partition_point(|&tn| tn <= t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Purpose};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn degenerate_delays() {
        let mut rng = substream(1, Purpose::Delays, 0);
        let s = sample_delays(&DelayModel::Degenerate { value: 0.0 }, 3, &mut rng).unwrap();
        assert_eq!(s, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn delay_sample_means() {
        let n = 1_000_000;
        let mut rng = substream(11, Purpose::Delays, 0);
        let exp = sample_delays(&DelayModel::Exponential { mean: 1.0 }, n, &mut rng).unwrap();
        let mean = exp.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "exponential mean {mean}");

        let geo = sample_delays(&DelayModel::Geometric { mean: 2.0 }, n, &mut rng).unwrap();
        let mean = geo.iter().sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 0.02, "geometric mean {mean}");
        assert!(geo.iter().all(|&s| s >= 1.0 && s.fract() == 0.0));
    }

    #[test]
    fn invalid_models_rejected() {
        let mut rng = substream(1, Purpose::Delays, 0);
        for m in [
            DelayModel::Exponential { mean: 0.0 },
            DelayModel::Geometric { mean: 0.5 },
            DelayModel::Degenerate { value: -1.0 },
        ] {
            assert!(sample_delays(&m, 1, &mut rng).is_err(), "{m:?}");
        }
    }

    #[test]
    fn forced_delays_sum() {
        let t = ChannelTrace::from_parts(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(t.inter_reception, vec![1.5, 2.5]);
        assert_eq!(t.reception_times, vec![1.5, 4.0]);
        assert_eq!(count_received_by(&t, 0.5), 0);
        assert_eq!(count_received_by(&t, 1.5), 1);
        assert_eq!(count_received_by(&t, 10.0), 2);
    }

    #[test]
    fn unit_delays_give_integer_receptions() {
        let mut rng = substream(1, Purpose::Delays, 0);
        let t = transmit(&[0.0; 6], &DelayModel::Degenerate { value: 1.0 }, &mut rng).unwrap();
        for (i, tn) in t.reception_times.iter().enumerate() {
            assert_eq!(*tn, (i + 1) as f64);
        }
    }

    #[test]
    fn negative_waiting_time_rejected() {
        let mut rng = substream(1, Purpose::Delays, 0);
        assert!(transmit(&[1.0, -0.1], &DelayModel::Degenerate { value: 0.0 }, &mut rng).is_err());
    }

    #[test]
    fn mixture_input_mean_inter_reception() {
        let n = 1_000_000;
        let law = MixtureWaitingTime::new(1.0).unwrap();
        let mut wrng = substream(5, Purpose::Codebook, 0);
        let w: Vec<f64> = (0..n).map(|_| law.sample(&mut wrng)).collect();
        let mut rng = substream(5, Purpose::Delays, 0);
        let trace = transmit(&w, &DelayModel::Exponential { mean: 1.0 }, &mut rng).unwrap();
        let mean_d = trace.inter_reception.iter().sum::<f64>() / n as f64;
        assert!((mean_d - E).abs() < 0.01 * E, "mean D {mean_d}");
    }

    #[test]
    fn mixture_inverse_cdf_law() {
        let law = MixtureWaitingTime::new(2.0).unwrap();
        assert_eq!(law.from_uniform(0.1, 2.0), 0.0);
        // median of the tail: v = 1/2
        let u = MixtureWaitingTime::ZERO_MASS + 0.5 * (1.0 - MixtureWaitingTime::ZERO_MASS);
        assert_relative_eq!(law.from_uniform(u, 2.0), 2.0 * E * std::f64::consts::LN_2, max_relative = 1e-12);
    }

    #[test]
    fn reception_times_converge_to_mean() {
        let n = 100_000;
        let mut rng = substream(9, Purpose::Delays, 1);
        let w = vec![0.7; n];
        let t = transmit(&w, &DelayModel::Exponential { mean: 1.3 }, &mut rng).unwrap();
        let ratio = t.reception_times[n - 1] / n as f64;
        assert!((ratio - 2.0).abs() < 0.02 * 2.0);
    }

    #[test]
    fn csv_layout() {
        let t = ChannelTrace::from_parts(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "i,W_i,S_i,D_i,T_i\n1,1,0.5,1.5,1.5\n2,2,0.5,2.5,4\n");
    }

    proptest! {
        #[test]
        fn trace_identities(w in proptest::collection::vec(0.0f64..5.0, 0..40), seed in any::<u64>()) {
            let model = DelayModel::Exponential { mean: 0.8 };
            let t1 = transmit(&w, &model, &mut substream(seed, Purpose::Delays, 0)).unwrap();
            let t2 = transmit(&w, &model, &mut substream(seed, Purpose::Delays, 0)).unwrap();
            prop_assert_eq!(&t1, &t2);
            let mut prev = 0.0;
            for i in 0..t1.len() {
                prop_assert_eq!(t1.inter_reception[i], t1.waiting_times[i] + t1.delays[i]);
                // subtraction recovers S_i up to the rounding of the sum
                let back = t1.inter_reception[i] - t1.waiting_times[i];
                prop_assert!((back - t1.delays[i]).abs() <= f64::EPSILON * t1.inter_reception[i]);
                prop_assert_eq!(t1.reception_times[i], prev + t1.inter_reception[i]);
                prop_assert!(t1.reception_times[i] >= prev);
                prev = t1.reception_times[i];
            }
        }
    }
}
