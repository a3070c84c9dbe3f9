//! Experiment configuration as a flat TOML document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::ErrorBehavior;
use crate::error::{config, Error, Result};

/// Environment variable that overrides the default seed.
pub const SEED_ENV: &str = "TIMECTL_SEED";

/// How decode outcomes are produced in the discrete closed loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// A coin with `P_e = exp(-eta k)` decides each decode.
    #[default]
    AbstractError,
    /// Real codebook, exponential delays and ML decoding.
    FullCoding,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "abstract_error" | "abstract" => Ok(Mode::AbstractError),
            "full_coding" | "full" => Ok(Mode::FullCoding),
            other => Err(config(format!("unknown mode '{other}' (expected abstract_error or full_coding)"))),
        }
    }
}

/// Parameters of the discrete-time closed-loop experiment.
///
/// `capacity_bits` is bits per step. In full-coding mode it is the coding
/// rate, and service delays are exponential with mean `mean_d / e` so that
/// the capacity-achieving input yields `E(D) = mean_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub a: f64,
    pub b: f64,
    pub k: f64,
    pub l: f64,
    pub mean_d: f64,
    pub capacity_bits: f64,
    pub eta: f64,
    pub horizon: u32,
    pub success_threshold: f64,
    pub success_step: u32,
    pub runs: u64,
    pub seed: u64,
    pub error_behavior: ErrorBehavior,
    pub gamma: f64,
    /// A run stops as diverged once `|X| > divergence_factor * l`.
    pub divergence_factor: f64,
    /// Codebook depth cap for full-coding mode.
    pub max_depth: u32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::AbstractError,
            a: 1.2,
            b: 1.0,
            k: 0.4,
            l: 1.0,
            mean_d: 2.0,
            capacity_bits: 1.2 * 1.2f64.log2(),
            eta: 0.09,
            horizon: 250,
            success_threshold: 0.05,
            success_step: 250,
            runs: 500,
            seed: 1,
            error_behavior: ErrorBehavior::OpenLoop,
            gamma: 1.1,
            divergence_factor: 1e9,
            max_depth: crate::codec::DEFAULT_MAX_DEPTH,
        }
    }
}

impl ExperimentConfig {
    /// `log2 a`, the critical capacity in bits per step.
    pub fn critical_bits(&self) -> f64 {
        self.a.log2()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(config(format!("{field}: {why}")));
        if !(self.a > 1.0 && self.a.is_finite()) {
            return bad("a", format!("discrete plant needs a > 1, got {}", self.a));
        }
        if !self.b.is_finite() || !self.k.is_finite() {
            return bad("b/k", "gains must be finite".into());
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return bad("l", format!("must be positive, got {}", self.l));
        }
        if !(self.mean_d >= 1.0 && self.mean_d.is_finite()) {
            return bad("mean_d", format!("must be at least one step, got {}", self.mean_d));
        }
        if !(self.capacity_bits >= 0.0 && self.capacity_bits.is_finite()) {
            return bad("capacity_bits", format!("must be nonnegative, got {}", self.capacity_bits));
        }
        if !(self.eta >= 0.0) {
            return bad("eta", format!("must be nonnegative, got {}", self.eta));
        }
        if self.horizon < self.success_step {
            return bad("horizon", format!("{} is before success_step {}", self.horizon, self.success_step));
        }
        if self.runs == 0 {
            return bad("runs", "need at least one run".into());
        }
        if !(self.success_threshold >= 0.0) {
            return bad("success_threshold", "must be nonnegative".into());
        }
        if !(self.divergence_factor > 0.0) {
            return bad("divergence_factor", "must be positive".into());
        }
        if !(self.gamma > 0.0) {
            return bad("gamma", "must be positive".into());
        }
        if self.mode == Mode::FullCoding && self.capacity_bits == 0.0 {
            return bad("capacity_bits", "full-coding mode needs a positive rate".into());
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Any subset of [`ExperimentConfig`] fields, for layering a file and
/// command-line flags over the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub mode: Option<Mode>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub k: Option<f64>,
    pub l: Option<f64>,
    pub mean_d: Option<f64>,
    pub capacity_bits: Option<f64>,
    pub eta: Option<f64>,
    pub horizon: Option<u32>,
    pub success_threshold: Option<f64>,
    pub success_step: Option<u32>,
    pub runs: Option<u64>,
    pub seed: Option<u64>,
    pub error_behavior: Option<ErrorBehavior>,
    pub gamma: Option<f64>,
    pub divergence_factor: Option<f64>,
    pub max_depth: Option<u32>,
}

impl ConfigOverrides {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Writes every present field into `cfg`.
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        set!(
            mode,
            a,
            b,
            k,
            l,
            mean_d,
            capacity_bits,
            eta,
            horizon,
            success_threshold,
            success_step,
            runs,
            seed,
            error_behavior,
            gamma,
            divergence_factor,
            max_depth
        );
    }
}

/// Reads a complete configuration; every field must be present.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_toml_str(&std::fs::read_to_string(path)?)
}

/// Writes `cfg` as TOML.
pub fn save_config(cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    std::fs::write(path, cfg.to_toml_string())?;
    Ok(())
}

/// Parses a seed from the environment variable's value.
pub fn seed_from_env_value(value: &str) -> Result<u64> {
    value.trim().parse().map_err(|_| config(format!("{SEED_ENV} must be an unsigned integer, got '{value}'")))
}
