//! Experiments: closed-loop episodes, Monte Carlo sweeps, the open-loop
//! estimation experiment, configuration and artifact output.

pub mod config;
pub mod episode;
pub mod estimation;
pub mod output;
pub mod svg;
pub mod sweep;

pub use config::{load_config, save_config, ConfigOverrides, ExperimentConfig, Mode, SEED_ENV};
pub use episode::{lqr_cost, run_episode, SimTrace, StepRecord, TraceSummary};
pub use estimation::{estimation_experiment, EstimationConfig, EstimationRow};
pub use sweep::{monotonicity_violations, monte_carlo, sweep_capacity, SweepResult, SweepRow};
