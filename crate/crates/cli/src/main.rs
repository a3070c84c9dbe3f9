use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use timectl_core::capacity::{capacity_exponential, capacity_numeric, default_chi_grid};
use timectl_core::codec::measure_error_rate;
use timectl_core::harness::output::{
    emit_to_path, write_capacity_csv, write_codec_csv, write_estimate_csv, write_sweep_csv, write_trace_csv,
    CapacityRow, CodecBenchRow,
};
use timectl_core::harness::svg::{Chart, Series};
use timectl_core::harness::sweep::{capacity_grid, episode_seed};
use timectl_core::harness::{
    estimation_experiment, monotonicity_violations, run_episode, sweep_capacity, ConfigOverrides, EstimationConfig,
    ExperimentConfig, Mode, SEED_ENV,
};
use timectl_core::rng::mix;
use timectl_core::{CapacityOptions, CodebookMode, DiscretizedDist, ErrorBehavior, ErrorRateSpec, Layout};

#[derive(Parser)]
#[command(name = "timectl", version, about = "Control and estimation of an unstable plant over a timing channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one closed-loop episode and write its trace.
    Run(RunArgs),
    /// Monte Carlo success fraction over a grid of channel capacities.
    Sweep(SweepArgs),
    /// Timing capacity of a service-delay law, closed form and numeric.
    Capacity(CapacityArgs),
    /// Measured ML decoding error rate of random timing codebooks.
    CodecBench(CodecBenchArgs),
    /// Open-loop estimation error and mutual information under full coding.
    Estimate(EstimateArgs),
}

/// Experiment parameters. Values given here override the config file.
#[derive(Args)]
struct ExperimentArgs {
    /// Flat TOML file with any subset of the experiment keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    /// Feedback gain.
    #[arg(long, allow_negative_numbers = true)]
    k: Option<f64>,
    /// Bound on |X(0)|.
    #[arg(long)]
    l: Option<f64>,
    #[arg(long)]
    mean_d: Option<f64>,
    /// Channel capacity in bits per step.
    #[arg(long)]
    capacity_bits: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    horizon: Option<u32>,
    #[arg(long)]
    success_threshold: Option<f64>,
    #[arg(long)]
    success_step: Option<u32>,
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    #[arg(long)]
    error_behavior: Option<ErrorBehavior>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    divergence_factor: Option<f64>,
    #[arg(long)]
    max_depth: Option<u32>,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            ConfigOverrides::load(path)
                .with_context(|| format!("reading {}", path.display()))?
                .apply(&mut cfg);
        }
        let flags = ConfigOverrides {
            mode: self.mode,
            a: self.a,
            b: self.b,
            k: self.k,
            l: self.l,
            mean_d: self.mean_d,
            capacity_bits: self.capacity_bits,
            eta: self.eta,
            horizon: self.horizon,
            success_threshold: self.success_threshold,
            success_step: self.success_step,
            runs: self.runs,
            seed: self.seed,
            error_behavior: self.error_behavior,
            gamma: self.gamma,
            divergence_factor: self.divergence_factor,
            max_depth: self.max_depth,
        };
        flags.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Episode index within the seeded experiment.
    #[arg(long, default_value_t = 0)]
    episode: u64,
    /// Trace CSV path; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Plot of |X[m]| on a log scale.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Smallest capacity, as a multiple of log2 a.
    #[arg(long, default_value_t = 0.5)]
    lo: f64,
    /// Largest capacity, as a multiple of log2 a.
    #[arg(long, default_value_t = 1.5)]
    hi: f64,
    #[arg(long, default_value_t = 11)]
    points: usize,
    /// Explicit capacities in bits per step; replaces --lo/--hi/--points.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DelayKind {
    Exponential,
    Geometric,
}

#[derive(Args)]
struct CapacityArgs {
    #[arg(long, value_enum, default_value = "exponential")]
    delay: DelayKind,
    #[arg(long, default_value_t = 1.0)]
    mean_s: f64,
    /// Lattice spacing; geometric delays always use 1.
    #[arg(long, default_value_t = 0.05)]
    grid_step: f64,
    /// Exponential support is cut here, in units of time.
    #[arg(long, default_value_t = 25.0)]
    truncation: f64,
    /// Number of mean-waiting-time constraints scanned.
    #[arg(long, default_value_t = 10)]
    chi_points: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Flat,
    Nested,
}

#[derive(Args)]
struct CodecBenchArgs {
    /// Block lengths.
    #[arg(long, value_delimiter = ',', default_values_t = [4u32, 8, 12])]
    n: Vec<u32>,
    /// Ratios n'/n; each n' is rounded to the nearest integer.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.5])]
    ratio: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    mean_s: f64,
    #[arg(long, default_value_t = 2000)]
    trials: u64,
    #[arg(long, env = SEED_ENV, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 18)]
    max_depth: u32,
    #[arg(long, value_enum, default_value = "flat")]
    layout: LayoutArg,
    /// Reuse one codebook for every trial instead of drawing a fresh one.
    #[arg(long)]
    fixed: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Flat TOML file with any subset of the estimation keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    #[arg(long)]
    max_depth: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    n_values: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    rate_fractions: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Plot of P(|error| > epsilon) against n.
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn emit(
    out: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> timectl_core::Result<()>,
) -> Result<()> {
    match out {
        Some(path) => emit_to_path(path, write).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            write(&mut stdout)?;
            Ok(())
        }
    }
}

fn save_svg(path: Option<&Path>, chart: &Chart) -> Result<()> {
    if let Some(path) = path {
        std::fs::write(path, chart.render()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn run(args: &RunArgs) -> Result<()> {
    let cfg = args.exp.resolve()?;
    let trace = run_episode(&cfg, episode_seed(cfg.seed, args.episode))?;
    emit(args.out.as_deref(), |w| write_trace_csv(&trace, w))?;
    let s = &trace.summary;
    eprintln!(
        "success={} diverged={} final|X|={} receptions={} decode_errors={} lqr_cost={}",
        s.success,
        s.diverged,
        s.final_abs_state,
        s.receptions,
        s.decode_errors,
        s.lqr_cost.map_or("n/a".to_string(), |c| c.to_string())
    );
    let chart = Chart {
        title: format!("capacity {:.4} bits/step, a = {}", cfg.capacity_bits, cfg.a),
        x_label: "m".into(),
        y_label: "|X[m]|".into(),
        series: vec![Series {
            label: cfg.error_behavior.to_string(),
            points: trace.steps.iter().map(|r| (r.m as f64, r.x)).collect(),
        }],
        log_y: true,
        hlines: vec![(cfg.success_threshold, "threshold".into())],
        ..Chart::default()
    };
    save_svg(args.svg.as_deref(), &chart)
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let cfg = args.exp.resolve()?;
    let grid = match &args.grid {
        Some(g) => g.clone(),
        None => capacity_grid(&cfg, args.lo, args.hi, args.points),
    };
    let result = sweep_capacity(&cfg, &grid)?;
    emit(args.out.as_deref(), |w| write_sweep_csv(&result, w))?;
    for j in monotonicity_violations(&result) {
        eprintln!(
            "warning: success fraction drops between capacities {} and {}",
            result.rows[j].capacity_bits,
            result.rows[j + 1].capacity_bits
        );
    }
    let chart = Chart {
        title: format!("success fraction, {} runs per point", cfg.runs),
        x_label: "capacity (bits/step)".into(),
        y_label: "success fraction".into(),
        series: vec![Series {
            label: cfg.error_behavior.to_string(),
            points: result.rows.iter().map(|r| (r.capacity_bits, r.success_fraction)).collect(),
        }],
        vlines: vec![(cfg.critical_bits(), "log2 a".into())],
        ..Chart::default()
    };
    save_svg(args.svg.as_deref(), &chart)
}

fn capacity(args: &CapacityArgs) -> Result<()> {
    let (name, delay, step, closed) = match args.delay {
        DelayKind::Exponential => (
            "exponential",
            DiscretizedDist::exponential_ceil(args.mean_s, args.grid_step, args.truncation)?,
            args.grid_step,
            Some(capacity_exponential(args.mean_s)?),
        ),
        DelayKind::Geometric => ("geometric", DiscretizedDist::geometric(args.mean_s, 1e-9)?, 1.0, None),
    };
    let opts = CapacityOptions { grid_step: step, tol: args.tol, ..CapacityOptions::default() };
    let res = capacity_numeric(&delay, &default_chi_grid(delay.mean(), args.chi_points), &opts)?;
    if !res.converged {
        eprintln!("warning: some inner solves hit the iteration cap");
    }
    let row = CapacityRow {
        delay: name.into(),
        mean_s: args.mean_s,
        grid_step: step,
        closed_form_nats: closed,
        numeric_nats: res.capacity_nats_per_sec,
        optimal_chi: res.optimal_chi,
        iterations: res.iterations as u64,
        converged: res.converged,
        bound_gap: res.bound_gap,
    };
    emit(args.out.as_deref(), |w| write_capacity_csv(&[row], w))
}

fn codec_bench(args: &CodecBenchArgs) -> Result<()> {
    if args.n.is_empty() || args.ratio.is_empty() {
        bail!("need at least one n and one ratio");
    }
    let capacity = capacity_exponential(args.mean_s)?;
    let mut rows = Vec::new();
    for (ri, &ratio) in args.ratio.iter().enumerate() {
        if ratio.is_nan() || ratio <= 0.0 {
            bail!("ratio must be positive, got {ratio}");
        }
        for (ni, &n) in args.n.iter().enumerate() {
            let n_prime = (ratio * n as f64).round().max(1.0) as u32;
            let spec = ErrorRateSpec {
                layout: match args.layout {
                    LayoutArg::Flat => Layout::Flat,
                    LayoutArg::Nested => Layout::Nested,
                },
                mode: if args.fixed { CodebookMode::Fixed } else { CodebookMode::Fresh },
                max_depth: args.max_depth,
                ..ErrorRateSpec::new(n, n_prime, args.mean_s, args.trials, mix(mix(args.seed, ri as u64), ni as u64))
            };
            let measured = measure_error_rate(&spec)?;
            rows.push(CodecBenchRow {
                n,
                n_prime,
                rate_nats: spec.rate_nats(),
                capacity_nats: capacity,
                trials: measured.trials,
                errors: measured.errors,
                error_rate: measured.rate(),
            });
        }
    }
    emit(args.out.as_deref(), |w| write_codec_csv(&rows, w))
}

fn estimate(args: &EstimateArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            EstimationConfig::from_toml_str(&text)?
        }
        None => EstimationConfig::default(),
    };
    if let Some(v) = args.a {
        cfg.a = v;
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.max_depth {
        cfg.max_depth = v;
    }
    if let Some(v) = &args.n_values {
        cfg.n_values = v.clone();
    }
    if let Some(v) = &args.rate_fractions {
        cfg.rate_fractions = v.clone();
    }
    let rows = estimation_experiment(&cfg)?;
    emit(args.out.as_deref(), |w| write_estimate_csv(&rows, w))?;
    let mut series = Vec::new();
    for &fraction in &cfg.rate_fractions {
        for &eps in &cfg.epsilons {
            series.push(Series {
                label: format!("R = {fraction} C, eps = {eps}"),
                points: rows
                    .iter()
                    .filter(|r| r.rate_fraction == fraction && r.epsilon == eps)
                    .map(|r| (r.n as f64, r.exceed_fraction))
                    .collect(),
            });
        }
    }
    let chart = Chart {
        title: format!("open-loop estimation, {} trials per point", cfg.trials),
        x_label: "n".into(),
        y_label: "P(|error| > eps)".into(),
        series,
        ..Chart::default()
    };
    save_svg(args.svg.as_deref(), &chart)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Capacity(a) => capacity(a),
        Command::CodecBench(a) => codec_bench(a),
        Command::Estimate(a) => estimate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
