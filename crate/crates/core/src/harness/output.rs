//! Versioned CSV artifacts.
//!
//! Every file starts with a `# timectl-<kind> v<version>` comment line,
//! then a fixed header row. Floats use Rust's shortest round-trip
//! representation, so output is byte-identical for identical results.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::episode::SimTrace;
use super::estimation::EstimationRow;
use super::sweep::SweepResult;
use crate::error::Result;

pub const FORMAT_VERSION: u32 = 1;

pub const TRACE_HEADER: [&str; 7] = ["m", "x", "u", "x_hat", "decode_event", "decode_correct", "bits_resolved"];
pub const SWEEP_HEADER: [&str; 6] =
    ["capacity_bits", "runs", "successes", "success_fraction", "mean_lqr_cost", "diverged"];
pub const CODEC_HEADER: [&str; 7] = ["n", "n_prime", "rate_nats", "capacity_nats", "trials", "errors", "error_rate"];
pub const ESTIMATE_HEADER: [&str; 13] = [
    "rate_fraction",
    "rate_nats",
    "n",
    "t_n",
    "epsilon",
    "trials",
    "exceed",
    "exceed_fraction",
    "mean_received",
    "max_received",
    "mi_plugin",
    "mi_std_error",
    "mi_bound",
];
pub const CAPACITY_HEADER: [&str; 9] = [
    "delay",
    "mean_s",
    "grid_step",
    "closed_form_nats",
    "numeric_nats",
    "optimal_chi",
    "iterations",
    "converged",
    "bound_gap",
];

/// One row of the `codec-bench` output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodecBenchRow {
    pub n: u32,
    pub n_prime: u32,
    pub rate_nats: f64,
    pub capacity_nats: f64,
    pub trials: u64,
    pub errors: u64,
    pub error_rate: f64,
}

/// One row of the `capacity` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityRow {
    pub delay: String,
    pub mean_s: f64,
    pub grid_step: f64,
    /// Empty for laws without a closed form.
    pub closed_form_nats: Option<f64>,
    pub numeric_nats: f64,
    pub optimal_chi: f64,
    pub iterations: u64,
    pub converged: bool,
    pub bound_gap: f64,
}

// Debug keeps round-trip precision but switches to exponent form for
// very small or large magnitudes.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn write_table<W: Write, const N: usize>(
    mut out: W,
    kind: &str,
    header: [&str; N],
    rows: impl IntoIterator<Item = [String; N]>,
) -> Result<()> {
    writeln!(out, "# timectl-{kind} v{FORMAT_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv<W: Write>(trace: &SimTrace, out: W) -> Result<()> {
    write_table(
        out,
        "trace",
        TRACE_HEADER,
        trace.steps.iter().map(|s| {
            [
                s.m.to_string(),
                num(s.x),
                num(s.u),
                num(s.x_hat),
                (s.decode_event as u8).to_string(),
                (s.decode_correct as u8).to_string(),
                s.bits_resolved.to_string(),
            ]
        }),
    )
}

pub fn write_sweep_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    write_table(
        out,
        "sweep",
        SWEEP_HEADER,
        result.rows.iter().map(|r| {
            [
                num(r.capacity_bits),
                r.runs.to_string(),
                r.successes.to_string(),
                num(r.success_fraction),
                num(r.mean_lqr_cost),
                r.diverged.to_string(),
            ]
        }),
    )
}

pub fn write_codec_csv<W: Write>(rows: &[CodecBenchRow], out: W) -> Result<()> {
    write_table(
        out,
        "codec",
        CODEC_HEADER,
        rows.iter().map(|r| {
            [
                r.n.to_string(),
                r.n_prime.to_string(),
                num(r.rate_nats),
                num(r.capacity_nats),
                r.trials.to_string(),
                r.errors.to_string(),
                num(r.error_rate),
            ]
        }),
    )
}

pub fn write_estimate_csv<W: Write>(rows: &[EstimationRow], out: W) -> Result<()> {
    write_table(
        out,
        "estimate",
        ESTIMATE_HEADER,
        rows.iter().map(|r| {
            [
                num(r.rate_fraction),
                num(r.rate_nats),
                r.n.to_string(),
                num(r.t_n),
                num(r.epsilon),
                r.trials.to_string(),
                r.exceed.to_string(),
                num(r.exceed_fraction),
                num(r.mean_received),
                r.max_received.to_string(),
                num(r.mi_plugin),
                num(r.mi_std_error),
                num(r.mi_bound),
            ]
        }),
    )
}

pub fn write_capacity_csv<W: Write>(rows: &[CapacityRow], out: W) -> Result<()> {
    write_table(
        out,
        "capacity",
        CAPACITY_HEADER,
        rows.iter().map(|r| {
            [
                r.delay.clone(),
                num(r.mean_s),
                num(r.grid_step),
                r.closed_form_nats.map(num).unwrap_or_default(),
                num(r.numeric_nats),
                num(r.optimal_chi),
                r.iterations.to_string(),
                r.converged.to_string(),
                num(r.bound_gap),
            ]
        }),
    )
}

/// Runs `write` against a buffered file at `path`.
pub fn emit_to_path(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write(&mut out)?;
    out.flush()?;
    Ok(())
}

/// Writes a sweep result to `path`.
pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    emit_to_path(path, |w| write_sweep_csv(result, w))
}

/// Reads the data rows of a file produced here, checking kind and version.
pub fn read_table(text: &str, kind: &str) -> Result<Vec<csv::StringRecord>> {
    let first = text.lines().next().unwrap_or_default();
    let want = format!("# timectl-{kind} v{FORMAT_VERSION}");
    if first != want {
        return Err(crate::error::Error::Parse(format!("expected '{want}', found '{first}'")));
    }
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    Ok(r.records().collect::<std::result::Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_episode, sweep::SweepRow, ExperimentConfig};

    #[test]
    fn trace_csv_has_the_fixed_header_and_one_row_per_step() {
        let cfg = ExperimentConfig::default();
        let trace = run_episode(&cfg, 2).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# timectl-trace v1"));
        assert_eq!(lines.next(), Some("m,x,u,x_hat,decode_event,decode_correct,bits_resolved"));
        assert_eq!(read_table(&text, "trace").unwrap().len(), trace.steps.len());
        assert!(read_table(&text, "sweep").is_err());
    }

    #[test]
    fn sweep_csv_round_trips_numbers() {
        let row = SweepRow {
            capacity_bits: 0.1 + 0.2,
            runs: 3,
            successes: 1,
            success_fraction: 1.0 / 3.0,
            mean_lqr_cost: f64::NAN,
            diverged: 2,
        };
        let mut buf = Vec::new();
        write_sweep_csv(&SweepResult { rows: vec![row] }, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let recs = read_table(&text, "sweep").unwrap();
        assert_eq!(recs[0][0].parse::<f64>().unwrap(), 0.1 + 0.2);
        assert_eq!(recs[0][3].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(&recs[0][4], "NaN");
    }

    #[test]
    fn files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        emit_csv(&SweepResult { rows: vec![] }, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.ends_with("capacity_bits,runs,successes,success_fraction,mean_lqr_cost,diverged\n"));
    }
}
