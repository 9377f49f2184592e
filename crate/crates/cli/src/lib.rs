//! Command-line front end for the register-level AD simulator.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use qad::registers::write_trace_jsonl;
use qad::{
    build_graph, error_bounds, oracle_eval, parse, run, CompGraph, ErrorKind, ErrorReport,
    FixedPointFormat, QadError, ResetMode, RunConfig, RunResult,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Exit status for malformed command lines and unusable configurations.
pub const EXIT_USAGE: i32 = 64;
/// Exit status when a trace or report cannot be written.
pub const EXIT_IO: i32 = 74;

#[derive(Debug, Parser)]
#[command(
    name = "qad",
    version,
    about = "Forward-mode AD on a simulated register machine"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Differentiate an expression at one point and report errors and costs.
    Run(RunArgs),
    /// Repeat `run` over several fractional bit counts.
    Sweep(SweepArgs),
    /// Print the computational graph in DOT format.
    Graph(GraphArgs),
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub expr: String,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long, allow_hyphen_values = true)]
    pub expr: String,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 8)]
    pub int_bits: u32,
    #[arg(long, default_value_t = ResetMode::Hybrid)]
    pub reset_mode: ResetMode,
    /// Emit JSON instead of text.
    #[arg(long)]
    pub json: bool,
    /// Write the gate trace as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 24)]
    pub frac_bits: u32,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub sweep_frac_bits: Vec<u32>,
}

/// A failure paired with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<QadError> for Failure {
    fn from(e: QadError) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

pub fn exit_code(e: &QadError) -> i32 {
    match e.kind() {
        ErrorKind::Parse => 1,
        ErrorKind::Domain => 2,
        ErrorKind::Overflow => 3,
        ErrorKind::Resource => 4,
        ErrorKind::Usage => EXIT_USAGE,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Oracle {
    pub value: f64,
    pub derivative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observed {
    pub value_error: f64,
    pub derivative_error: f64,
}

/// Everything `run` reports for one point and one format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub expr: String,
    pub x0: f64,
    pub format: String,
    pub reset_mode: ResetMode,
    pub result: RunResult,
    pub oracle: Oracle,
    pub observed: Observed,
    pub error_analysis: ErrorReport,
}

/// One row of a precision sweep. Failed rows carry the diagnostic instead of
/// numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub frac_bits: u32,
    pub ok: bool,
    pub observed_value_error: Option<f64>,
    pub observed_deriv_error: Option<f64>,
    pub bound_value: Option<f64>,
    pub bound_deriv: Option<f64>,
    pub gates: Option<u64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub exit_code: i32,
}

pub fn evaluate(
    g: &CompGraph,
    common: &Common,
    frac_bits: u32,
    trace: bool,
) -> Result<RunReport, QadError> {
    let format = FixedPointFormat::new(common.int_bits, frac_bits)?;
    let cfg = RunConfig::new(common.x0, format)
        .reset_mode(common.reset_mode)
        .trace(trace);
    let result = run(g, &cfg)?;
    let exact = oracle_eval::<f64>(g, common.x0)?;
    let error_analysis = error_bounds(g, common.x0, format)?;
    Ok(RunReport {
        expr: canonical_text(&common.expr),
        x0: common.x0,
        format: format.to_string(),
        reset_mode: common.reset_mode,
        observed: Observed {
            value_error: (result.value - exact.v).abs(),
            derivative_error: (result.derivative - exact.d).abs(),
        },
        oracle: Oracle {
            value: exact.v,
            derivative: exact.d,
        },
        result,
        error_analysis,
    })
}

fn canonical_text(expr: &str) -> String {
    parse(expr)
        .map(|e| e.to_string())
        .unwrap_or_else(|_| expr.to_string())
}

fn write_trace(report: &RunReport, path: &Path) -> Result<(), Failure> {
    let events = report.result.trace.as_deref().unwrap_or(&[]);
    File::create(path)
        .and_then(|f| {
            let mut w = BufWriter::new(f);
            write_trace_jsonl(events, &mut w)?;
            w.flush()
        })
        .map_err(|e| Failure {
            code: EXIT_IO,
            message: format!("cannot write trace {}: {e}", path.display()),
        })
}

/// Trace file for one sweep row: `run.jsonl` becomes `run.b16.jsonl`.
pub fn sweep_trace_path(path: &Path, frac_bits: u32) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.b{frac_bits}.{}", ext.to_string_lossy()),
        None => format!("{stem}.b{frac_bits}"),
    };
    path.with_file_name(name)
}

fn graph_of(expr: &str) -> Result<CompGraph, Failure> {
    Ok(build_graph(&parse(expr)?))
}

pub fn render_run(r: &RunReport) -> String {
    let res = &r.result;
    let ea = &r.error_analysis;
    let gates: Vec<String> = res
        .gate_counts
        .iter()
        .map(|(k, n)| format!("{k}={n}"))
        .collect();
    let mut s = String::new();
    let _ = writeln!(s, "expression     {}", r.expr);
    let _ = writeln!(s, "x0             {}", r.x0);
    let _ = writeln!(s, "format         {}  reset {}", r.format, r.reset_mode);
    let _ = writeln!(s, "value          {}  [{}]", res.value, res.value_bits);
    let _ = writeln!(
        s,
        "derivative     {}  [{}]",
        res.derivative, res.derivative_bits
    );
    let _ = writeln!(
        s,
        "oracle         value {}  derivative {}",
        r.oracle.value, r.oracle.derivative
    );
    let _ = writeln!(
        s,
        "observed error value {:e}  derivative {:e}",
        r.observed.value_error, r.observed.derivative_error
    );
    let _ = writeln!(
        s,
        "error bound    value {:e}  derivative {:e}",
        ea.bound_value, ea.bound_deriv
    );
    let gates = if gates.is_empty() {
        "none".to_string()
    } else {
        gates.join(" ")
    };
    let _ = writeln!(s, "gates          {gates}");
    let _ = writeln!(
        s,
        "registers      peak {}  retired {}  ancillas {}",
        res.peak_live_registers, res.retired_registers, res.ancilla_used
    );
    let c = &ea.cost_bound;
    let _ = writeln!(
        s,
        "cost           total {}  r*c_max = {}*{} = {}",
        c.total, c.r, c.c_max, c.bound
    );
    for w in &ea.warnings {
        let _ = writeln!(s, "warning        {w}");
    }
    s
}

pub fn render_sweep(rows: &[SweepRow]) -> String {
    let mut s = format!(
        "{:>4}  {:>12}  {:>12}  {:>12}  {:>12}  {:>8}\n",
        "b", "err_value", "err_deriv", "bound_value", "bound_deriv", "gates"
    );
    for row in rows {
        if row.ok {
            let _ = writeln!(
                s,
                "{:>4}  {:>12.4e}  {:>12.4e}  {:>12.4e}  {:>12.4e}  {:>8}",
                row.frac_bits,
                row.observed_value_error.unwrap_or(f64::NAN),
                row.observed_deriv_error.unwrap_or(f64::NAN),
                row.bound_value.unwrap_or(f64::NAN),
                row.bound_deriv.unwrap_or(f64::NAN),
                row.gates.unwrap_or(0)
            );
        } else {
            let _ = writeln!(
                s,
                "{:>4}  failed: {}",
                row.frac_bits,
                row.error.as_deref().unwrap_or("")
            );
        }
    }
    s
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

pub fn cmd_run(args: &RunArgs) -> Result<String, Failure> {
    let c = &args.common;
    let g = graph_of(&c.expr)?;
    let report = evaluate(&g, c, args.frac_bits, c.trace.is_some())?;
    if let Some(path) = &c.trace {
        write_trace(&report, path)?;
    }
    Ok(if c.json {
        to_json(&report)
    } else {
        render_run(&report)
    })
}

/// Returns the rendered table and the exit status of the first failed row
/// (0 when every row succeeded).
pub fn cmd_sweep(args: &SweepArgs) -> Result<(String, i32), Failure> {
    let c = &args.common;
    let g = graph_of(&c.expr)?;
    let mut bits = args.sweep_frac_bits.clone();
    bits.sort_unstable();
    bits.dedup();

    let reports: Vec<(u32, Result<RunReport, QadError>)> = bits
        .par_iter()
        .map(|&b| (b, evaluate(&g, c, b, c.trace.is_some())))
        .collect();

    let mut rows = Vec::with_capacity(reports.len());
    for (b, outcome) in reports {
        let row = match outcome {
            Ok(r) => {
                if let Some(path) = &c.trace {
                    write_trace(&r, &sweep_trace_path(path, b))?;
                }
                SweepRow {
                    frac_bits: b,
                    ok: true,
                    observed_value_error: Some(r.observed.value_error),
                    observed_deriv_error: Some(r.observed.derivative_error),
                    bound_value: Some(r.error_analysis.bound_value),
                    bound_deriv: Some(r.error_analysis.bound_deriv),
                    gates: Some(r.result.gate_counts.values().sum()),
                    error: None,
                    exit_code: 0,
                }
            }
            Err(e) => SweepRow {
                frac_bits: b,
                ok: false,
                observed_value_error: None,
                observed_deriv_error: None,
                bound_value: None,
                bound_deriv: None,
                gates: None,
                error: Some(e.to_string()),
                exit_code: exit_code(&e),
            },
        };
        rows.push(row);
    }
    let code = rows
        .iter()
        .map(|r| r.exit_code)
        .find(|&c| c != 0)
        .unwrap_or(0);
    let text = if c.json {
        to_json(&rows)
    } else {
        render_sweep(&rows)
    };
    Ok((text, code))
}

pub fn cmd_graph(args: &GraphArgs) -> Result<String, Failure> {
    Ok(graph_of(&args.expr)?.to_dot())
}

/// Runs a parsed command line, writing the report to `out` and diagnostics
/// to `err`. Returns the process exit status.
pub fn execute(cli: &Cli, out: &mut impl Write, err: &mut impl Write) -> io::Result<i32> {
    let outcome = match &cli.command {
        Command::Run(a) => cmd_run(a).map(|s| (s, 0)),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Graph(a) => cmd_graph(a).map(|s| (s, 0)),
    };
    match outcome {
        Ok((text, code)) => {
            out.write_all(text.as_bytes())?;
            Ok(code)
        }
        Err(f) => {
            writeln!(err, "error: {}", f.message)?;
            Ok(f.code)
        }
    }
}
