//! `sabr-boundary`: hitting probabilities, densities, geometry checks,
//! kernels and Monte Carlo from the command line.
//!
//! Exit codes: 0 ok, 1 validation, 2 non-convergence, 3 I/O.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use output::{emit, record_csv, to_json, RunRecord};

pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "sabr-boundary",
    version,
    about = "Probability that the drifted SABR forward reaches zero"
)]
struct Cli {
    /// Emit JSON (the default).
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    /// Emit a CSV header and one row instead of JSON.
    #[arg(long, global = true)]
    csv: bool,
    /// Write the output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Copy, Serialize)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub nu: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub y0: f64,
}

#[derive(Args, Debug, Clone, Copy, Serialize)]
pub struct SeriesArgs {
    /// Relative truncation tolerance of the Bessel series.
    #[arg(long = "series-rel-tol", default_value_t = 1e-14)]
    #[serde(rename = "series-rel-tol")]
    pub series_rel_tol: f64,
    /// Term cap of the Bessel series.
    #[arg(long = "n-max", default_value_t = 10_000)]
    #[serde(rename = "n-max")]
    pub n_max: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Probability that X reaches zero.
    Prob {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        series: SeriesArgs,
    },
    /// Joint first-passage density f(s, t), s < t.
    Density {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        t: f64,
        #[command(flatten)]
        series: SeriesArgs,
    },
    /// Probability restricted to second passage by T.
    Cumulative {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "T", alias = "horizon")]
        horizon: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        series: SeriesArgs,
    },
    /// Probabilities for every row of a CSV grid (columns beta,rho,nu,x0,y0).
    Sweep {
        #[arg(long = "grid-file")]
        grid_file: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        series: SeriesArgs,
    },
    /// Apply one of the chart maps, optionally with residual checks.
    Map {
        #[arg(long = "map")]
        map: String,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, allow_negative_numbers = true)]
        y: f64,
        #[command(flatten)]
        model: ModelArgs,
        /// Also report pullback and diagram residuals.
        #[arg(long)]
        check: bool,
    },
    /// Heat kernel value between two points.
    Kernel {
        #[arg(long, value_enum)]
        space: KernelSpace,
        #[arg(long)]
        t: f64,
        #[arg(long, allow_negative_numbers = true)]
        x1: f64,
        #[arg(long, allow_negative_numbers = true)]
        y1: f64,
        #[arg(long, allow_negative_numbers = true)]
        x2: f64,
        #[arg(long, allow_negative_numbers = true)]
        y2: f64,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Monte Carlo estimate.
    Mc {
        /// bridge_bm, naive_bm (wedge), euler_drifted_sabr, euler_sabr, hobson_normal (SABR).
        #[arg(long, default_value = "bridge_bm")]
        scheme: String,
        #[arg(long, default_value_t = 100_000)]
        paths: u64,
        /// Step size; defaults to 1e-3·r0² for the wedge schemes, 1e-3 otherwise.
        #[arg(long)]
        dt: Option<f64>,
        /// Horizon; defaults to 400·r0² for the wedge schemes, 1 otherwise.
        #[arg(long)]
        tmax: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Worker threads (0: SABR_BOUNDARY_THREADS, then all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[command(flatten)]
        model: ModelArgs,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum KernelSpace {
    H,
    G0,
    G,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                EXIT_VALIDATION as u8
            } else {
                0
            });
        }
    };
    let start = Instant::now();
    let run = commands::run(&cli.command);
    let table_written = run.table_written();

    if let commands::Payload::Table(table) = &run.payload {
        // The table goes to --out (or stdout); the record follows on stdout
        // only when the table went to a file.
        if let Err(e) = emit(table, cli.out.as_deref()) {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_IO as u8);
        }
        if cli.out.is_none() {
            if let Some(msg) = &run.error {
                eprintln!("error: {msg}");
            }
            return ExitCode::from(run.code as u8);
        }
    }

    let rec = RunRecord {
        command: run.command,
        version: env!("CARGO_PKG_VERSION"),
        params: run.params,
        result: match run.payload {
            commands::Payload::Value(v) => v,
            commands::Payload::Table(_) => run.summary,
        },
        error_estimate: run.error_estimate,
        error: run.error.clone(),
        exit_code: run.code,
        wall_time_s: start.elapsed().as_secs_f64(),
        seed: run.seed,
        time_unit: "brownian",
    };
    if let Some(msg) = &run.error {
        eprintln!("error: {msg}");
    }
    let text = if cli.csv {
        record_csv(&rec)
    } else {
        to_json(&rec)
    };
    let target = if table_written {
        None
    } else {
        cli.out.as_deref()
    };
    match text.and_then(|t| emit(&t, target)) {
        Ok(()) => ExitCode::from(run.code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_IO as u8)
        }
    }
}
