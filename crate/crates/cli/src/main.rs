use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ghrelax::solver::{CChoice, SolverConfig, DEFAULT_RUN_CAP};

mod commands;

/// Gromov-Hausdorff distance bounds for finite metric spaces.
#[derive(Debug, Parser)]
#[command(name = "ghrelax", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bound the distance between two spaces given as distance-matrix files.
    Compute {
        file_a: PathBuf,
        file_b: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Recover random spaces from isometric copies; CSV on stdout.
    Synthetic {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Comma-separated values of c, each a number or "auto".
        #[arg(long, default_value = "auto", value_delimiter = ',', value_parser = parse_c)]
        c_grid: Vec<CChoice>,
        /// Edge probability for graph instances.
        #[arg(long, default_value_t = 0.05)]
        p: f64,
        #[arg(long, default_value_t = 1000)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-16)]
        gap_tol: f64,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[arg(long, default_value_t = RunCap(Some(DEFAULT_RUN_CAP)), value_parser = parse_run_cap)]
        run_cap: RunCap,
    },
    /// Circle versus hemisphere through ε-nets; JSON on stdout.
    Spheres {
        /// Net resolution in radians.
        #[arg(long, default_value_t = std::f64::consts::PI / 13.0)]
        delta: f64,
        #[arg(long, default_value_t = 37)]
        circle_points: usize,
        #[arg(long, default_value_t = 0.5)]
        ring_fraction: f64,
        #[arg(long, default_value_t = 0.5)]
        azimuth_fraction: f64,
        /// Write both nets as point CSV files into this directory.
        #[arg(long)]
        write_points: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Exact distance by exhaustive search (small inputs only).
    Oracle {
        file_a: PathBuf,
        file_b: PathBuf,
        #[arg(long)]
        strict_metric: bool,
    },
    /// Distortion gap, safe c and non-convexity diagnostics.
    Diagnose {
        file_a: PathBuf,
        file_b: PathBuf,
        #[arg(long, default_value = "auto", value_parser = parse_c)]
        c: CChoice,
        #[arg(long)]
        strict_metric: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Cloud,
    Graph,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Cloud => "cloud",
            Kind::Graph => "graph",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct RunCap(Option<usize>);

impl std::fmt::Display for RunCap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            Some(cap) => write!(f, "{cap}"),
            None => f.write_str("none"),
        }
    }
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Exponentiation base: a number ≥ 1 or "auto" [default: auto, or
    /// 1e12 for spheres].
    #[arg(long, value_parser = parse_c)]
    c: Option<CChoice>,
    /// Frank-Wolfe iterations shared by all restarts.
    #[arg(long, default_value_t = 1000)]
    budget: usize,
    #[arg(long, default_value_t = 1e-16)]
    gap_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Restarts run concurrently.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Iterations per restart before it is abandoned, or "none".
    #[arg(long, default_value_t = RunCap(Some(DEFAULT_RUN_CAP)), value_parser = parse_run_cap)]
    run_cap: RunCap,
    #[arg(long)]
    max_restarts: Option<usize>,
    /// Also check the triangle inequality on input matrices.
    #[arg(long)]
    strict_metric: bool,
    /// Dump per-iteration traces as JSON on stderr.
    #[arg(long)]
    trace: bool,
}

impl SolverArgs {
    fn config(&self, default_c: CChoice) -> SolverConfig {
        SolverConfig {
            c: self.c.unwrap_or(default_c),
            iteration_budget: self.budget,
            gap_tolerance: self.gap_tol,
            max_restarts: self.max_restarts,
            seed: self.seed,
            parallel_runs: self.parallel,
            run_iteration_cap: self.run_cap.0,
            record_traces: self.trace,
            ..SolverConfig::default()
        }
    }
}

fn parse_c(s: &str) -> Result<CChoice, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(CChoice::Auto);
    }
    let c: f64 = s.parse().map_err(|_| format!("expected a number or \"auto\", got {s:?}"))?;
    if !(c >= 1.0) || !c.is_finite() {
        return Err(format!("c must be a finite number >= 1, got {s}"));
    }
    Ok(CChoice::Fixed(c))
}

fn parse_run_cap(s: &str) -> Result<RunCap, String> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(RunCap(None));
    }
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("expected a positive integer or \"none\", got {s:?}")),
        Ok(cap) => Ok(RunCap(Some(cap))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_resource_limit() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
