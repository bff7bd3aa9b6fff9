//! `pidperf`: achievable-performance assessment, tuning and benchmarking
//! from the command line.
//!
//! Exit status is 0 on success, 1 when a run completed but a check failed
//! (benchmark tolerance, Monte-Carlo agreement), 2 on bad input or errors.

mod commands;
mod problem;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "pidperf", version, about = "PID/cascade achievable-performance assessment and tuning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Base seed; run i uses seed + i. Overrides `tlbo.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Independent optimizer runs.
    #[arg(long, global = true)]
    pub runs: Option<usize>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Directory for report files.
    #[arg(long, global = true, default_value = "pidperf-out")]
    pub out: PathBuf,

    /// Print the report to stdout in this format instead of a summary.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimum achievable output variance under PID or PI/P control (30 runs by default).
    Assess {
        file: PathBuf,
        /// Attach a Monte-Carlo check of the best parameters.
        #[arg(long)]
        validate: bool,
        /// Relative tolerance for the Monte-Carlo check.
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
    },
    /// Minimize IAE + rho * variance (best of 5 runs by default).
    Tune {
        file: PathBuf,
        /// Single weight; overrides the file.
        #[arg(long, allow_negative_numbers = true, conflicts_with = "rho_sweep")]
        rho: Option<f64>,
        /// Comma-separated weights; overrides the file.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        rho_sweep: Option<Vec<f64>>,
        /// Also simulate a staged response, switching controllers at the
        /// `tuning.stages` samples, or between the tuned sets at equal spacing.
        #[arg(long)]
        multistage: bool,
    },
    /// Run the embedded ten-problem benchmark suite (30 runs by default).
    Bench {
        /// Comma-separated problem ids (1..=10).
        #[arg(long, value_delimiter = ',')]
        problems: Option<Vec<usize>>,
    },
    /// Monte-Carlo check of the analytic variance.
    Validate {
        file: PathBuf,
        /// Controller parameters; assessed first when omitted.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, num_args = 1)]
        params: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot start {jobs} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(commands::Outcome::Pass) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Fail(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
