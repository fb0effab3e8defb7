//! `regdp`: solve, verify, compare and simulate from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use regdp_core::{Error, SolverKind};

/// Exit statuses shared by every subcommand.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Runtime = 1,
    Usage = 2,
    Convergence = 3,
    Verification = 4,
    Integrity = 5,
}

/// A failed command: the status to exit with and what to print.
#[derive(Debug)]
pub struct Failure {
    pub status: Status,
    pub message: String,
}

impl Failure {
    pub fn new(status: Status, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(Status::Usage, message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(_) | Error::InvalidParams(_) | Error::Artifact { .. } => Status::Usage,
            Error::NotConverged { .. } => Status::Convergence,
            Error::Integrity { .. } => Status::Integrity,
            _ => Status::Runtime,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(Status::Runtime, e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "regdp", version, about = "Price-based regulation reserve tracking for smart buildings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `out_dir` from the config, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for the value function and policy.
    Solve {
        #[command(flatten)]
        common: Common,
        /// cvi, avi or adp (default: `solver` from the config).
        #[arg(long)]
        solver: Option<SolverKind>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long = "max-iters")]
        max_iters: Option<usize>,
    },
    /// Check the structural properties of solved tables.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        value: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        /// Run manifest to check against the config as well.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Time all three solvers on a list of problem sizes.
    Compare {
        /// Solver settings; the model constants are replaced per size.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma separated `NxMx2` sizes: `N` appliances, `M + 1` signal levels.
        #[arg(long, default_value = "100x20x2,500x40x2,2000x40x2")]
        sizes: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Drive the zone-level building with a policy and fit the idle temperatures.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Signal steps.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long = "snapshot-every")]
        snapshot_every: Option<usize>,
    },
    /// Write a synthetic regulation signal.
    Signal {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        steps: Option<usize>,
    },
}

fn init_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("REGDP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::usage(format!("REGDP_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::new(Status::Runtime, e.to_string()))
}

fn run(cli: Cli) -> Result<Status, Failure> {
    init_threads()?;
    match cli.command {
        Command::Solve {
            common,
            solver,
            tol,
            max_iters,
        } => commands::solve(&common.config, common.out, common.seed, solver, tol, max_iters),
        Command::Verify {
            common,
            value,
            policy,
            manifest,
        } => commands::verify(&common.config, common.out, &value, &policy, manifest.as_deref()),
        Command::Compare {
            config,
            out,
            sizes,
            seed,
        } => commands::compare(config.as_deref(), out, &sizes, seed),
        Command::Simulate {
            common,
            policy,
            steps,
            snapshot_every,
        } => commands::simulate(&common.config, common.out, common.seed, policy.as_deref(), steps, snapshot_every),
        Command::Signal { common, steps } => commands::signal(&common.config, common.out, common.seed, steps),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(status) => ExitCode::from(status as u8),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.status as u8)
        }
    }
}
