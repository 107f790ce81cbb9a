//! `frogsim`: reproducible experiments on the frog model.
//!
//! Each subcommand reads an [`ExperimentConfig`] (TOML file plus flag
//! overrides), runs, and writes `config.toml`, `result.csv` and
//! `summary.json` into `<out>/<subcommand>/<UTC timestamp>-<seed>/`.
//! Exit status is 0 on success, 1 when a verification fails and 2 on usage
//! or input errors.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::{dispatch, Outcome};
pub use config::{
    parse_config, standard_laws, ConstructParams, CoupleParams, ExperimentConfig, ExplosionParams, GrowthParams,
    Overrides, SchedulePreset, VerifyParams,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] frog_core::FrogError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run the event-driven simulation and record its time series.
    Simulate,
    /// Compare two activation policies (or a run and its projection) under shared randomness.
    Couple,
    /// Monte-Carlo check of the one-walk displacement lower bound.
    VerifyBound,
    /// Run the staged chain construction and check its step bounds.
    Construct,
    /// Median frontier growth and its log-log slope.
    Growth,
    /// First times the active count reaches given thresholds.
    Explosion,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Couple => "couple",
            Command::VerifyBound => "verify-bound",
            Command::Construct => "construct",
            Command::Growth => "growth",
            Command::Explosion => "explosion",
        }
    }
}

#[derive(Clone, Debug, Default, Args)]
pub struct Flags {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true)]
    pub t_max: Option<f64>,
    #[arg(long, global = true)]
    pub max_active: Option<u64>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    /// Root of the output tree.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Multiplies analytic bounds before comparison (test hook).
    #[arg(long, global = true, hide = true, default_value_t = 1.0)]
    pub bound_scale: f64,
}

#[derive(Debug, Parser)]
#[command(name = "frogsim", version, about = "Frog model simulation and bound verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

impl Flags {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            dim: self.dim,
            t_max: self.t_max,
            max_active: self.max_active,
            replicas: self.replicas,
            out: self.out.clone(),
        }
    }
}

/// Creates `<root>/<subcommand>/<timestamp>-<seed>`, adding `-k` if taken.
pub fn output_dir(root: &Path, command: Command, seed: u64) -> std::io::Result<PathBuf> {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let parent = root.join(command.name());
    std::fs::create_dir_all(&parent)?;
    let base = format!("{stamp}-{seed}");
    let mut k = 0;
    loop {
        let name = if k == 0 { base.clone() } else { format!("{base}-{k}") };
        let dir = parent.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => k += 1,
            Err(e) => return Err(e),
        }
    }
}

/// Parses `args` (including the program name), runs, and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = parse_config(cli.flags.config.as_deref(), &cli.flags.overrides())
        .and_then(|cfg| dispatch(cli.command, &cfg, cli.flags.bound_scale));
    match result {
        Ok(outcome) => {
            println!("{}", outcome.dir.display());
            if outcome.passed {
                EXIT_OK
            } else {
                eprintln!("verification failed; see {}", outcome.dir.join("summary.json").display());
                EXIT_VERIFICATION_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
