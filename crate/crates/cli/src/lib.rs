//! Library side of the `rpf-lab` binary: argument parsing, configuration
//! merging, output handling and the subcommand implementations.
//!
//! Parameters resolve in three layers: built-in defaults, then a JSON
//! config file (`--config`), then explicit flags. The resolved parameters
//! are embedded in every output, so an output file can be fed back as a
//! config to reproduce it.

// `!(x > 0.0)` is the NaN-rejecting form used throughout validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::ConfigFile;
pub use output::Format;

/// Exit status for bad arguments, configs or preconditions.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status for numerical failures (non-convergence, step failure, ...).
pub const EXIT_NUMERICAL: i32 = 3;
/// Exit status for I/O problems.
pub const EXIT_IO: i32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] rpf_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_VALIDATION,
            CliError::Core(e) if e.is_validation() => EXIT_VALIDATION,
            CliError::Core(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(
    name = "rpf-lab",
    version,
    about = "Finite-N log-gas point fields: sampling, correlations, condition checks, dynamics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Directory receiving all outputs; created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    /// Output file name, relative to --out-dir; `-` writes to stdout.
    #[arg(long, short = 'o', global = true)]
    pub out: Option<String>,

    #[arg(long, global = true)]
    pub format: Option<Format>,

    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "RPF_LAB_WORKERS")]
    pub workers: Option<usize>,

    /// JSON config (or a previous output) supplying parameters; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw eigenvalue samples of a Gaussian beta-ensemble.
    Sample(commands::sample::SampleArgs),
    /// Tabulate the Airy or sine kernel.
    KernelTable(commands::sample::KernelTableArgs),
    /// Estimate 1- or 2-point correlation functions and compare with a prediction.
    Correlate(commands::sample::CorrelateArgs),
    /// Moment and tail-integral trends over ensemble sizes.
    CheckH4(commands::conditions::H4Args),
    /// Shell-set probabilities with their Chebyshev bounds.
    CheckH5(commands::conditions::TailArgs),
    /// Tail probabilities of the Lipschitz sets H_{r,k}.
    CheckH3(commands::conditions::TailArgs),
    /// Oscillation of the conditional log-density inside a ball.
    QgProbe(commands::conditions::QgArgs),
    /// Simulate the log-gas Langevin dynamics.
    Simulate(commands::dynamics::SimulateArgs),
    /// Stationarity check of the dynamics started from exact samples.
    Invariance(commands::dynamics::InvarianceArgs),
    /// Random checks of the truncated logarithmic Taylor expansion.
    TaylorCheck(commands::checks::TaylorArgs),
    /// Random checks of the Lipschitz envelope against grid sups.
    LipschitzCheck(commands::checks::LipschitzArgs),
}

/// Parse `args` (including the program name), run, and return the exit
/// status. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rpf-lab: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let file = cli.config.as_ref().map(|p| ConfigFile::load(p)).transpose()?;
    let rendered = match &cli.command {
        Command::Sample(a) => commands::dispatch::<commands::sample::Sample>(cli, a, file.as_ref())?,
        Command::KernelTable(a) => commands::dispatch::<commands::sample::KernelTable>(cli, a, file.as_ref())?,
        Command::Correlate(a) => commands::dispatch::<commands::sample::Correlate>(cli, a, file.as_ref())?,
        Command::CheckH4(a) => commands::dispatch::<commands::conditions::H4>(cli, a, file.as_ref())?,
        Command::CheckH5(a) => commands::dispatch::<commands::conditions::H5>(cli, a, file.as_ref())?,
        Command::CheckH3(a) => commands::dispatch::<commands::conditions::H3>(cli, a, file.as_ref())?,
        Command::QgProbe(a) => commands::dispatch::<commands::conditions::Qg>(cli, a, file.as_ref())?,
        Command::Simulate(a) => commands::dispatch::<commands::dynamics::Simulate>(cli, a, file.as_ref())?,
        Command::Invariance(a) => commands::dispatch::<commands::dynamics::Invariance>(cli, a, file.as_ref())?,
        Command::TaylorCheck(a) => commands::dispatch::<commands::checks::Taylor>(cli, a, file.as_ref())?,
        Command::LipschitzCheck(a) => commands::dispatch::<commands::checks::Lipschitz>(cli, a, file.as_ref())?,
    };
    output::write(&cli.out_dir, &rendered)
}
