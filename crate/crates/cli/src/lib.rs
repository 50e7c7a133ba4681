//! Command-line driver: configuration, the five subcommands and their output files.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "motionlab",
    version,
    about = "Equilibrium states and holomorphic motions of weighted periodic points"
)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "motionlab.toml")]
    pub config: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for every randomised stage, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, overriding `$MOTIONLAB_OUT` and the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Pressure, conformal measure and equilibrium state at the base parameter.
    Equilibrium,
    /// Periodic points and weighted cycle measures at the base parameter.
    Cycles {
        /// A single period instead of the configured range.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Continue repelling periodic points over the parameter disk.
    Motion,
    /// Mass, equidistribution and invariance tables from saved artifacts.
    Verify,
    /// Lyapunov exponent over the parameter disk and its harmonicity defect.
    Stability,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Budget(_) = e {
                eprintln!("advice: lower the upper end of n_range, or raise cycles.budget if memory allows");
            }
            e.exit_code()
        }
    }
}

/// Runs a parsed command inside a pool of the requested size.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| {
        let ctx = commands::Context::prepare(cli)?;
        match &cli.command {
            Command::Equilibrium => commands::equilibrium::run(&ctx),
            Command::Cycles { n } => commands::cycles::run(&ctx, *n),
            Command::Motion => commands::motion::run(&ctx),
            Command::Verify => commands::verify::run(&ctx),
            Command::Stability => commands::stability::run(&ctx),
        }
    })
}
