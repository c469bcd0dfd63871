//! `balancegauge` command-line tool.

mod cmd;
mod logging;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use balancegauge::{Error, ErrorClass};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "balancegauge", version, about = "Covariate balance diagnostics for weighted longitudinal data")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct GlobalArgs {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "BALANCEGAUGE_THREADS")]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Also print informational messages.
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a simulation campaign and write its archive.
    Simulate(cmd::simulate::Args),
    /// Fit weight models on a panel and export the weights.
    Weights(cmd::weights::Args),
    /// Balance report for a panel under a weight set.
    Balance(cmd::balance::Args),
    /// Regress bias on balance for every archive in a directory.
    Evaluate(cmd::evaluate::Args),
    /// Per-regime averages of bias and balance from archives.
    Report(cmd::report::Args),
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Usage => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    logging::init(cli.global.verbose);
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(4);
        }
    }
    let result = match cli.command {
        Command::Simulate(args) => cmd::simulate::run(&cli.global, args),
        Command::Weights(args) => cmd::weights::run(&cli.global, args),
        Command::Balance(args) => cmd::balance::run(&cli.global, args),
        Command::Evaluate(args) => cmd::evaluate::run(&cli.global, args),
        Command::Report(args) => cmd::report::run(&cli.global, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
