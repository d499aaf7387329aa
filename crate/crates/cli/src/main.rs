mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, Output};
use config::Config;

/// Parallel-in-time solves and convergence analysis with truncated local
/// coarse grids.
#[derive(Debug, Parser)]
#[command(name = "atmgrit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one problem and write the residual history.
    Solve(Common),
    /// Evaluate the two-level convergence bound against the assembled operator.
    Theory(Common),
    /// Iteration counts over a range of local-grid distances.
    SweepK(Common),
    /// Dump an assembled error propagator as CSV.
    Propagator(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output file; defaults to `output.path`, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "ATMGRIT_WORKERS")]
    workers: Option<usize>,
}

fn run(cli: Cli) -> Result<Output, CliError> {
    let (command, common) = match &cli.command {
        Command::Solve(c) => ("solve", c),
        Command::Theory(c) => ("theory", c),
        Command::SweepK(c) => ("sweep-k", c),
        Command::Propagator(c) => ("propagator", c),
    };
    let config = Config::load(&common.config)?;
    let out = commands::output_path(&config, common.out.clone())?;
    let workers = commands::workers(&config, common.workers)?;
    log::debug!("{command} with {workers} worker(s)");
    let output = match cli.command {
        Command::Solve(_) => commands::solve_cmd(&config, workers)?,
        Command::Theory(_) => commands::theory_cmd(&config)?,
        Command::SweepK(_) => commands::sweep_k_cmd(&config, workers)?,
        Command::Propagator(_) => commands::propagator_cmd(&config)?,
    };
    commands::write_output(out.as_deref(), &output.csv)?;
    Ok(output)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(output) if output.converged => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
