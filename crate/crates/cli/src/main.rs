//! `neatpong` — train four-sided pong paddle controllers with NEAT, run the
//! population/scenario experiments, and replay saved champions.

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod replay;
mod sweep;
mod train;

use config::CliError;

#[derive(Parser)]
#[command(name = "neatpong", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a population and write stats, champions and a run manifest.
    Train(TrainArgs),
    /// Run the population-size or scenario experiment grid.
    Sweep(SweepArgs),
    /// Replay saved champions on fresh episodes and report sustained play.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// RNG seed; every stochastic decision of the run derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Population size (split evenly across the active sides).
    #[arg(long)]
    population: Option<usize>,
    /// Active side count: 1 (left), 2 (left/right) or 4.
    #[arg(long)]
    sides: Option<u8>,
    /// Generation cap.
    #[arg(long)]
    generations: Option<u32>,
    /// JSON config (or a previous run's manifest.json) with env/evolution/trainer sections.
    #[arg(long)]
    config: Option<std::path::PathBuf>,
    /// Output directory; defaults to ./run-<seed>-<timestamp>.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment family: population-size scaling or active-side scenarios.
    #[arg(long)]
    mode: sweep::SweepMode,
    /// Seeds per cell (base seed taken from the trainer config).
    #[arg(long, default_value_t = 5)]
    seeds: u32,
    /// Parallel cells; defaults to the processor count.
    #[arg(long)]
    jobs: Option<usize>,
    /// Population sizes for --mode population (comma separated).
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    config: Option<std::path::PathBuf>,
    /// Output directory; defaults to ./sweep-<mode>-<timestamp>.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Directory holding champion_<side>.json files (and optionally manifest.json).
    #[arg(long)]
    champions: std::path::PathBuf,
    /// Fresh episodes to play.
    #[arg(long, default_value_t = 10)]
    trials: u32,
    #[arg(long)]
    seed: Option<u64>,
    /// Stream the first trial's step trace to stdout.
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    config: Option<std::path::PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => train::run(args),
        Command::Sweep(args) => sweep::run(args),
        Command::Replay(args) => replay::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(3)
        }
    }
}
