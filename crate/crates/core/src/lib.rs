//! Headless four-sided pong and a NEAT engine that trains one mixed
//! population of paddle controllers to keep the ball in play.
//!
//! The crate is split along the pipeline: [`genome`] holds the network
//! encoding and its evaluator, [`evolution`] the genetic cycle, [`env`] the
//! deterministic fixed-timestep world, [`trainer`] the episode/generation
//! orchestration, and [`metrics`] the per-generation stats plus the
//! experiment sweeps that produce plot-ready CSVs.

use std::path::PathBuf;

use rand::SeedableRng;
use thiserror::Error;

pub mod env;
pub mod evolution;
pub mod genome;
pub mod metrics;
pub mod trainer;

#[derive(Debug, Error)]
pub enum Error {
    #[error("genome has a cycle among enabled connections")]
    CyclicGenome,
    #[error("population has no members")]
    EmptyPopulation,
    #[error("no action supplied for alive agent {agent}")]
    MissingAction { agent: usize },
    #[error("population of {population} cannot be split evenly across {sides} sides")]
    IndivisiblePopulation { population: usize, sides: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {what}: {detail}")]
    Parse { what: String, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

/// RNG used for every stochastic decision in the crate. ChaCha8 keeps the
/// stream identical across platforms and releases, which the replay and
/// golden-trace tests rely on.
pub type RunRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> RunRng {
    RunRng::seed_from_u64(seed)
}
