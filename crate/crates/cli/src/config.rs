//! Config documents, flag overriding, and the run manifest.
//!
//! Precedence: built-in defaults < `--config` file < explicit flags. A run's
//! manifest.json carries the fully resolved configuration, so feeding it
//! back through `--config` reproduces the run bit-identically.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use neatpong::env::{EnvConfig, Side};
use neatpong::evolution::EvolutionConfig;
use neatpong::trainer::TrainerConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration: exit code 2.
    Usage(String),
    /// Failure while running or writing artifacts: exit code 3.
    Runtime(String),
}

impl From<neatpong::Error> for CliError {
    fn from(e: neatpong::Error) -> CliError {
        match e {
            neatpong::Error::InvalidConfig(_) | neatpong::Error::IndivisiblePopulation { .. } => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfigDoc {
    pub env: EnvConfig,
    pub evolution: EvolutionConfig,
    pub trainer: TrainerConfig,
}

impl ConfigDoc {
    pub fn load(path: Option<&Path>) -> Result<ConfigDoc, CliError> {
        let Some(path) = path else { return Ok(ConfigDoc::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Active sides for the 1/2/4 presets of the scenario table.
    pub fn sides_preset(count: u8) -> Result<Vec<Side>, CliError> {
        match count {
            1 => Ok(vec![Side::Left]),
            2 => Ok(vec![Side::Left, Side::Right]),
            4 => Ok(Side::ALL.to_vec()),
            other => Err(CliError::Usage(format!("--sides must be 1, 2 or 4, got {other}"))),
        }
    }

    /// Re-derive paddles-per-side after a --population or --sides override.
    pub fn rebalance(&mut self) -> Result<(), CliError> {
        let sides = self.env.active_sides.len();
        if sides == 0 || self.evolution.population_size % sides != 0 {
            return Err(CliError::Usage(format!(
                "population {} is not divisible across {} sides",
                self.evolution.population_size, sides
            )));
        }
        self.trainer.n_per_side = self.evolution.population_size / sides;
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Artifacts {
    pub stats_csv: Option<String>,
    pub champions: BTreeMap<String, String>,
    pub sweep_csv: Option<String>,
}

/// Everything needed to reproduce a run, plus where its outputs live.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    pub env: EnvConfig,
    pub evolution: EvolutionConfig,
    pub trainer: TrainerConfig,
    pub artifacts: Artifacts,
}

impl RunManifest {
    pub fn new(config: &ConfigDoc, artifacts: Artifacts) -> RunManifest {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.trainer.seed,
            env: config.env.clone(),
            evolution: config.evolution.clone(),
            trainer: config.trainer.clone(),
            artifacts,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        std::fs::write(&path, text)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
    }
}

pub fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Create `base` or, if it already exists, the first free `base-N` variant;
/// runs never clobber each other's outputs.
pub fn create_run_dir(base: PathBuf) -> Result<PathBuf, CliError> {
    let mut candidate = base.clone();
    for attempt in 0.. {
        if attempt > 0 {
            let mut name = base.file_name().unwrap_or_default().to_os_string();
            name.push(format!("-{attempt}"));
            candidate = base.with_file_name(name);
        }
        match std::fs::create_dir_all(&candidate) {
            Ok(()) if std::fs::read_dir(&candidate).map(|mut d| d.next().is_none()).unwrap_or(false) => {
                return Ok(candidate)
            }
            Ok(()) => continue,
            Err(e) => return Err(CliError::Runtime(format!("{}: {e}", candidate.display()))),
        }
    }
    unreachable!()
}
