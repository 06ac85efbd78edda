use std::collections::BTreeMap;

use neatpong::env::{trace_record, Side, TRACE_HEADER};
use neatpong::genome::Genome;
use neatpong::seeded_rng;
use neatpong::trainer::{run_episode_observed, AgentRecord, Termination, TrainerConfig};

use crate::config::{CliError, ConfigDoc, RunManifest};
use crate::ReplayArgs;

pub fn run(args: ReplayArgs) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }

    // A manifest next to the champions pins the environment they were
    // trained in; --config overrides it, defaults fill the rest.
    let manifest_path = args.champions.join("manifest.json");
    let mut config = if args.config.is_some() {
        ConfigDoc::load(args.config.as_deref())?
    } else if manifest_path.exists() {
        let text = std::fs::read_to_string(&manifest_path)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", manifest_path.display())))?;
        let manifest: RunManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", manifest_path.display())))?;
        ConfigDoc { env: manifest.env, evolution: manifest.evolution, trainer: manifest.trainer }
    } else {
        let mut defaults = ConfigDoc::default();
        // No manifest: the sides present on disk define the arena.
        let found: Vec<Side> = Side::ALL
            .into_iter()
            .filter(|side| args.champions.join(champion_file(*side)).exists())
            .collect();
        if !found.is_empty() {
            defaults.env.active_sides = found;
        }
        defaults
    };
    if let Some(seed) = args.seed {
        config.trainer.seed = seed;
    }
    config.env.validate()?;

    let mut champions: BTreeMap<Side, Genome> = BTreeMap::new();
    let mut missing = Vec::new();
    for &side in &config.env.active_sides {
        let path = args.champions.join(champion_file(side));
        match std::fs::read_to_string(&path) {
            Ok(text) => {
                let genome = Genome::from_json(&text).map_err(|e| {
                    CliError::Runtime(format!("{}: {e}", path.display()))
                })?;
                champions.insert(side, genome);
            }
            Err(_) => missing.push(side.name()),
        }
    }
    if !missing.is_empty() {
        return Err(CliError::Runtime(format!(
            "missing champion files for sides: {}",
            missing.join(", ")
        )));
    }

    // Same protocol as the library's sustained-play measurement: one paddle
    // per side, fresh ball each trial, fitness stop disabled so an episode
    // only ends by step cap or breach.
    let mut sides: Vec<Side> = config.env.active_sides.clone();
    sides.sort_by_key(|s| s.index());
    let genomes: Vec<Genome> = sides.iter().map(|s| champions[s].clone()).collect();
    let replay_config =
        TrainerConfig { fitness_threshold: f64::INFINITY, ..config.trainer.clone() };

    let mut rng = seeded_rng(config.trainer.seed);
    let mut sustained = 0u32;
    for trial in 0..args.trials {
        let records: Vec<AgentRecord> =
            sides.iter().enumerate().map(|(i, &s)| AgentRecord::new(i, s)).collect();
        let trace_this = args.trace && trial == 0;
        if trace_this {
            println!("{TRACE_HEADER}");
        }
        let result = run_episode_observed(
            &genomes,
            records,
            &config.env,
            &replay_config,
            &mut rng,
            |step, world, events| {
                if trace_this {
                    println!("{}", trace_record(step, world, events));
                }
            },
        )?;
        if result.terminated_by == Termination::StepCapReached {
            sustained += 1;
        }
    }

    println!(
        "sustained: {sustained}/{} ({:.3})",
        args.trials,
        sustained as f64 / args.trials as f64
    );
    Ok(())
}

fn champion_file(side: Side) -> String {
    format!("champion_{}.json", side.name())
}
