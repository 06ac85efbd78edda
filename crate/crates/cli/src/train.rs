use std::path::PathBuf;

use neatpong::metrics::write_run_csv;
use neatpong::trainer::run_training;

use crate::config::{create_run_dir, unix_timestamp, Artifacts, CliError, ConfigDoc, RunManifest};
use crate::TrainArgs;

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    let mut config = ConfigDoc::load(args.config.as_deref())?;

    if let Some(sides) = args.sides {
        config.env.active_sides = ConfigDoc::sides_preset(sides)?;
    }
    if let Some(population) = args.population {
        config.evolution.population_size = population;
    }
    if args.sides.is_some() || args.population.is_some() {
        config.rebalance()?;
    }
    if let Some(seed) = args.seed {
        config.trainer.seed = seed;
    }
    if let Some(generations) = args.generations {
        config.trainer.max_generations = generations;
    }

    let out_dir = match args.out {
        Some(dir) => create_run_dir(dir)?,
        None => create_run_dir(PathBuf::from(format!(
            "run-{}-{}",
            config.trainer.seed,
            unix_timestamp()
        )))?,
    };

    let result = run_training(&config.env, &config.trainer, &config.evolution)?;

    let stats_path = out_dir.join("stats.csv");
    write_run_csv(&result.stats, &stats_path)?;

    let mut artifacts = Artifacts { stats_csv: Some("stats.csv".into()), ..Artifacts::default() };
    for (side, genome) in &result.champions {
        let file = format!("champion_{}.json", side.name());
        let path = out_dir.join(&file);
        std::fs::write(&path, genome.to_json())
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        artifacts.champions.insert(side.name().to_string(), file);
    }
    RunManifest::new(&config, artifacts).write(&out_dir)?;

    let best = result
        .stats
        .iter()
        .map(|row| row.best_fitness)
        .fold(f64::NEG_INFINITY, f64::max);
    println!(
        "seed {}: {} after {} generations (best fitness {best:.1}, {} steps total)",
        config.trainer.seed,
        if result.converged { "converged" } else { "generation cap reached" },
        result.generations_run,
        result.stats.last().map(|row| row.cumulative_steps).unwrap_or(0),
    );
    println!("outputs in {}", out_dir.display());
    Ok(())
}
