use std::path::PathBuf;

use clap::ValueEnum;

use neatpong::metrics::{
    default_scenarios, population_sweep, run_csv_string, scenario_sweep, write_sweep_csv,
    SweepReport,
};

use crate::config::{create_run_dir, unix_timestamp, Artifacts, CliError, ConfigDoc, RunManifest};
use crate::SweepArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMode {
    Population,
    Scenario,
}

const DEFAULT_SIZES: [usize; 6] = [4, 8, 16, 20, 32, 40];

pub fn run(args: SweepArgs) -> Result<(), CliError> {
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let config = ConfigDoc::load(args.config.as_deref())?;
    config.env.validate()?;
    config.trainer.validate()?;

    let seeds: Vec<u64> =
        (0..args.seeds as u64).map(|i| config.trainer.seed.wrapping_add(i)).collect();
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));

    let mode_name = match args.mode {
        SweepMode::Population => "population",
        SweepMode::Scenario => "scenario",
    };
    let out_dir = match args.out {
        Some(dir) => create_run_dir(dir)?,
        None => create_run_dir(PathBuf::from(format!(
            "sweep-{mode_name}-{}",
            unix_timestamp()
        )))?,
    };

    let report: SweepReport = match args.mode {
        SweepMode::Population => {
            let sizes = args.sizes.unwrap_or_else(|| DEFAULT_SIZES.to_vec());
            population_sweep(&sizes, &seeds, &config.env, &config.evolution, &config.trainer, jobs)
        }
        SweepMode::Scenario => {
            if args.sizes.is_some() {
                return Err(CliError::Usage("--sizes only applies to --mode population".into()));
            }
            scenario_sweep(
                &default_scenarios(),
                &seeds,
                &config.env,
                &config.evolution,
                &config.trainer,
                jobs,
            )
        }
    };

    write_sweep_csv(&report.rows, &out_dir.join("sweep.csv"))?;

    // Persist every cell's per-generation stats; the sweep rows can be
    // recomputed from these files alone.
    let cells_dir = out_dir.join("cells");
    std::fs::create_dir_all(&cells_dir)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", cells_dir.display())))?;
    for cell in &report.cells {
        let name = format!(
            "{}sides-pop{}-seed{}.csv",
            cell.active_sides.len(),
            cell.population_size,
            cell.seed
        );
        let path = cells_dir.join(name);
        std::fs::write(&path, run_csv_string(&cell.stats))
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        if let Some(message) = &cell.error {
            eprintln!(
                "cell pop={} seed={} failed: {message}",
                cell.population_size, cell.seed
            );
        }
    }

    let artifacts = Artifacts { sweep_csv: Some("sweep.csv".into()), ..Artifacts::default() };
    RunManifest::new(&config, artifacts).write(&out_dir)?;

    println!("population,seeds,median_generations,success_rate");
    for row in &report.rows {
        println!(
            "{},{},{},{}",
            row.population_size, row.seeds_run, row.median_generations, row.success_rate
        );
    }
    println!("outputs in {}", out_dir.display());
    Ok(())
}
