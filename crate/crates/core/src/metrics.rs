//! Per-generation statistics, their CSV form, and the two experiment sweeps
//! (population-size scaling and active-side scenarios). All numbers are
//! written with Rust's shortest round-trip float formatting, so a parsed
//! file reproduces the in-memory values exactly.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, Side};
use crate::evolution::EvolutionConfig;
use crate::trainer::{run_training, TrainerConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: u32,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub survivors_total: u32,
    /// Indexed by [`Side::index`]: top, bottom, left, right.
    pub survivors_per_side: [u32; 4],
    pub episode_steps: u64,
    pub cumulative_steps: u64,
}

pub const RUN_CSV_HEADER: &str = "generation,best_fitness,mean_fitness,survivors_total,\
surv_top,surv_bottom,surv_left,surv_right,episode_steps,cumulative_steps";

/// Render stats rows in the run-CSV schema (header plus one line per
/// generation).
pub fn run_csv_string(stats: &[GenerationStats]) -> String {
    let mut out = String::from(RUN_CSV_HEADER);
    out.push('\n');
    for row in stats {
        let [top, bottom, left, right] = row.survivors_per_side;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            row.generation,
            row.best_fitness,
            row.mean_fitness,
            row.survivors_total,
            top,
            bottom,
            left,
            right,
            row.episode_steps,
            row.cumulative_steps,
        ));
    }
    out
}

pub fn write_run_csv(stats: &[GenerationStats], path: &Path) -> Result<()> {
    std::fs::write(path, run_csv_string(stats))
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn parse_field<T: FromStr>(field: &str, what: &str) -> Result<T> {
    field.parse().map_err(|_| Error::Parse {
        what: what.to_string(),
        detail: format!("bad value {field:?}"),
    })
}

/// Inverse of [`run_csv_string`]; round-trips every finite value exactly.
pub fn parse_run_csv(text: &str) -> Result<Vec<GenerationStats>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == RUN_CSV_HEADER => {}
        other => {
            return Err(Error::Parse {
                what: "run csv".into(),
                detail: format!("unexpected header {other:?}"),
            })
        }
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::Parse {
                what: "run csv".into(),
                detail: format!("expected 10 fields, got {}", fields.len()),
            });
        }
        rows.push(GenerationStats {
            generation: parse_field(fields[0], "generation")?,
            best_fitness: parse_field(fields[1], "best_fitness")?,
            mean_fitness: parse_field(fields[2], "mean_fitness")?,
            survivors_total: parse_field(fields[3], "survivors_total")?,
            survivors_per_side: [
                parse_field(fields[4], "surv_top")?,
                parse_field(fields[5], "surv_bottom")?,
                parse_field(fields[6], "surv_left")?,
                parse_field(fields[7], "surv_right")?,
            ],
            episode_steps: parse_field(fields[8], "episode_steps")?,
            cumulative_steps: parse_field(fields[9], "cumulative_steps")?,
        });
    }
    Ok(rows)
}

/// Generations-to-learned for one sweep row; censored cells mirror the
/// paper's table convention and print as `≥cap`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MedianGenerations {
    Reached(u32),
    Censored(u32),
}

impl fmt::Display for MedianGenerations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MedianGenerations::Reached(g) => write!(f, "{g}"),
            MedianGenerations::Censored(cap) => write!(f, "≥{cap}"),
        }
    }
}

impl FromStr for MedianGenerations {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if let Some(rest) = s.strip_prefix('≥') {
            rest.parse().map(MedianGenerations::Censored).map_err(|e| e.to_string())
        } else {
            s.parse().map(MedianGenerations::Reached).map_err(|e| e.to_string())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub population_size: usize,
    pub seeds_run: usize,
    pub median_generations: MedianGenerations,
    pub success_rate: f64,
}

/// What one training run contributed to its sweep row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellOutcome {
    pub converged: bool,
    /// 1-based generations to the learned threshold when converged,
    /// otherwise the generations actually run.
    pub generations: u32,
}

/// Reduce a run's stats rows to its sweep contribution: the first generation
/// whose best fitness reached the learned threshold.
pub fn cell_outcome_from_stats(stats: &[GenerationStats], learned_threshold: f64) -> CellOutcome {
    for row in stats {
        if row.best_fitness >= learned_threshold {
            return CellOutcome { converged: true, generations: row.generation + 1 };
        }
    }
    CellOutcome { converged: false, generations: stats.len() as u32 }
}

/// One training run inside a sweep.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub population_size: usize,
    pub seed: u64,
    pub active_sides: Vec<Side>,
    /// `None` when the run errored; the error text is kept alongside.
    pub outcome: Option<CellOutcome>,
    pub stats: Vec<GenerationStats>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<SweepCell>,
}

/// Aggregate one sweep row from its cells. Failed and censored cells sort
/// above every finite generation count; the lower median is reported, and a
/// censored median prints as `≥cap`.
pub fn aggregate_sweep_row(
    population_size: usize,
    outcomes: &[Option<CellOutcome>],
    cap: u32,
) -> SweepRow {
    let mut ordered: Vec<Option<u32>> = outcomes
        .iter()
        .map(|o| match o {
            Some(outcome) if outcome.converged => Some(outcome.generations),
            _ => None,
        })
        .collect();
    ordered.sort_by_key(|g| g.unwrap_or(u32::MAX));
    let median = match ordered[(ordered.len() - 1) / 2] {
        Some(generations) => MedianGenerations::Reached(generations),
        None => MedianGenerations::Censored(cap),
    };
    let successes = ordered.iter().filter(|g| g.is_some()).count();
    SweepRow {
        population_size,
        seeds_run: outcomes.len(),
        median_generations: median,
        success_rate: successes as f64 / outcomes.len() as f64,
    }
}

struct CellSpec {
    population_size: usize,
    seed: u64,
    active_sides: Vec<Side>,
}

/// Run every cell (population x seed), up to `jobs` at a time. Each cell is
/// an independent training run with its own seed and registry; convergence
/// means the best fitness reached `learned_threshold` within the generation
/// cap, so the run's stop threshold is lowered accordingly.
fn run_cells(
    specs: Vec<CellSpec>,
    env_config: &EnvConfig,
    evolution_config: &EvolutionConfig,
    trainer_config: &TrainerConfig,
    jobs: usize,
) -> Vec<SweepCell> {
    let run_one = |spec: &CellSpec| -> SweepCell {
        let sides = spec.active_sides.len();
        let cell_env = EnvConfig { active_sides: spec.active_sides.clone(), ..env_config.clone() };
        let cell_evolution =
            EvolutionConfig { population_size: spec.population_size, ..evolution_config.clone() };
        let cell_trainer = TrainerConfig {
            seed: spec.seed,
            n_per_side: if sides > 0 { spec.population_size / sides } else { 0 },
            fitness_threshold: trainer_config.learned_threshold,
            ..trainer_config.clone()
        };
        match run_training(&cell_env, &cell_trainer, &cell_evolution) {
            Ok(result) => {
                let outcome =
                    cell_outcome_from_stats(&result.stats, trainer_config.learned_threshold);
                SweepCell {
                    population_size: spec.population_size,
                    seed: spec.seed,
                    active_sides: spec.active_sides.clone(),
                    outcome: Some(outcome),
                    stats: result.stats,
                    error: None,
                }
            }
            Err(e) => SweepCell {
                population_size: spec.population_size,
                seed: spec.seed,
                active_sides: spec.active_sides.clone(),
                outcome: None,
                stats: Vec::new(),
                error: Some(e.to_string()),
            },
        }
    };

    let jobs = jobs.max(1).min(specs.len().max(1));
    if jobs <= 1 {
        return specs.iter().map(run_one).collect();
    }

    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<SweepCell>>> =
        specs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= specs.len() {
                    break;
                }
                let cell = run_one(&specs[index]);
                *results[index].lock().unwrap() = Some(cell);
            });
        }
    });
    results.into_iter().map(|slot| slot.into_inner().unwrap().unwrap()).collect()
}

fn report_from_cells(cells: Vec<SweepCell>, groups: &[usize], cap: u32) -> SweepReport {
    let mut rows = Vec::new();
    let mut offset = 0;
    for &group in groups {
        let slice = &cells[offset..offset + group];
        let outcomes: Vec<Option<CellOutcome>> = slice.iter().map(|c| c.outcome).collect();
        rows.push(aggregate_sweep_row(slice[0].population_size, &outcomes, cap));
        offset += group;
    }
    SweepReport { rows, cells }
}

/// Population-size scaling experiment: every size is trained on the full
/// four-sided arena across the given seeds.
pub fn population_sweep(
    sizes: &[usize],
    seeds: &[u64],
    env_config: &EnvConfig,
    evolution_config: &EvolutionConfig,
    trainer_config: &TrainerConfig,
    jobs: usize,
) -> SweepReport {
    let mut specs = Vec::new();
    for &size in sizes {
        for &seed in seeds {
            specs.push(CellSpec {
                population_size: size,
                seed,
                active_sides: env_config.active_sides.clone(),
            });
        }
    }
    let cells = run_cells(specs, env_config, evolution_config, trainer_config, jobs);
    report_from_cells(cells, &vec![seeds.len(); sizes.len()], trainer_config.max_generations)
}

/// The default scenario set: one paddle, a classic two-sided duel, and the
/// full four-sided arena, with reflective walls standing in for the missing
/// sides.
pub fn default_scenarios() -> Vec<(Vec<Side>, usize)> {
    vec![
        (vec![Side::Left], 4),
        (vec![Side::Left, Side::Right], 8),
        (Side::ALL.to_vec(), 20),
    ]
}

/// Scenario experiment: (active sides, population) pairs, each trained
/// across the given seeds.
pub fn scenario_sweep(
    scenarios: &[(Vec<Side>, usize)],
    seeds: &[u64],
    env_config: &EnvConfig,
    evolution_config: &EvolutionConfig,
    trainer_config: &TrainerConfig,
    jobs: usize,
) -> SweepReport {
    let mut specs = Vec::new();
    for (sides, population) in scenarios {
        for &seed in seeds {
            specs.push(CellSpec {
                population_size: *population,
                seed,
                active_sides: sides.clone(),
            });
        }
    }
    let cells = run_cells(specs, env_config, evolution_config, trainer_config, jobs);
    report_from_cells(cells, &vec![seeds.len(); scenarios.len()], trainer_config.max_generations)
}

pub const SWEEP_CSV_HEADER: &str = "population,seeds,median_generations,success_rate";

pub fn sweep_csv_string(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.population_size, row.seeds_run, row.median_generations, row.success_rate
        ));
    }
    out
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    std::fs::write(path, sweep_csv_string(rows))
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == SWEEP_CSV_HEADER => {}
        other => {
            return Err(Error::Parse {
                what: "sweep csv".into(),
                detail: format!("unexpected header {other:?}"),
            })
        }
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                what: "sweep csv".into(),
                detail: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        rows.push(SweepRow {
            population_size: parse_field(fields[0], "population")?,
            seeds_run: parse_field(fields[1], "seeds")?,
            median_generations: fields[2].parse().map_err(|detail| Error::Parse {
                what: "median_generations".into(),
                detail,
            })?,
            success_rate: parse_field(fields[3], "success_rate")?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats_row(generation: u32, best: f64) -> GenerationStats {
        GenerationStats {
            generation,
            best_fitness: best,
            mean_fitness: best / 3.0,
            survivors_total: 4,
            survivors_per_side: [1, 1, 1, 1],
            episode_steps: 100 + generation as u64,
            cumulative_steps: (generation as u64 + 1) * 100,
        }
    }

    #[test]
    fn empty_stats_write_a_header_only_file() {
        let text = run_csv_string(&[]);
        assert_eq!(text, format!("{RUN_CSV_HEADER}\n"));
        assert_eq!(parse_run_csv(&text).unwrap(), vec![]);
    }

    #[test]
    fn twenty_two_rows_make_twenty_three_lines() {
        let stats: Vec<GenerationStats> =
            (0..22).map(|g| stats_row(g, g as f64 * 7.3)).collect();
        let text = run_csv_string(&stats);
        assert_eq!(text.trim_end().lines().count(), 23);
    }

    #[test]
    fn run_csv_round_trips_exactly() {
        // Deliberately awkward values: accumulated tenths and harsh
        // fractions survive the shortest round-trip formatting.
        let stats = vec![
            GenerationStats {
                generation: 0,
                best_fitness: 0.1 + 0.2,
                mean_fitness: -5.0 + 0.1 * 977.0,
                survivors_total: 3,
                survivors_per_side: [0, 1, 2, 0],
                episode_steps: u64::MAX / 3,
                cumulative_steps: u64::MAX / 2,
            },
            stats_row(1, 1.0 / 3.0),
        ];
        let parsed = parse_run_csv(&run_csv_string(&stats)).unwrap();
        assert_eq!(parsed, stats);
        for (a, b) in parsed.iter().zip(&stats) {
            assert_eq!(a.best_fitness.to_bits(), b.best_fitness.to_bits());
            assert_eq!(a.mean_fitness.to_bits(), b.mean_fitness.to_bits());
        }
    }

    #[test]
    fn parse_rejects_foreign_headers() {
        assert!(parse_run_csv("nope\n1,2\n").is_err());
    }

    #[test]
    fn cell_outcome_finds_first_crossing() {
        let stats: Vec<GenerationStats> =
            [10.0, 50.0, 24_999.0, 26_000.0, 30_000.0].iter().enumerate()
                .map(|(g, &b)| stats_row(g as u32, b))
                .collect();
        let outcome = cell_outcome_from_stats(&stats, 25_000.0);
        assert_eq!(outcome, CellOutcome { converged: true, generations: 4 });

        let outcome = cell_outcome_from_stats(&stats, 1e9);
        assert_eq!(outcome, CellOutcome { converged: false, generations: 5 });
    }

    #[test]
    fn censored_median_prints_like_the_table() {
        let outcomes: Vec<Option<CellOutcome>> = vec![
            Some(CellOutcome { converged: false, generations: 100 }),
            Some(CellOutcome { converged: true, generations: 40 }),
            None,
        ];
        let row = aggregate_sweep_row(8, &outcomes, 100);
        assert_eq!(row.median_generations, MedianGenerations::Censored(100));
        assert_eq!(row.median_generations.to_string(), "≥100");
        assert!((row.success_rate - 1.0 / 3.0).abs() < 1e-12);

        let converged: Vec<Option<CellOutcome>> = vec![
            Some(CellOutcome { converged: true, generations: 12 }),
            Some(CellOutcome { converged: true, generations: 4 }),
            Some(CellOutcome { converged: true, generations: 30 }),
        ];
        let row = aggregate_sweep_row(8, &converged, 100);
        assert_eq!(row.median_generations, MedianGenerations::Reached(12));
        assert_eq!(row.success_rate, 1.0);
    }

    #[test]
    fn sweep_csv_round_trips() {
        let rows = vec![
            SweepRow {
                population_size: 4,
                seeds_run: 5,
                median_generations: MedianGenerations::Censored(100),
                success_rate: 0.2,
            },
            SweepRow {
                population_size: 20,
                seeds_run: 5,
                median_generations: MedianGenerations::Reached(22),
                success_rate: 1.0,
            },
        ];
        let parsed = parse_sweep_csv(&sweep_csv_string(&rows)).unwrap();
        assert_eq!(parsed, rows);
    }

    // Cheap end-to-end sweep shapes: a threshold of 1 converges in the first
    // generation, so the full pipeline runs in milliseconds.
    fn instant_configs() -> (EnvConfig, EvolutionConfig, TrainerConfig) {
        let env = EnvConfig::default();
        let evolution = EvolutionConfig::default();
        let trainer = TrainerConfig {
            learned_threshold: 1.0,
            max_generations: 3,
            max_steps_per_episode: 2_000,
            ..TrainerConfig::default()
        };
        (env, evolution, trainer)
    }

    #[test]
    fn population_sweep_has_a_row_per_size() {
        let (env, evolution, trainer) = instant_configs();
        let report = population_sweep(
            &[4, 8, 16, 20, 32, 40],
            &[1, 2],
            &env,
            &evolution,
            &trainer,
            1,
        );
        assert_eq!(report.rows.len(), 6);
        assert_eq!(report.cells.len(), 12);
        let populations: Vec<usize> = report.rows.iter().map(|r| r.population_size).collect();
        assert_eq!(populations, vec![4, 8, 16, 20, 32, 40]);
    }

    #[test]
    fn scenario_sweep_covers_the_three_scenarios() {
        let (env, evolution, trainer) = instant_configs();
        let report =
            scenario_sweep(&default_scenarios(), &[3], &env, &evolution, &trainer, 1);
        assert_eq!(report.rows.len(), 3);
        let populations: Vec<usize> = report.rows.iter().map(|r| r.population_size).collect();
        assert_eq!(populations, vec![4, 8, 20]);
    }

    #[test]
    fn aggregation_is_recomputable_from_stored_cell_stats() {
        let (env, evolution, trainer) = instant_configs();
        let report = population_sweep(&[4, 8], &[5, 6, 7], &env, &evolution, &trainer, 2);

        // Re-derive each row from the per-cell stats CSVs alone.
        for (row, chunk) in report.rows.iter().zip(report.cells.chunks(3)) {
            let outcomes: Vec<Option<CellOutcome>> = chunk
                .iter()
                .map(|cell| {
                    let text = run_csv_string(&cell.stats);
                    let stats = parse_run_csv(&text).unwrap();
                    Some(cell_outcome_from_stats(&stats, trainer.learned_threshold))
                })
                .collect();
            let rebuilt =
                aggregate_sweep_row(row.population_size, &outcomes, trainer.max_generations);
            assert_eq!(&rebuilt, row);
        }
    }
}
