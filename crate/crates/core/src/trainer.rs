//! Generation orchestration: genomes are bound to paddles, an episode plays
//! out with per-step fitness accounting, and the evolution cycle produces
//! the next roster. Everything downstream of a seed is deterministic.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{self, EnvConfig, Paddle, Side, StepEvents, WorldState};
use crate::evolution::{next_generation, EvolutionConfig, InnovationRegistry, Population};
use crate::genome::{CompiledNetwork, Genome};
use crate::metrics::GenerationStats;
use crate::{Error, Result, RunRng};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    /// Paddles per active side; population = n_per_side * active sides.
    pub n_per_side: usize,
    pub hit_reward: f64,
    pub miss_penalty: f64,
    pub survival_reward_per_step: f64,
    /// Training stops once a paddle's episode fitness reaches this.
    pub fitness_threshold: f64,
    /// The lower "population has learned" bar used by the experiment sweeps.
    pub learned_threshold: f64,
    pub max_generations: u32,
    pub max_steps_per_episode: u64,
    pub seed: u64,
    /// Gate the stop condition on mean population fitness instead of the
    /// best single paddle.
    pub threshold_on_mean: bool,
    /// Ablation switch: keep the genome-to-side assignment fixed instead of
    /// reshuffling it every generation.
    pub fixed_assignment: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            n_per_side: 5,
            hit_reward: 10.0,
            miss_penalty: 5.0,
            survival_reward_per_step: 0.1,
            fitness_threshold: 100_000.0,
            learned_threshold: 25_000.0,
            max_generations: 100,
            max_steps_per_episode: 200_000,
            seed: 0,
            threshold_on_mean: false,
            fixed_assignment: false,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_side == 0 {
            return Err(Error::InvalidConfig("n_per_side must be positive".into()));
        }
        if self.hit_reward <= 0.0 || self.miss_penalty <= 0.0 {
            return Err(Error::InvalidConfig("hit_reward and miss_penalty must be positive".into()));
        }
        if self.survival_reward_per_step < 0.0 {
            return Err(Error::InvalidConfig("survival_reward_per_step must be >= 0".into()));
        }
        if self.fitness_threshold <= 0.0 || self.learned_threshold <= 0.0 {
            return Err(Error::InvalidConfig("thresholds must be positive".into()));
        }
        if self.max_steps_per_episode == 0 {
            return Err(Error::InvalidConfig("max_steps_per_episode must be positive".into()));
        }
        Ok(())
    }
}

/// One genome's standing within an episode. Fitness is recomputed from the
/// event counters (`hit_reward * hits - miss_penalty * misses +
/// survival_reward_per_step * steps_survived`), so the accounting identity
/// holds exactly at every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentRecord {
    pub genome_index: usize,
    pub side: Side,
    pub fitness: f64,
    pub alive: bool,
    pub hits: u32,
    pub misses: u32,
    pub steps_survived: u64,
}

impl AgentRecord {
    pub fn new(genome_index: usize, side: Side) -> AgentRecord {
        AgentRecord {
            genome_index,
            side,
            fitness: 0.0,
            alive: true,
            hits: 0,
            misses: 0,
            steps_survived: 0,
        }
    }

    pub fn expected_fitness(&self, config: &TrainerConfig) -> f64 {
        config.hit_reward * self.hits as f64 - config.miss_penalty * self.misses as f64
            + config.survival_reward_per_step * self.steps_survived as f64
    }

    fn refresh_fitness(&mut self, config: &TrainerConfig) {
        self.fitness = self.expected_fitness(config);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    SideBreached(Side),
    StepCapReached,
    FitnessThresholdReached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub steps_run: u64,
    pub terminated_by: Termination,
    pub records: Vec<AgentRecord>,
    /// Alive paddles per side at episode end, indexed by [`Side::index`].
    pub survivors_per_side: [u32; 4],
}

/// Anything that can drive a paddle. The genome-backed controller is the
/// production path; the scripted ones are reference opponents for tests and
/// replay baselines and deliberately bypass the network stack.
pub trait Controller {
    fn act(&mut self, world: &WorldState, paddle: &Paddle, config: &EnvConfig) -> f64;
}

pub struct GenomeController {
    network: CompiledNetwork,
}

impl GenomeController {
    pub fn new(genome: &Genome) -> Result<GenomeController> {
        Ok(GenomeController { network: CompiledNetwork::compile(genome)? })
    }
}

impl Controller for GenomeController {
    fn act(&mut self, world: &WorldState, paddle: &Paddle, config: &EnvConfig) -> f64 {
        self.network.run(env::observe(world, paddle, config))
    }
}

/// Omniscient tracker: extrapolates where the ball will cross this paddle's
/// line and drives toward that point, recentering while the ball recedes.
/// Upper-bound opponent for sustained-play measurements.
pub struct BallTracker;

impl Controller for BallTracker {
    fn act(&mut self, world: &WorldState, paddle: &Paddle, config: &EnvConfig) -> f64 {
        let side = paddle.side;
        let line = config.interaction_line(side);
        let (ball_perp, ball_tang, v_perp, v_tang) = if side.is_horizontal() {
            (world.ball.y, world.ball.x, world.ball.vy, world.ball.vx)
        } else {
            (world.ball.x, world.ball.y, world.ball.vx, world.ball.vy)
        };
        let approaching = (line - ball_perp) * v_perp > 0.0;
        let target = if approaching {
            let t = (line - ball_perp) / v_perp;
            ball_tang + v_tang * t
        } else {
            config.axis_extent(side) / 2.0
        };
        let gap = target - paddle.track_position;
        if gap.abs() <= config.paddle_speed / 2.0 {
            0.0
        } else if gap > 0.0 {
            0.9
        } else {
            -0.9
        }
    }
}

/// Always outputs zero: the paddle holds its spawn position forever.
pub struct FrozenController;

impl Controller for FrozenController {
    fn act(&mut self, _world: &WorldState, _paddle: &Paddle, _config: &EnvConfig) -> f64 {
        0.0
    }
}

/// Shuffle the population and deal it evenly across the active sides. Every
/// record starts alive with zero fitness.
pub fn assign_sides(
    population: &Population,
    active_sides: &[Side],
    rng: &mut impl Rng,
) -> Result<Vec<AgentRecord>> {
    partition_indices(population.members.len(), active_sides, Some(rng))
}

fn partition_indices<R: Rng>(
    count: usize,
    active_sides: &[Side],
    rng: Option<&mut R>,
) -> Result<Vec<AgentRecord>> {
    if active_sides.is_empty() || count % active_sides.len() != 0 {
        return Err(Error::IndivisiblePopulation { population: count, sides: active_sides.len() });
    }
    let mut sides: Vec<Side> = active_sides.to_vec();
    sides.sort_by_key(|s| s.index());
    let per_side = count / sides.len();

    let mut indices: Vec<usize> = (0..count).collect();
    if let Some(rng) = rng {
        indices.shuffle(rng);
    }
    Ok(indices
        .into_iter()
        .enumerate()
        .map(|(slot, genome_index)| AgentRecord::new(genome_index, sides[slot / per_side]))
        .collect())
}

fn survivors_by_side(records: &[AgentRecord]) -> [u32; 4] {
    let mut counts = [0u32; 4];
    for record in records.iter().filter(|r| r.alive) {
        counts[record.side.index()] += 1;
    }
    counts
}

/// Episode loop shared by every entry point. `observer` sees the world after
/// each resolved step; pass a no-op closure when tracing is not needed.
fn episode_loop(
    controllers: &mut [Box<dyn Controller + '_>],
    mut records: Vec<AgentRecord>,
    env_config: &EnvConfig,
    trainer_config: &TrainerConfig,
    rng: &mut impl Rng,
    mut observer: impl FnMut(u64, &WorldState, &StepEvents),
) -> Result<EpisodeResult> {
    assert_eq!(controllers.len(), records.len());
    for side in &env_config.active_sides {
        if !records.iter().any(|r| r.side == *side) {
            return Err(Error::InvalidConfig(format!(
                "active side {} has no paddles",
                side.name()
            )));
        }
    }

    let roster: Vec<(usize, Side)> =
        records.iter().enumerate().map(|(i, r)| (i, r.side)).collect();
    let mut world = env::reset(env_config, &roster, rng);
    let mut actions: Vec<Option<f64>> = vec![None; records.len()];

    let mut steps_run = 0;
    let mut terminated_by = Termination::StepCapReached;
    for step_index in 1..=trainer_config.max_steps_per_episode {
        for (i, record) in records.iter().enumerate() {
            actions[i] = if record.alive {
                Some(controllers[i].act(&world, &world.paddles[i], env_config))
            } else {
                None
            };
        }
        let events = env::step(&mut world, &actions, env_config)?;

        for &agent in &events.hits {
            records[agent].hits += 1;
        }
        for &agent in &events.misses {
            records[agent].misses += 1;
            records[agent].alive = false;
        }
        for record in records.iter_mut().filter(|r| r.alive) {
            record.steps_survived += 1;
        }
        for record in records.iter_mut() {
            record.refresh_fitness(trainer_config);
        }

        observer(step_index, &world, &events);
        steps_run = step_index;

        // Termination priority: threshold, then breach, then the step cap.
        let gate = if trainer_config.threshold_on_mean {
            records.iter().map(|r| r.fitness).sum::<f64>() / records.len() as f64
        } else {
            records.iter().map(|r| r.fitness).fold(f64::NEG_INFINITY, f64::max)
        };
        if gate >= trainer_config.fitness_threshold {
            terminated_by = Termination::FitnessThresholdReached;
            break;
        }
        if let Some(side) = events.side_breached {
            terminated_by = Termination::SideBreached(side);
            break;
        }
    }

    let survivors_per_side = survivors_by_side(&records);
    Ok(EpisodeResult { steps_run, terminated_by, records, survivors_per_side })
}

/// Play one episode with genome-backed controllers, updating fitness at
/// every step, until a side is breached, a fitness crosses the threshold,
/// or the step cap is hit.
pub fn run_episode(
    genomes: &[Genome],
    records: Vec<AgentRecord>,
    env_config: &EnvConfig,
    trainer_config: &TrainerConfig,
    rng: &mut impl Rng,
) -> Result<EpisodeResult> {
    run_episode_observed(genomes, records, env_config, trainer_config, rng, |_, _, _| {})
}

/// [`run_episode`] with a per-step observer; the replay tracer hangs off
/// this hook.
pub fn run_episode_observed(
    genomes: &[Genome],
    records: Vec<AgentRecord>,
    env_config: &EnvConfig,
    trainer_config: &TrainerConfig,
    rng: &mut impl Rng,
    observer: impl FnMut(u64, &WorldState, &StepEvents),
) -> Result<EpisodeResult> {
    let mut controllers: Vec<Box<dyn Controller>> = records
        .iter()
        .map(|r| {
            GenomeController::new(&genomes[r.genome_index])
                .map(|c| Box::new(c) as Box<dyn Controller>)
        })
        .collect::<Result<_>>()?;
    episode_loop(&mut controllers, records, env_config, trainer_config, rng, observer)
}

/// Episode driven by arbitrary controllers; the scripted oracles enter here.
pub fn run_episode_scripted(
    controllers: &mut [Box<dyn Controller + '_>],
    records: Vec<AgentRecord>,
    env_config: &EnvConfig,
    trainer_config: &TrainerConfig,
    rng: &mut impl Rng,
) -> Result<EpisodeResult> {
    episode_loop(controllers, records, env_config, trainer_config, rng, |_, _, _| {})
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub generations_run: u32,
    pub converged: bool,
    /// 1-based generation count at which the threshold was crossed.
    pub convergence_generation: Option<u32>,
    /// Best genome observed per side, carrying its achieved fitness.
    pub champions: BTreeMap<Side, Genome>,
    pub stats: Vec<GenerationStats>,
}

fn check_run_configs(
    env_config: &EnvConfig,
    trainer_config: &TrainerConfig,
    evolution_config: &EvolutionConfig,
) -> Result<()> {
    env_config.validate()?;
    trainer_config.validate()?;
    evolution_config.validate()?;
    let expected = trainer_config.n_per_side * env_config.active_sides.len();
    if evolution_config.population_size != expected {
        return Err(Error::InvalidConfig(format!(
            "population_size {} != n_per_side {} x {} active sides",
            evolution_config.population_size,
            trainer_config.n_per_side,
            env_config.active_sides.len()
        )));
    }
    Ok(())
}

/// The full training loop: assign sides, play an episode, record stats,
/// breed the next generation; stop when a fitness crosses
/// `fitness_threshold` or after `max_generations`.
pub fn run_training(
    env_config: &EnvConfig,
    trainer_config: &TrainerConfig,
    evolution_config: &EvolutionConfig,
) -> Result<RunResult> {
    check_run_configs(env_config, trainer_config, evolution_config)?;

    let mut rng = crate::seeded_rng(trainer_config.seed);
    let mut registry = InnovationRegistry::new();
    let mut population = Population::initial(evolution_config, &mut registry, &mut rng);

    let mut stats: Vec<GenerationStats> = Vec::new();
    let mut champions: BTreeMap<Side, Genome> = BTreeMap::new();
    let mut cumulative_steps = 0u64;
    let mut converged = false;
    let mut convergence_generation = None;

    for generation in 0..trainer_config.max_generations {
        let records = if trainer_config.fixed_assignment {
            partition_indices(
                population.members.len(),
                &env_config.active_sides,
                None::<&mut RunRng>,
            )?
        } else {
            assign_sides(&population, &env_config.active_sides, &mut rng)?
        };
        let result =
            run_episode(&population.members, records, env_config, trainer_config, &mut rng)?;

        for record in &result.records {
            population.members[record.genome_index].fitness = record.fitness;
            let best_for_side = champions.get(&record.side).map(|g| g.fitness);
            if best_for_side.map_or(true, |b| record.fitness > b) {
                let mut champion = population.members[record.genome_index].clone();
                champion.fitness = record.fitness;
                champions.insert(record.side, champion);
            }
        }

        let best = population.members.iter().map(|m| m.fitness).fold(f64::NEG_INFINITY, f64::max);
        let mean = population.members.iter().map(|m| m.fitness).sum::<f64>()
            / population.members.len() as f64;
        cumulative_steps += result.steps_run;
        stats.push(GenerationStats {
            generation,
            best_fitness: best,
            mean_fitness: mean,
            survivors_total: result.survivors_per_side.iter().sum(),
            survivors_per_side: result.survivors_per_side,
            episode_steps: result.steps_run,
            cumulative_steps,
        });

        let gate = if trainer_config.threshold_on_mean { mean } else { best };
        if gate >= trainer_config.fitness_threshold {
            converged = true;
            convergence_generation = Some(generation + 1);
            break;
        }
        if generation + 1 < trainer_config.max_generations {
            population =
                next_generation(&population, evolution_config, &mut registry, &mut rng)?;
        }
    }

    Ok(RunResult {
        generations_run: stats.len() as u32,
        converged,
        convergence_generation,
        champions,
        stats,
    })
}

/// Replay champions (one per active side) on `n_trials` fresh episodes and
/// report the fraction that reach the step cap with no side breached. The
/// fitness stop is disabled so a trial can only end by cap or breach.
pub fn evaluate_sustained(
    champions: &BTreeMap<Side, Genome>,
    env_config: &EnvConfig,
    trainer_config: &TrainerConfig,
    n_trials: u32,
    rng: &mut impl Rng,
) -> Result<f64> {
    env_config.validate()?;
    let mut sides: Vec<Side> = env_config.active_sides.clone();
    sides.sort_by_key(|s| s.index());
    let mut genomes = Vec::new();
    for side in &sides {
        let champion = champions.get(side).ok_or_else(|| {
            Error::InvalidConfig(format!("no champion for active side {}", side.name()))
        })?;
        genomes.push(champion.clone());
    }

    let replay_config =
        TrainerConfig { fitness_threshold: f64::INFINITY, ..trainer_config.clone() };
    let mut sustained = 0u32;
    for _ in 0..n_trials {
        let records: Vec<AgentRecord> =
            sides.iter().enumerate().map(|(i, &side)| AgentRecord::new(i, side)).collect();
        let result = run_episode(&genomes, records, env_config, &replay_config, rng)?;
        if result.terminated_by == Termination::StepCapReached {
            sustained += 1;
        }
    }
    Ok(sustained as f64 / n_trials as f64)
}
