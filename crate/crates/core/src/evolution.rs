//! The genetic cycle: truncation selection, innovation-aligned crossover,
//! probabilistic mutation, and the generation turnover that stitches them
//! together. One [`InnovationRegistry`] per run keeps historical markings
//! consistent, so the same structural event always yields the same gene ids
//! no matter which genome it happens in.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::genome::{
    ConnectionGene, Genome, Innovation, NodeGene, NodeId, NodeKind, FIRST_HIDDEN_ID,
    WEIGHT_CLAMP,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    /// Fraction of the population kept as parents (and elites) each
    /// generation.
    pub survivor_fraction: f64,
    pub p_conn_add: f64,
    pub p_conn_delete: f64,
    pub p_node_add: f64,
    pub p_node_delete: f64,
    pub p_weight_mutate: f64,
    /// When a weight mutation fires, each weight is replaced outright with
    /// this probability instead of being perturbed.
    pub p_weight_replace: f64,
    pub weight_perturb_sigma: f64,
    pub population_size: usize,
    /// Start every genome with both input->output connections instead of the
    /// stochastic-per-connection default.
    pub fully_connected_start: bool,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            survivor_fraction: 0.2,
            p_conn_add: 0.5,
            p_conn_delete: 0.5,
            p_node_add: 0.2,
            p_node_delete: 0.2,
            p_weight_mutate: 0.8,
            p_weight_replace: 0.1,
            weight_perturb_sigma: 0.5,
            population_size: 20,
            fully_connected_start: false,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("p_conn_add", self.p_conn_add),
            ("p_conn_delete", self.p_conn_delete),
            ("p_node_add", self.p_node_add),
            ("p_node_delete", self.p_node_delete),
            ("p_weight_mutate", self.p_weight_mutate),
            ("p_weight_replace", self.p_weight_replace),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if !(self.survivor_fraction > 0.0 && self.survivor_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "survivor_fraction must be in (0, 1], got {}",
                self.survivor_fraction
            )));
        }
        if self.weight_perturb_sigma < 0.0 {
            return Err(Error::InvalidConfig("weight_perturb_sigma must be >= 0".into()));
        }
        if self.population_size < 4 || self.population_size % 4 != 0 {
            return Err(Error::InvalidConfig(format!(
                "population_size must be >= 4 and divisible by 4, got {}",
                self.population_size
            )));
        }
        Ok(())
    }
}

/// Run-global lookup tables for historical markings. Two genomes that
/// independently produce the same structural event (same connection
/// endpoints, or a split of the same connection) receive identical ids, so
/// their genes line up in later crossovers.
///
/// The edges created by a node split are themselves registered through the
/// connection table: an edge added by `conn_add` and the same edge created
/// by a split share one innovation number.
#[derive(Debug, Clone)]
pub struct InnovationRegistry {
    next_innovation: u64,
    next_node_id: u32,
    connection_table: HashMap<(NodeId, NodeId), Innovation>,
    split_table: HashMap<Innovation, NodeId>,
}

impl Default for InnovationRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl InnovationRegistry {
    pub fn new() -> InnovationRegistry {
        InnovationRegistry {
            next_innovation: 0,
            next_node_id: FIRST_HIDDEN_ID,
            connection_table: HashMap::new(),
            split_table: HashMap::new(),
        }
    }

    pub fn connection_innovation(&mut self, from: NodeId, to: NodeId) -> Innovation {
        match self.connection_table.entry((from, to)) {
            Entry::Occupied(e) => *e.get(),
            Entry::Vacant(e) => {
                let innovation = Innovation(self.next_innovation);
                self.next_innovation += 1;
                *e.insert(innovation)
            }
        }
    }

    /// Hidden-node id and in/out edge innovations for splitting the given
    /// connection.
    pub fn split_connection(
        &mut self,
        split: Innovation,
        from: NodeId,
        to: NodeId,
    ) -> (NodeId, Innovation, Innovation) {
        let node = match self.split_table.entry(split) {
            Entry::Occupied(e) => *e.get(),
            Entry::Vacant(e) => {
                let id = NodeId(self.next_node_id);
                self.next_node_id += 1;
                *e.insert(id)
            }
        };
        let incoming = self.connection_innovation(from, node);
        let outgoing = self.connection_innovation(node, to);
        (node, incoming, outgoing)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub members: Vec<Genome>,
    pub generation_index: u32,
}

impl Population {
    /// Seed generation of minimal genomes, stochastically or fully connected
    /// depending on the config.
    pub fn initial(
        config: &EvolutionConfig,
        registry: &mut InnovationRegistry,
        rng: &mut impl Rng,
    ) -> Population {
        let members = (0..config.population_size)
            .map(|_| {
                if config.fully_connected_start {
                    crate::genome::fully_connected_genome(rng, registry)
                } else {
                    crate::genome::minimal_genome(rng, registry)
                }
            })
            .collect();
        Population { members, generation_index: 0 }
    }
}

/// Truncation selection: the top `survivor_fraction` of the population by
/// fitness (count rounded up), ties broken by lower member index.
pub fn select(population: &Population, config: &EvolutionConfig) -> Result<Vec<Genome>> {
    if population.members.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let n = population.members.len();
    // The small epsilon keeps ceil() from inflating the count when the
    // product lands one rounding error above an integer.
    let k = ((config.survivor_fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        population.members[b]
            .fitness
            .total_cmp(&population.members[a].fitness)
            .then(a.cmp(&b))
    });
    Ok(order[..k].iter().map(|&i| population.members[i].clone()).collect())
}

fn reaches(edges: &[(NodeId, NodeId)], start: NodeId, target: NodeId) -> bool {
    let mut stack = vec![start];
    let mut seen = vec![start];
    while let Some(node) = stack.pop() {
        if node == target {
            return true;
        }
        for &(from, to) in edges {
            if from == node && !seen.contains(&to) {
                seen.push(to);
                stack.push(to);
            }
        }
    }
    false
}

/// Would adding the enabled edge `from -> to` close a cycle?
fn creates_cycle(edges: &[(NodeId, NodeId)], from: NodeId, to: NodeId) -> bool {
    from == to || reaches(edges, to, from)
}

/// Recombine two parents gene by gene.
///
/// Connection genes with matching innovation numbers are inherited from the
/// strictly fitter parent (from either with equal probability when fitness
/// is tied); disjoint and excess genes come from the strictly fitter parent
/// only, or from either parent with probability 0.5 when fitness is tied.
/// Genes are admitted in ascending innovation order and any gene whose
/// enabled edge would close a cycle against the genes already admitted is
/// skipped. Node genes follow the connections that reference them (biases
/// from the contributing parent, fitter-parent rule when both carry the
/// node). The child's fitness starts at zero.
pub fn crossover(parent_a: &Genome, parent_b: &Genome, rng: &mut impl Rng) -> Genome {
    #[derive(Clone, Copy, PartialEq)]
    enum Source {
        A,
        B,
    }

    // Candidate list: (gene, source), ascending innovation, merge-join over
    // the two sorted gene lists.
    let mut candidates: Vec<(ConnectionGene, Source)> = Vec::new();
    let (mut ia, mut ib) = (0, 0);
    let a_fitter = parent_a.fitness > parent_b.fitness;
    let b_fitter = parent_b.fitness > parent_a.fitness;
    loop {
        enum Take {
            Matching,
            A,
            B,
        }
        let take = match (parent_a.connections.get(ia), parent_b.connections.get(ib)) {
            (Some(ca), Some(cb)) if ca.innovation == cb.innovation => Take::Matching,
            (Some(ca), Some(cb)) => {
                if ca.innovation < cb.innovation {
                    Take::A
                } else {
                    Take::B
                }
            }
            (Some(_), None) => Take::A,
            (None, Some(_)) => Take::B,
            (None, None) => break,
        };
        match take {
            Take::Matching => {
                let from_a = a_fitter || (!b_fitter && rng.random_bool(0.5));
                let gene = if from_a {
                    (parent_a.connections[ia], Source::A)
                } else {
                    (parent_b.connections[ib], Source::B)
                };
                candidates.push(gene);
                ia += 1;
                ib += 1;
            }
            Take::A => {
                if a_fitter || (!b_fitter && rng.random_bool(0.5)) {
                    candidates.push((parent_a.connections[ia], Source::A));
                }
                ia += 1;
            }
            Take::B => {
                if b_fitter || (!a_fitter && rng.random_bool(0.5)) {
                    candidates.push((parent_b.connections[ib], Source::B));
                }
                ib += 1;
            }
        }
    }

    let mut connections: Vec<ConnectionGene> = Vec::with_capacity(candidates.len());
    let mut enabled_edges: Vec<(NodeId, NodeId)> = Vec::new();
    let mut node_source: HashMap<NodeId, Source> = HashMap::new();
    for (gene, source) in candidates {
        if gene.enabled {
            if creates_cycle(&enabled_edges, gene.from, gene.to) {
                continue;
            }
            enabled_edges.push((gene.from, gene.to));
        }
        node_source.entry(gene.from).or_insert(source);
        node_source.entry(gene.to).or_insert(source);
        connections.push(gene);
    }

    // The fixed scaffold is always present even if no connection references
    // it.
    let mut node_ids: Vec<NodeId> = vec![crate::genome::INPUT_IDS[0], crate::genome::INPUT_IDS[1], crate::genome::OUTPUT_ID];
    for c in &connections {
        node_ids.push(c.from);
        node_ids.push(c.to);
    }
    node_ids.sort();
    node_ids.dedup();

    let nodes = node_ids
        .into_iter()
        .map(|id| {
            let in_a = parent_a.node(id);
            let in_b = parent_b.node(id);
            match (in_a, in_b) {
                (Some(na), Some(nb)) => {
                    if a_fitter || (!b_fitter && rng.random_bool(0.5)) {
                        *na
                    } else {
                        *nb
                    }
                }
                (Some(na), None) => *na,
                (None, Some(nb)) => *nb,
                (None, None) => {
                    unreachable!("connection endpoints always exist in a contributing parent")
                }
            }
        })
        .collect();

    let mut child = Genome { nodes, connections, fitness: 0.0 };
    child.normalize();
    child
}

fn gaussian(rng: &mut impl Rng, sigma: f64) -> f64 {
    // Box-Muller; u1 floored away from zero so ln stays finite.
    let u1: f64 = rng.random::<f64>().max(f64::EPSILON);
    let u2: f64 = rng.random::<f64>();
    sigma * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn clamp_weight(w: f64) -> f64 {
    w.clamp(-WEIGHT_CLAMP, WEIGHT_CLAMP)
}

fn mutate_weights(genome: &mut Genome, config: &EvolutionConfig, rng: &mut impl Rng) {
    for c in &mut genome.connections {
        if rng.random_bool(config.p_weight_replace) {
            c.weight = rng.random_range(-1.0..=1.0);
        } else {
            c.weight = clamp_weight(c.weight + gaussian(rng, config.weight_perturb_sigma));
        }
    }
    for n in &mut genome.nodes {
        if n.kind != NodeKind::Input {
            n.bias = clamp_weight(n.bias + gaussian(rng, config.weight_perturb_sigma));
        }
    }
}

fn add_connection(genome: &mut Genome, registry: &mut InnovationRegistry, rng: &mut impl Rng) {
    let enabled_edges: Vec<(NodeId, NodeId)> =
        genome.enabled_connections().map(|c| (c.from, c.to)).collect();
    let mut candidates = Vec::new();
    for from in &genome.nodes {
        if from.kind == NodeKind::Output {
            continue;
        }
        for to in &genome.nodes {
            if to.kind == NodeKind::Input || from.id == to.id {
                continue;
            }
            if genome.has_edge(from.id, to.id) {
                continue;
            }
            if creates_cycle(&enabled_edges, from.id, to.id) {
                continue;
            }
            candidates.push((from.id, to.id));
        }
    }
    if candidates.is_empty() {
        return;
    }
    let (from, to) = candidates[rng.random_range(0..candidates.len())];
    genome.connections.push(ConnectionGene {
        innovation: registry.connection_innovation(from, to),
        from,
        to,
        weight: rng.random_range(-1.0..=1.0),
        enabled: true,
    });
}

/// Drop hidden nodes left with no incident connections; crossover rebuilds
/// node lists from connection endpoints, so an orphan would silently vanish
/// there and break the identical-parents identity.
fn prune_orphan_hidden(genome: &mut Genome) {
    loop {
        let orphan = genome.nodes.iter().find(|n| {
            n.kind == NodeKind::Hidden
                && !genome.connections.iter().any(|c| c.from == n.id || c.to == n.id)
        });
        let Some(id) = orphan.map(|n| n.id) else { break };
        genome.nodes.retain(|n| n.id != id);
    }
}

fn delete_connection(genome: &mut Genome, rng: &mut impl Rng) {
    if genome.connections.is_empty() {
        return;
    }
    let index = rng.random_range(0..genome.connections.len());
    genome.connections.remove(index);
    prune_orphan_hidden(genome);
}

fn split_connection(genome: &mut Genome, registry: &mut InnovationRegistry, rng: &mut impl Rng) {
    let enabled: Vec<Innovation> =
        genome.enabled_connections().map(|c| c.innovation).collect();
    if enabled.is_empty() {
        return;
    }
    let chosen = enabled[rng.random_range(0..enabled.len())];
    let (from, to, weight) = {
        let c = genome.connection(chosen).expect("chosen from this genome");
        (c.from, c.to, c.weight)
    };
    let (node, incoming, outgoing) = registry.split_connection(chosen, from, to);
    if genome.contains_node(node) {
        // Crossover can hand a genome both the split artifacts and a
        // re-enabled copy of the original edge; splitting again would
        // duplicate genes, so the mutation falls back to a no-op.
        return;
    }
    genome
        .connections
        .iter_mut()
        .find(|c| c.innovation == chosen)
        .expect("chosen from this genome")
        .enabled = false;
    genome.nodes.push(NodeGene { id: node, kind: NodeKind::Hidden, bias: 0.0 });
    genome.connections.push(ConnectionGene {
        innovation: incoming,
        from,
        to: node,
        weight: 1.0,
        enabled: true,
    });
    genome.connections.push(ConnectionGene {
        innovation: outgoing,
        from: node,
        to,
        weight,
        enabled: true,
    });
}

fn delete_node(genome: &mut Genome, rng: &mut impl Rng) {
    let hidden = genome.hidden_ids();
    if hidden.is_empty() {
        return;
    }
    let id = hidden[rng.random_range(0..hidden.len())];
    genome.nodes.retain(|n| n.id != id);
    genome.connections.retain(|c| c.from != id && c.to != id);
    prune_orphan_hidden(genome);
}

/// Apply each mutation class independently with its configured probability:
/// weight/bias perturbation, connection add, connection delete, node split,
/// node delete — in that order. Structural mutations without a valid target
/// are silent no-ops. Returns a new genome; the input is untouched.
pub fn mutate(
    genome: &Genome,
    config: &EvolutionConfig,
    registry: &mut InnovationRegistry,
    rng: &mut impl Rng,
) -> Genome {
    let mut out = genome.clone();
    if config.p_weight_mutate > 0.0 && rng.random_bool(config.p_weight_mutate) {
        mutate_weights(&mut out, config, rng);
    }
    if config.p_conn_add > 0.0 && rng.random_bool(config.p_conn_add) {
        add_connection(&mut out, registry, rng);
    }
    if config.p_conn_delete > 0.0 && rng.random_bool(config.p_conn_delete) {
        delete_connection(&mut out, rng);
    }
    if config.p_node_add > 0.0 && rng.random_bool(config.p_node_add) {
        split_connection(&mut out, registry, rng);
    }
    if config.p_node_delete > 0.0 && rng.random_bool(config.p_node_delete) {
        delete_node(&mut out, rng);
    }
    out.normalize();
    out
}

/// Produce the next generation: the selected parents are carried over
/// unchanged (fitness reset to zero) and the remaining slots are filled with
/// mutated crossover offspring of parent pairs drawn uniformly (distinct
/// parents whenever at least two exist).
///
/// Elites lead the roster. Selection breaks fitness ties by lower index, so
/// a proven parent keeps its seat against offspring that merely tie it.
pub fn next_generation(
    population: &Population,
    config: &EvolutionConfig,
    registry: &mut InnovationRegistry,
    rng: &mut impl Rng,
) -> Result<Population> {
    let parents = select(population, config)?;
    let mut members: Vec<Genome> = Vec::with_capacity(population.members.len());
    for parent in &parents {
        let mut elite = parent.clone();
        elite.fitness = 0.0;
        members.push(elite);
    }
    let offspring_count = population.members.len() - parents.len();
    for _ in 0..offspring_count {
        let first = rng.random_range(0..parents.len());
        let second = if parents.len() == 1 {
            first
        } else {
            let mut pick = rng.random_range(0..parents.len() - 1);
            if pick >= first {
                pick += 1;
            }
            pick
        };
        let child = crossover(&parents[first], &parents[second], rng);
        members.push(mutate(&child, config, registry, rng));
    }

    if cfg!(debug_assertions) {
        for (i, m) in members.iter().enumerate() {
            m.validate().unwrap_or_else(|e| panic!("generation member {i} invalid: {e}"));
        }
    }

    Ok(Population { members, generation_index: population.generation_index + 1 })
}
