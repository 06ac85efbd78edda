//! NEAT genome encoding and feedforward evaluation.
//!
//! A genome is a directed weighted graph: node genes (two fixed inputs, one
//! fixed output, any number of hidden nodes) and connection genes tagged
//! with innovation numbers so that homologous genes line up across genomes
//! during crossover. Genomes are value objects: every operator produces a
//! new genome, and [`evaluate`] is pure, so sharing them across threads is
//! safe.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::evolution::InnovationRegistry;
use crate::{Error, Result};

/// Identifier of a node gene. Ids are allocated by the innovation registry,
/// so the same structural node carries the same id in every genome of a run.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

/// Historical marking of a connection gene.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Innovation(pub u64);

/// Every genome shares the same rudimentary scaffold: two inputs, one output.
pub const INPUT_IDS: [NodeId; 2] = [NodeId(0), NodeId(1)];
pub const OUTPUT_ID: NodeId = NodeId(2);
/// First id the registry hands out for hidden nodes.
pub const FIRST_HIDDEN_ID: u32 = 3;

/// Weights and biases are clamped here after mutation so repeated
/// perturbation cannot drive tanh into a permanently saturated regime.
pub const WEIGHT_CLAMP: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Input,
    Hidden,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeGene {
    pub id: NodeId,
    pub kind: NodeKind,
    pub bias: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionGene {
    pub innovation: Innovation,
    pub from: NodeId,
    pub to: NodeId,
    pub weight: f64,
    pub enabled: bool,
}

/// One agent's genetic encoding. `nodes` stays sorted by id and
/// `connections` by innovation; the operators in [`crate::evolution`]
/// maintain that ordering and [`Genome::validate`] checks it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub nodes: Vec<NodeGene>,
    pub connections: Vec<ConnectionGene>,
    #[serde(default)]
    pub fitness: f64,
}

impl Genome {
    pub fn node(&self, id: NodeId) -> Option<&NodeGene> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        self.node(id).is_some()
    }

    pub fn connection(&self, innovation: Innovation) -> Option<&ConnectionGene> {
        self.connections.iter().find(|c| c.innovation == innovation)
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.connections.iter().any(|c| c.from == from && c.to == to)
    }

    pub fn hidden_ids(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Hidden)
            .map(|n| n.id)
            .collect()
    }

    pub fn enabled_connections(&self) -> impl Iterator<Item = &ConnectionGene> {
        self.connections.iter().filter(|c| c.enabled)
    }

    /// Restore the canonical ordering after an operator edited the gene lists.
    pub(crate) fn normalize(&mut self) {
        self.nodes.sort_by_key(|n| n.id);
        self.connections.sort_by_key(|c| c.innovation);
    }

    /// Check every structural invariant. Run by the evolution loop in debug
    /// builds and by the operator fuzz tests after each operation.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));

        if !self.nodes.windows(2).all(|w| w[0].id < w[1].id) {
            return fail("nodes not strictly sorted by id".into());
        }
        if !self
            .connections
            .windows(2)
            .all(|w| w[0].innovation < w[1].innovation)
        {
            return fail("connections not strictly sorted by innovation".into());
        }

        let inputs = self.nodes.iter().filter(|n| n.kind == NodeKind::Input).count();
        let outputs = self.nodes.iter().filter(|n| n.kind == NodeKind::Output).count();
        if inputs != 2 || outputs != 1 {
            return fail(format!("expected 2 inputs and 1 output, got {inputs}/{outputs}"));
        }
        for id in INPUT_IDS {
            match self.node(id) {
                Some(n) if n.kind == NodeKind::Input => {}
                _ => return fail(format!("node {} must be an input", id.0)),
            }
        }
        match self.node(OUTPUT_ID) {
            Some(n) if n.kind == NodeKind::Output => {}
            _ => return fail(format!("node {} must be the output", OUTPUT_ID.0)),
        }

        let mut enabled_pairs = BTreeSet::new();
        for c in &self.connections {
            let (from, to) = (c.from, c.to);
            let from_node = self
                .node(from)
                .ok_or_else(|| Error::InvalidConfig(format!("dangling from-node {}", from.0)))?;
            let to_node = self
                .node(to)
                .ok_or_else(|| Error::InvalidConfig(format!("dangling to-node {}", to.0)))?;
            if to_node.kind == NodeKind::Input {
                return fail(format!("connection {} feeds an input node", c.innovation.0));
            }
            if from_node.kind == NodeKind::Output {
                return fail(format!("connection {} leaves the output node", c.innovation.0));
            }
            if c.enabled && !enabled_pairs.insert((from, to)) {
                return fail(format!("duplicate enabled edge {} -> {}", from.0, to.0));
            }
        }

        // Rejects cycles among enabled connections.
        topological_order(self)?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("genome serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Genome> {
        let genome: Genome = serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "genome".into(),
            detail: e.to_string(),
        })?;
        genome.validate()?;
        Ok(genome)
    }
}

/// Everything saturates to the largest double below one past this point, so
/// the output range stays strictly inside (-1, 1) for finite input.
const TANH_SATURATION_CUTOFF: f64 = 18.0;
const ONE_BELOW_UNITY: f64 = 1.0 - f64::EPSILON / 2.0;

/// The activation of every hidden and output node:
/// (e^x - e^-x) / (e^x + e^-x), computed as (1 - e^-2x) / (1 + e^-2x) so the
/// exponential never overflows. Odd by construction: negative inputs are
/// routed through the positive branch and negated.
pub fn tanh_activate(x: f64) -> f64 {
    if x.is_sign_negative() {
        return -tanh_activate(-x);
    }
    if x > TANH_SATURATION_CUTOFF {
        return ONE_BELOW_UNITY;
    }
    let e = (-2.0 * x).exp();
    (1.0 - e) / (1.0 + e)
}

/// Kahn's algorithm over the enabled-connection graph. Ties are broken by
/// ascending node id, so the ordering is a pure function of the genome.
pub fn topological_order(genome: &Genome) -> Result<Vec<NodeId>> {
    let ids: Vec<NodeId> = genome.nodes.iter().map(|n| n.id).collect();
    let index_of = |id: NodeId| ids.binary_search(&id).expect("endpoint validated");

    let mut indegree = vec![0usize; ids.len()];
    for c in genome.enabled_connections() {
        indegree[index_of(c.to)] += 1;
    }

    let mut ready: BTreeSet<NodeId> = ids
        .iter()
        .copied()
        .filter(|&id| indegree[index_of(id)] == 0)
        .collect();
    let mut order = Vec::with_capacity(ids.len());

    while let Some(&id) = ready.iter().next() {
        ready.remove(&id);
        order.push(id);
        for c in genome.enabled_connections().filter(|c| c.from == id) {
            let ti = index_of(c.to);
            indegree[ti] -= 1;
            if indegree[ti] == 0 {
                ready.insert(c.to);
            }
        }
    }

    if order.len() != ids.len() {
        return Err(Error::CyclicGenome);
    }
    Ok(order)
}

/// A genome compiled into a flat evaluation plan. Episodes run hundreds of
/// thousands of steps, so the per-call bookkeeping of [`evaluate`] is hoisted
/// out: compile once per episode, then [`CompiledNetwork::run`] allocates
/// nothing. `run` and `evaluate` are bit-identical by construction (same
/// node order, same summation order).
#[derive(Debug, Clone)]
pub struct CompiledNetwork {
    /// Per node in evaluation order: bias and (source slot, weight) pairs,
    /// incoming weights sorted by innovation.
    steps: Vec<(f64, Vec<(usize, f64)>)>,
    kinds: Vec<NodeKind>,
    values: Vec<f64>,
    input_slots: [usize; 2],
    output_slot: usize,
}

impl CompiledNetwork {
    pub fn compile(genome: &Genome) -> Result<CompiledNetwork> {
        let order = topological_order(genome)?;
        let slot_of = |id: NodeId| order.iter().position(|&o| o == id).expect("in order");

        let mut steps = Vec::with_capacity(order.len());
        let mut kinds = Vec::with_capacity(order.len());
        for &id in &order {
            let node = genome.node(id).expect("node exists");
            let mut incoming: Vec<(Innovation, usize, f64)> = genome
                .enabled_connections()
                .filter(|c| c.to == id)
                .map(|c| (c.innovation, slot_of(c.from), c.weight))
                .collect();
            incoming.sort_by_key(|&(innovation, _, _)| innovation);
            steps.push((
                node.bias,
                incoming.into_iter().map(|(_, s, w)| (s, w)).collect(),
            ));
            kinds.push(node.kind);
        }

        let input_slots = [slot_of(INPUT_IDS[0]), slot_of(INPUT_IDS[1])];
        let output_slot = slot_of(OUTPUT_ID);
        let values = vec![0.0; order.len()];
        Ok(CompiledNetwork {
            steps,
            kinds,
            values,
            input_slots,
            output_slot,
        })
    }

    pub fn run(&mut self, inputs: (f64, f64)) -> f64 {
        self.values[self.input_slots[0]] = inputs.0;
        self.values[self.input_slots[1]] = inputs.1;
        for (slot, (bias, incoming)) in self.steps.iter().enumerate() {
            if self.kinds[slot] == NodeKind::Input {
                continue;
            }
            let mut acc = *bias;
            for &(src, weight) in incoming {
                acc += weight * self.values[src];
            }
            self.values[slot] = tanh_activate(acc);
        }
        self.values[self.output_slot]
    }
}

/// Feed the two observation components through the network and return the
/// output node's activation.
///
/// Node values are computed in the topological order of
/// [`topological_order`]; the first input node (lower id) receives
/// `inputs.0`. Each non-input node is `tanh_activate(bias + sum of
/// weight * value(from))` with the incoming terms accumulated in ascending
/// innovation order. Pure: no state survives the call.
pub fn evaluate(genome: &Genome, inputs: (f64, f64)) -> Result<f64> {
    Ok(CompiledNetwork::compile(genome)?.run(inputs))
}

/// Build the rudimentary starting network: the fixed two-input one-output
/// scaffold, each input->output connection present with probability 0.5
/// (redrawn until at least one exists), weights and the output bias drawn
/// uniform in [-1, 1]. Input biases are inert and stay at zero.
pub fn minimal_genome(rng: &mut impl Rng, registry: &mut InnovationRegistry) -> Genome {
    let (first, second) = loop {
        let first = rng.random_bool(0.5);
        let second = rng.random_bool(0.5);
        if first || second {
            break (first, second);
        }
    };

    let mut connections = Vec::new();
    for (present, input) in [(first, INPUT_IDS[0]), (second, INPUT_IDS[1])] {
        if present {
            connections.push(ConnectionGene {
                innovation: registry.connection_innovation(input, OUTPUT_ID),
                from: input,
                to: OUTPUT_ID,
                weight: rng.random_range(-1.0..=1.0),
                enabled: true,
            });
        }
    }

    let nodes = vec![
        NodeGene { id: INPUT_IDS[0], kind: NodeKind::Input, bias: 0.0 },
        NodeGene { id: INPUT_IDS[1], kind: NodeKind::Input, bias: 0.0 },
        NodeGene { id: OUTPUT_ID, kind: NodeKind::Output, bias: rng.random_range(-1.0..=1.0) },
    ];

    let mut genome = Genome { nodes, connections, fitness: 0.0 };
    genome.normalize();
    genome
}

/// Like [`minimal_genome`] but with both input->output connections always
/// present. Selected by the `fully_connected_start` evolution flag.
pub fn fully_connected_genome(rng: &mut impl Rng, registry: &mut InnovationRegistry) -> Genome {
    let connections = INPUT_IDS
        .iter()
        .map(|&input| ConnectionGene {
            innovation: registry.connection_innovation(input, OUTPUT_ID),
            from: input,
            to: OUTPUT_ID,
            weight: rng.random_range(-1.0..=1.0),
            enabled: true,
        })
        .collect();
    let nodes = vec![
        NodeGene { id: INPUT_IDS[0], kind: NodeKind::Input, bias: 0.0 },
        NodeGene { id: INPUT_IDS[1], kind: NodeKind::Input, bias: 0.0 },
        NodeGene { id: OUTPUT_ID, kind: NodeKind::Output, bias: rng.random_range(-1.0..=1.0) },
    ];
    let mut genome = Genome { nodes, connections, fitness: 0.0 };
    genome.normalize();
    genome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn single_connection_genome(weight: f64, bias: f64) -> Genome {
        Genome {
            nodes: vec![
                NodeGene { id: INPUT_IDS[0], kind: NodeKind::Input, bias: 0.0 },
                NodeGene { id: INPUT_IDS[1], kind: NodeKind::Input, bias: 0.0 },
                NodeGene { id: OUTPUT_ID, kind: NodeKind::Output, bias },
            ],
            connections: vec![ConnectionGene {
                innovation: Innovation(0),
                from: INPUT_IDS[0],
                to: OUTPUT_ID,
                weight,
                enabled: true,
            }],
            fitness: 0.0,
        }
    }

    #[test]
    fn tanh_zero_is_zero() {
        assert_eq!(tanh_activate(0.0), 0.0);
    }

    #[test]
    fn tanh_is_odd() {
        for x in [0.5, 1.0, 3.0, 17.9, 250.0] {
            assert_eq!(tanh_activate(-x), -tanh_activate(x), "x = {x}");
        }
    }

    #[test]
    fn tanh_at_one_matches_reference() {
        // (e - 1/e) / (e + 1/e) evaluated independently to 18 digits.
        let reference = 0.761594155955764888;
        assert!((tanh_activate(1.0) - reference).abs() <= 1e-12);
    }

    #[test]
    fn tanh_stays_strictly_inside_unit_interval() {
        for x in [0.0, 1.0, 17.99, 18.01, 100.0, 1e12, f64::MAX] {
            let y = tanh_activate(x);
            assert!(y < 1.0 && y > -1.0, "tanh({x}) = {y}");
            assert!(tanh_activate(-x) > -1.0);
        }
    }

    #[test]
    fn minimal_genome_has_fixed_node_scaffold() {
        let mut rng = seeded_rng(1);
        let mut registry = InnovationRegistry::new();
        for _ in 0..50 {
            let g = minimal_genome(&mut rng, &mut registry);
            let kinds: Vec<NodeKind> = g.nodes.iter().map(|n| n.kind).collect();
            assert_eq!(kinds, vec![NodeKind::Input, NodeKind::Input, NodeKind::Output]);
            assert!(!g.connections.is_empty());
            g.validate().unwrap();
        }
    }

    #[test]
    fn minimal_genomes_differ_across_draws() {
        let mut rng = seeded_rng(2);
        let mut registry = InnovationRegistry::new();
        let a = minimal_genome(&mut rng, &mut registry);
        let b = minimal_genome(&mut rng, &mut registry);
        assert_ne!(a, b);
    }

    #[test]
    fn minimal_genome_connection_rates_match_retry_rule() {
        // Conditional on >= 1 connection, P(both) = 0.25 / 0.75 = 1/3 and
        // P(exactly one) = 2/3.
        let mut rng = seeded_rng(3);
        let mut registry = InnovationRegistry::new();
        let n = 10_000;
        let both = (0..n)
            .filter(|_| minimal_genome(&mut rng, &mut registry).connections.len() == 2)
            .count();
        let frac_both = both as f64 / n as f64;
        assert!((frac_both - 1.0 / 3.0).abs() < 0.02, "frac_both = {frac_both}");
        assert!(((1.0 - frac_both) - 2.0 / 3.0).abs() < 0.02);
    }

    #[test]
    fn evaluate_zero_weight_zero_bias_is_zero() {
        let g = single_connection_genome(0.0, 0.0);
        assert_eq!(evaluate(&g, (0.7, 0.3)).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_traces_single_multiply_accumulate() {
        let g = single_connection_genome(1.0, 0.0);
        assert_eq!(evaluate(&g, (1.0, 0.0)).unwrap(), tanh_activate(1.0));
    }

    #[test]
    fn evaluate_output_strictly_bounded() {
        let mut rng = seeded_rng(4);
        let mut registry = InnovationRegistry::new();
        for _ in 0..200 {
            let g = minimal_genome(&mut rng, &mut registry);
            let inputs = (rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0));
            let y = evaluate(&g, inputs).unwrap();
            assert!(y > -1.0 && y < 1.0);
        }
    }

    #[test]
    fn evaluate_is_deterministic() {
        let mut rng = seeded_rng(5);
        let mut registry = InnovationRegistry::new();
        let g = minimal_genome(&mut rng, &mut registry);
        let a = evaluate(&g, (0.25, 0.75)).unwrap();
        let b = evaluate(&g, (0.25, 0.75)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn evaluate_rejects_cycles() {
        let mut g = single_connection_genome(1.0, 0.0);
        // Hand-built corrupt genome: hidden pair feeding each other.
        g.nodes.push(NodeGene { id: NodeId(3), kind: NodeKind::Hidden, bias: 0.0 });
        g.nodes.push(NodeGene { id: NodeId(4), kind: NodeKind::Hidden, bias: 0.0 });
        g.connections.push(ConnectionGene {
            innovation: Innovation(1),
            from: NodeId(3),
            to: NodeId(4),
            weight: 1.0,
            enabled: true,
        });
        g.connections.push(ConnectionGene {
            innovation: Innovation(2),
            from: NodeId(4),
            to: NodeId(3),
            weight: 1.0,
            enabled: true,
        });
        assert!(matches!(evaluate(&g, (0.0, 0.0)), Err(Error::CyclicGenome)));
    }

    #[test]
    fn topological_order_puts_inputs_before_output() {
        let g = single_connection_genome(1.0, 0.0);
        let order = topological_order(&g).unwrap();
        let pos = |id: NodeId| order.iter().position(|&o| o == id).unwrap();
        assert!(pos(INPUT_IDS[0]) < pos(OUTPUT_ID));
    }

    #[test]
    fn topological_order_places_hidden_between_endpoints() {
        let mut g = single_connection_genome(0.5, 0.0);
        g.connections[0].enabled = false;
        g.nodes.push(NodeGene { id: NodeId(3), kind: NodeKind::Hidden, bias: 0.0 });
        g.connections.push(ConnectionGene {
            innovation: Innovation(7),
            from: INPUT_IDS[0],
            to: NodeId(3),
            weight: 1.0,
            enabled: true,
        });
        g.connections.push(ConnectionGene {
            innovation: Innovation(8),
            from: NodeId(3),
            to: OUTPUT_ID,
            weight: 0.5,
            enabled: true,
        });
        let order = topological_order(&g).unwrap();
        let pos = |id: NodeId| order.iter().position(|&o| o == id).unwrap();
        assert!(pos(INPUT_IDS[0]) < pos(NodeId(3)));
        assert!(pos(NodeId(3)) < pos(OUTPUT_ID));
    }

    #[test]
    fn json_round_trip_preserves_structure() {
        let mut rng = seeded_rng(6);
        let mut registry = InnovationRegistry::new();
        let g = minimal_genome(&mut rng, &mut registry);
        let back = Genome::from_json(&g.to_json()).unwrap();
        assert_eq!(g, back);
    }

    mod properties {
        use super::*;
        use crate::evolution::{mutate, EvolutionConfig};
        use proptest::prelude::*;

        // Genomes as the operators actually produce them: a minimal genome
        // pushed through a random mutation sequence.
        fn evolved_genome(seed: u64, steps: usize) -> Genome {
            let mut rng = seeded_rng(seed);
            let mut registry = InnovationRegistry::new();
            let config = EvolutionConfig::default();
            let mut genome = minimal_genome(&mut rng, &mut registry);
            for _ in 0..steps {
                genome = mutate(&genome, &config, &mut registry, &mut rng);
            }
            genome
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn serialization_round_trips(seed in 0u64..1_000_000, steps in 0usize..25) {
                let genome = evolved_genome(seed, steps);
                let back = Genome::from_json(&genome.to_json()).unwrap();
                prop_assert_eq!(genome, back);
            }

            #[test]
            fn topological_order_respects_every_enabled_edge(
                seed in 0u64..1_000_000,
                steps in 0usize..25,
            ) {
                let genome = evolved_genome(seed, steps);
                let order = topological_order(&genome).unwrap();
                let pos = |id: NodeId| order.iter().position(|&o| o == id).unwrap();
                for c in genome.enabled_connections() {
                    prop_assert!(pos(c.from) < pos(c.to));
                }
            }

            #[test]
            fn evaluate_stays_strictly_inside_unit_interval(
                seed in 0u64..1_000_000,
                steps in 0usize..25,
                x in 0.0f64..=1.0,
                y in 0.0f64..=1.0,
            ) {
                let genome = evolved_genome(seed, steps);
                let out = evaluate(&genome, (x, y)).unwrap();
                prop_assert!(out > -1.0 && out < 1.0);
            }
        }
    }

    #[test]
    fn json_uses_the_documented_field_names() {
        let g = single_connection_genome(0.25, -0.5);
        let value: serde_json::Value = serde_json::from_str(&g.to_json()).unwrap();
        assert!(value.get("nodes").is_some());
        assert!(value.get("connections").is_some());
        assert!(value.get("fitness").is_some());
        let node = &value["nodes"][0];
        for key in ["id", "kind", "bias"] {
            assert!(node.get(key).is_some(), "missing node key {key}");
        }
        let conn = &value["connections"][0];
        for key in ["innovation", "from", "to", "weight", "enabled"] {
            assert!(conn.get(key).is_some(), "missing connection key {key}");
        }
        assert_eq!(value["nodes"][0]["kind"], "Input");
    }
}
