//! Seeded random graphs for property tests and benchmarks.

use crate::cost::SchemaGraph;

/// SplitMix64 generator. Small, fast and fully determined by its seed.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "empty range");
        ((u128::from(self.next_u64()) * n as u128) >> 64) as usize
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// `k` distinct values from `0..n`, sorted.
    pub fn sample(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k.min(n) {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        let mut out = pool[..k.min(n)].to_vec();
        out.sort_unstable();
        out
    }
}

/// A graph plus the terminals to connect.
#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub graph: SchemaGraph,
    pub terminals: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Random spanning tree plus extra edges, weights uniform in `[0, 1]`.
    Uniform,
    /// As `Uniform` with weights rounded to tenths, so ties are common.
    Ties,
    /// A cheap hub joined to every other vertex, expensive edges between
    /// the others; terminals are non-hub vertices.
    Hub,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Uniform, Family::Ties, Family::Hub];

    pub fn name(self) -> &'static str {
        match self {
            Family::Uniform => "uniform",
            Family::Ties => "ties",
            Family::Hub => "hub",
        }
    }
}

pub const MAX_TERMINALS: usize = 5;
const EXTRA_EDGE_P: f64 = 0.4;

pub fn vertex_name(i: usize) -> String {
    format!("t{i:02}")
}

fn round_to(x: f64, step: f64) -> f64 {
    ((x / step).round() * step).clamp(0.0, 1.0)
}

/// Connected graph on `n` vertices: each vertex `i > 0` attaches to a random
/// earlier vertex, then every other pair gets an edge with probability 0.4.
pub fn random_connected_graph(rng: &mut SplitMix64, n: usize, quantize: bool) -> SchemaGraph {
    let step = if quantize { 0.1 } else { 0.001 };
    let names: Vec<String> = (0..n).map(vertex_name).collect();
    let mut adjacent = vec![false; n * n];
    let mut edges = Vec::new();
    for i in 1..n {
        let j = rng.below(i);
        adjacent[i * n + j] = true;
        adjacent[j * n + i] = true;
        edges.push((names[j].clone(), names[i].clone(), round_to(rng.next_f64(), step)));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !adjacent[i * n + j] && rng.chance(EXTRA_EDGE_P) {
                edges.push((names[i].clone(), names[j].clone(), round_to(rng.next_f64(), step)));
            }
        }
    }
    SchemaGraph::from_weighted_edges(names, &edges).expect("generated weights are valid")
}

/// Hub graph: vertex `t00` is the hub with edges in `[0.05, 0.2]` to every
/// other vertex; other pairs get an edge in `[0.5, 1.0]` with probability 0.7.
pub fn hub_graph(rng: &mut SplitMix64, n: usize) -> SchemaGraph {
    let names: Vec<String> = (0..n).map(vertex_name).collect();
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((names[0].clone(), names[i].clone(), round_to(rng.uniform(0.05, 0.2), 0.001)));
    }
    for i in 1..n {
        for j in (i + 1)..n {
            if rng.chance(0.7) {
                edges.push((names[i].clone(), names[j].clone(), round_to(rng.uniform(0.5, 1.0), 0.001)));
            }
        }
    }
    SchemaGraph::from_weighted_edges(names, &edges).expect("generated weights are valid")
}

/// One seeded instance of `family` on `n ≥ 2` vertices.
///
/// Uniform and tie instances draw 1 to 5 terminals. Hub instances use
/// `min(n - 1, 5)` non-hub terminals, so with `n = 4` every non-hub vertex is
/// a terminal.
pub fn instance(family: Family, seed: u64, n: usize) -> Instance {
    assert!(n >= 2, "instances need at least two vertices");
    let mut rng = SplitMix64::new(seed);
    let (graph, terminals) = match family {
        Family::Uniform | Family::Ties => {
            let graph = random_connected_graph(&mut rng, n, family == Family::Ties);
            let k = 1 + rng.below(MAX_TERMINALS.min(n));
            (graph, rng.sample(n, k))
        }
        Family::Hub => {
            let graph = hub_graph(&mut rng, n);
            let k = (n - 1).min(MAX_TERMINALS);
            let terminals = rng.sample(n - 1, k).into_iter().map(|i| i + 1).collect();
            (graph, terminals)
        }
    };
    Instance {
        seed,
        graph,
        terminals: terminals.into_iter().map(vertex_name).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // Reference outputs of SplitMix64 seeded with 1234567.
        let mut rng = SplitMix64::new(1234567);
        assert_eq!(rng.next_u64(), 6457827717110365317);
        assert_eq!(rng.next_u64(), 3203168211198807973);
        assert_eq!(rng.next_u64(), 9817491932198370423);
    }

    #[test]
    fn draws_stay_in_range() {
        let mut rng = SplitMix64::new(7);
        for _ in 0..1000 {
            let x = rng.next_f64();
            assert!((0.0..1.0).contains(&x));
            assert!(rng.below(3) < 3);
        }
        let s = rng.sample(10, 4);
        assert_eq!(s.len(), 4);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn instances_are_reproducible_and_connected() {
        for family in Family::ALL {
            for seed in 0..20 {
                let a = instance(family, seed, 8);
                let b = instance(family, seed, 8);
                assert_eq!(a.graph, b.graph);
                assert_eq!(a.terminals, b.terminals);
                assert!(!a.terminals.is_empty() && a.terminals.len() <= MAX_TERMINALS);
                assert!(a.graph.edges().len() >= 7);
                assert!(a.graph.edges().iter().all(|e| (0.0..=1.0).contains(&e.cost.total)));
            }
        }
    }

    #[test]
    fn hub_instances_on_four_vertices_use_every_spoke() {
        let inst = instance(Family::Hub, 3, 4);
        assert_eq!(inst.terminals, ["t01", "t02", "t03"]);
        for t in &inst.terminals {
            let e = inst.graph.edge_between("t00", t).unwrap();
            assert!((0.05..=0.2).contains(&e.cost.total));
        }
    }
}
