//! Planner comparison over seeded random graph families.

use std::fmt::Write as _;

use serde::Serialize;

use crate::cost::Cost;
use crate::par::Execution;
use crate::random::{instance, Family};
use crate::steiner::{
    baseline_mst_on_terminal_subgraph, baseline_shortest_path_combination, exact_steiner_oracle_with,
    solve_steiner_with, SteinerScaffold, ORACLE_VERTEX_LIMIT,
};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Planner {
    Kmb,
    ShortestPathCombination,
    MstOnTerminals,
    Exact,
}

impl Planner {
    pub const ALL: [Planner; 4] = [
        Planner::Kmb,
        Planner::ShortestPathCombination,
        Planner::MstOnTerminals,
        Planner::Exact,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Planner::Kmb => "kmb",
            Planner::ShortestPathCombination => "shortest-path-combination",
            Planner::MstOnTerminals => "mst-on-terminals",
            Planner::Exact => "exact",
        }
    }
}

/// Outcome of every planner on one seeded instance.
#[derive(Debug, Clone, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    /// `None` when the planner failed or was skipped.
    pub costs: [Option<Cost>; 4],
}

impl SeedResult {
    pub fn cost(&self, p: Planner) -> Option<Cost> {
        self.costs[p as usize]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PlannerSummary {
    pub planner: Planner,
    pub runs: usize,
    pub failures: usize,
    pub mean_cost: Option<f64>,
    /// Cost relative to the exact oracle, over seeds where both succeeded.
    pub mean_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyReport {
    pub family: &'static str,
    pub nodes: usize,
    pub seeds: Vec<SeedResult>,
    pub summary: Vec<PlannerSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub first_seed: u64,
    pub seed_count: u64,
    pub nodes: usize,
    pub families: Vec<FamilyReport>,
}

fn run_planner(p: Planner, graph: &crate::cost::SchemaGraph, terminals: &[String]) -> Result<SteinerScaffold> {
    // Seeds already fan out across workers; planners run sequentially inside.
    let exec = Execution::Sequential;
    match p {
        Planner::Kmb => solve_steiner_with(graph, terminals, exec),
        Planner::ShortestPathCombination => baseline_shortest_path_combination(graph, terminals),
        Planner::MstOnTerminals => baseline_mst_on_terminal_subgraph(graph, terminals),
        Planner::Exact => exact_steiner_oracle_with(graph, terminals, exec),
    }
}

pub fn run_seed(family: Family, seed: u64, nodes: usize) -> SeedResult {
    let inst = instance(family, seed, nodes);
    let mut costs = [None; 4];
    for p in Planner::ALL {
        if p == Planner::Exact && nodes > ORACLE_VERTEX_LIMIT {
            continue;
        }
        costs[p as usize] = run_planner(p, &inst.graph, &inst.terminals).ok().map(|s| s.total_cost);
    }
    SeedResult { seed, costs }
}

fn summarize(p: Planner, seeds: &[SeedResult]) -> PlannerSummary {
    let costs: Vec<Cost> = seeds.iter().filter_map(|s| s.cost(p)).collect();
    let ratios: Vec<f64> = seeds
        .iter()
        .filter_map(|s| Some(s.cost(p)?.ratio(s.cost(Planner::Exact)?)))
        .collect();
    let mean = |xs: &[f64]| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    let cost_values: Vec<f64> = costs.iter().map(|c| c.to_f64()).collect();
    PlannerSummary {
        planner: p,
        runs: seeds.len(),
        failures: seeds.len() - costs.len(),
        mean_cost: mean(&cost_values),
        mean_ratio: mean(&ratios),
        max_ratio: ratios.iter().copied().reduce(f64::max),
    }
}

/// Runs every planner on seeds `first_seed..first_seed + count` of each
/// family. Results are ordered by seed regardless of `exec`.
pub fn run_bench(first_seed: u64, count: u64, nodes: usize, exec: Execution) -> BenchReport {
    let seeds: Vec<u64> = (first_seed..first_seed + count).collect();
    let families = Family::ALL
        .iter()
        .map(|&family| {
            let results = exec.map(&seeds, |&seed| run_seed(family, seed, nodes));
            let summary = Planner::ALL.iter().map(|&p| summarize(p, &results)).collect();
            FamilyReport {
                family: family.name(),
                nodes,
                seeds: results,
                summary,
            }
        })
        .collect();
    BenchReport {
        first_seed,
        seed_count: count,
        nodes,
        families,
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

impl BenchReport {
    /// Plain-text comparison table, one block per family.
    pub fn table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "seeds {}..{} (splitmix64), {} vertices",
            self.first_seed,
            self.first_seed + self.seed_count,
            self.nodes
        )
        .unwrap();
        for fam in &self.families {
            writeln!(out, "\nfamily {}", fam.family).unwrap();
            writeln!(
                out,
                "{:<26} {:>10} {:>10} {:>10} {:>9}",
                "planner", "mean cost", "mean ratio", "max ratio", "failures"
            )
            .unwrap();
            for s in &fam.summary {
                writeln!(
                    out,
                    "{:<26} {:>10} {:>10} {:>10} {:>4}/{:<4}",
                    s.planner.label(),
                    opt(s.mean_cost),
                    opt(s.mean_ratio),
                    opt(s.max_ratio),
                    s.failures,
                    s.runs
                )
                .unwrap();
            }
        }
        out
    }
}
