//! Steiner tree planners over a [`SchemaGraph`].
//!
//! [`solve_steiner`] is the KMB 2-approximation: metric closure, MST on the
//! terminals, expansion of closure edges into graph paths, then pruning to a
//! tree. [`exact_steiner_oracle`] enumerates Steiner vertex subsets for small
//! graphs. The two baselines exist for benchmarking.
//!
//! Ties are broken by name everywhere: vertex indices follow name order and
//! edge indices follow `(a, b)` order, so sorting by index is sorting by name.

mod closure;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use closure::{metric_closure, metric_closure_with, MetricClosure};

use crate::cost::{Cost, SchemaGraph};
use crate::par::Execution;
use crate::{Error, Result};

/// Largest graph the exact oracle accepts.
pub const ORACLE_VERTEX_LIMIT: usize = 14;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaffoldEdge {
    pub a: String,
    pub b: String,
    pub cost: Cost,
}

/// A tree in the schema graph spanning a terminal set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteinerScaffold {
    pub terminals: Vec<String>,
    pub vertices: Vec<String>,
    pub edges: Vec<ScaffoldEdge>,
    pub total_cost: Cost,
}

impl SteinerScaffold {
    fn from_indices(graph: &SchemaGraph, terminals: &[usize], vertices: &BTreeSet<usize>, edges: &BTreeSet<usize>) -> Self {
        let names = graph.vertices();
        let edges: Vec<ScaffoldEdge> = edges
            .iter()
            .map(|&k| {
                let e = &graph.edges()[k];
                ScaffoldEdge {
                    a: e.a.clone(),
                    b: e.b.clone(),
                    cost: graph.weight(k),
                }
            })
            .collect();
        SteinerScaffold {
            terminals: terminals.iter().map(|&t| names[t].clone()).collect(),
            vertices: vertices.iter().map(|&v| names[v].clone()).collect(),
            total_cost: edges.iter().map(|e| e.cost).sum(),
            edges,
        }
    }

    pub fn steiner_vertices(&self) -> Vec<&str> {
        self.vertices
            .iter()
            .filter(|v| !self.terminals.contains(v))
            .map(String::as_str)
            .collect()
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        self.edges
            .iter()
            .any(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
    }

    /// Canonical JSON document.
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("scaffold serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::MalformedDocument(format!("scaffold: {e}")))
    }

    /// Structural check against the graph the scaffold came from: every edge
    /// exists with the same weight, the result is a tree spanning the
    /// terminals, and the total is the sum of the edge costs.
    pub fn verify(&self, graph: &SchemaGraph) -> std::result::Result<(), String> {
        let vertices: BTreeSet<&str> = self.vertices.iter().map(String::as_str).collect();
        if vertices.len() != self.vertices.len() {
            return Err("duplicate vertex".into());
        }
        for t in &self.terminals {
            if !vertices.contains(t.as_str()) {
                return Err(format!("terminal {t} not spanned"));
            }
        }
        let index: Vec<usize> = self
            .vertices
            .iter()
            .map(|v| graph.vertex_index(v).ok_or_else(|| format!("unknown vertex {v}")))
            .collect::<std::result::Result<_, _>>()?;
        if self.edges.len() + 1 != self.vertices.len() {
            return Err(format!(
                "{} edges on {} vertices is not a tree",
                self.edges.len(),
                self.vertices.len()
            ));
        }
        let mut uf = UnionFind::new(graph.vertex_count());
        for e in &self.edges {
            if !vertices.contains(e.a.as_str()) || !vertices.contains(e.b.as_str()) {
                return Err(format!("edge {} -- {} leaves the vertex set", e.a, e.b));
            }
            let Some(g) = graph.edge_between(&e.a, &e.b) else {
                return Err(format!("edge {} -- {} is not in the graph", e.a, e.b));
            };
            let k = graph
                .edge_index(graph.vertex_index(&g.a).unwrap(), graph.vertex_index(&g.b).unwrap())
                .unwrap();
            if graph.weight(k) != e.cost {
                return Err(format!("edge {} -- {} has the wrong cost", e.a, e.b));
            }
            if !uf.union(graph.vertex_index(&e.a).unwrap(), graph.vertex_index(&e.b).unwrap()) {
                return Err(format!("edge {} -- {} closes a cycle", e.a, e.b));
            }
        }
        if let Some(&first) = index.first() {
            if index.iter().any(|&v| uf.find(v) != uf.find(first)) {
                return Err("scaffold is disconnected".into());
            }
        }
        let sum: Cost = self.edges.iter().map(|e| e.cost).sum();
        if sum != self.total_cost {
            return Err(format!("total {} differs from edge sum {}", self.total_cost, sum));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins the sets of `a` and `b`; false when already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}

/// Vertices and edges (by index) of a subgraph of a [`SchemaGraph`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Subgraph {
    pub vertices: BTreeSet<usize>,
    pub edges: BTreeSet<usize>,
}

impl Subgraph {
    pub fn cost(&self, graph: &SchemaGraph) -> Cost {
        self.edges.iter().map(|&k| graph.weight(k)).sum()
    }
}

/// Resolves terminal names to sorted, de-duplicated vertex indices.
pub fn resolve_terminals<S: AsRef<str>>(graph: &SchemaGraph, terminals: &[S]) -> Result<Vec<usize>> {
    if terminals.is_empty() {
        return Err(Error::EmptyTerminals);
    }
    let mut out = Vec::with_capacity(terminals.len());
    for t in terminals {
        let name = t.as_ref();
        out.push(
            graph
                .vertex_index(name)
                .ok_or_else(|| Error::UnknownTerminal(name.to_string()))?,
        );
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn disconnected(names: &[String], groups: Vec<Vec<usize>>) -> Error {
    Error::DisconnectedTerminals {
        groups: groups
            .into_iter()
            .map(|g| g.into_iter().map(|t| names[t].clone()).collect())
            .collect(),
    }
}

/// Terminals grouped by connected component, in index order.
fn terminal_groups(terminals: &[usize], same: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &t in terminals {
        match groups.iter_mut().find(|g| same(g[0], t)) {
            Some(g) => g.push(t),
            None => groups.push(vec![t]),
        }
    }
    groups
}

fn require_connected(graph: &SchemaGraph, terminals: &[usize]) -> Result<()> {
    let mut uf = UnionFind::new(graph.vertex_count());
    for k in 0..graph.edges().len() {
        let (i, j) = graph.endpoints(k);
        uf.union(i, j);
    }
    let roots: Vec<usize> = (0..graph.vertex_count()).map(|v| uf.find(v)).collect();
    let groups = terminal_groups(terminals, |a, b| roots[a] == roots[b]);
    if groups.len() > 1 {
        return Err(disconnected(graph.vertices(), groups));
    }
    Ok(())
}

/// Kruskal MST of the complete closure graph on `terminals`. Equal distances
/// are taken in `(i, j)` name order.
pub fn mst_on_terminals(closure: &MetricClosure, terminals: &[usize]) -> Result<Vec<(usize, usize)>> {
    let groups = terminal_groups(terminals, |a, b| closure.is_reachable(a, b));
    if groups.len() > 1 {
        let names: Vec<String> = (0..closure.vertex_count())
            .map(|i| closure.vertex_name(i).to_string())
            .collect();
        return Err(disconnected(&names, groups));
    }
    let mut candidates = Vec::new();
    for (x, &i) in terminals.iter().enumerate() {
        for &j in &terminals[x + 1..] {
            let d = closure.distance(i, j).expect("terminals are mutually reachable");
            candidates.push((d, i, j));
        }
    }
    candidates.sort_unstable();
    let mut uf = UnionFind::new(closure.vertex_count());
    let mut tree = Vec::with_capacity(terminals.len().saturating_sub(1));
    for (_, i, j) in candidates {
        if uf.union(i, j) {
            tree.push((i, j));
        }
    }
    Ok(tree)
}

/// Union of the closure paths behind `mst_edges`. May contain cycles.
pub fn expand_to_paths(graph: &SchemaGraph, closure: &MetricClosure, terminals: &[usize], mst_edges: &[(usize, usize)]) -> Subgraph {
    let mut sub = Subgraph {
        vertices: terminals.iter().copied().collect(),
        edges: BTreeSet::new(),
    };
    for &(i, j) in mst_edges {
        let path = closure.path(i, j).expect("closure edge has a path");
        sub.vertices.extend(path.iter().copied());
        for w in path.windows(2) {
            sub.edges.insert(graph.edge_index(w[0], w[1]).expect("path edge exists"));
        }
    }
    sub
}

/// Breaks every cycle with a Kruskal pass (cheapest first, ties by edge
/// name), keeps the component holding the terminals, then strips non-terminal
/// leaves until none remain.
pub fn prune_to_tree(graph: &SchemaGraph, subgraph: &Subgraph, terminals: &[usize]) -> Result<SteinerScaffold> {
    if terminals.is_empty() {
        return Err(Error::EmptyTerminals);
    }
    if let Some(&t) = terminals.iter().find(|t| !subgraph.vertices.contains(t)) {
        return Err(Error::NotSpanning(format!("terminal {} is absent", graph.vertices()[t])));
    }
    let mut order: Vec<usize> = subgraph.edges.iter().copied().collect();
    order.sort_by_key(|&k| (graph.weight(k), k));
    let mut uf = UnionFind::new(graph.vertex_count());
    let mut kept = BTreeSet::new();
    for k in order {
        let (i, j) = graph.endpoints(k);
        if !subgraph.vertices.contains(&i) || !subgraph.vertices.contains(&j) {
            return Err(Error::NotSpanning(format!(
                "edge {} -- {} leaves the vertex set",
                graph.vertices()[i],
                graph.vertices()[j]
            )));
        }
        if uf.union(i, j) {
            kept.insert(k);
        }
    }
    let root = uf.find(terminals[0]);
    if let Some(&t) = terminals.iter().find(|&&t| uf.find(t) != root) {
        return Err(Error::NotSpanning(format!(
            "terminals {} and {} are not connected",
            graph.vertices()[terminals[0]],
            graph.vertices()[t]
        )));
    }
    let mut vertices: BTreeSet<usize> = subgraph
        .vertices
        .iter()
        .copied()
        .filter(|&v| uf.find(v) == root)
        .collect();
    kept.retain(|&k| vertices.contains(&graph.endpoints(k).0));

    let is_terminal = |v: usize| terminals.binary_search(&v).is_ok();
    loop {
        let mut degree = vec![0usize; graph.vertex_count()];
        for &k in &kept {
            let (i, j) = graph.endpoints(k);
            degree[i] += 1;
            degree[j] += 1;
        }
        let leaves: Vec<usize> = vertices
            .iter()
            .copied()
            .filter(|&v| !is_terminal(v) && degree[v] <= 1)
            .collect();
        if leaves.is_empty() {
            break;
        }
        for v in leaves {
            vertices.remove(&v);
        }
        kept.retain(|&k| {
            let (i, j) = graph.endpoints(k);
            vertices.contains(&i) && vertices.contains(&j)
        });
    }
    Ok(SteinerScaffold::from_indices(graph, terminals, &vertices, &kept))
}

/// KMB solver that computes the metric closure once and reuses it.
#[derive(Debug, Clone)]
pub struct SteinerSolver<'g> {
    graph: &'g SchemaGraph,
    closure: MetricClosure,
}

impl<'g> SteinerSolver<'g> {
    pub fn new(graph: &'g SchemaGraph) -> Self {
        Self::with_execution(graph, Execution::default())
    }

    pub fn with_execution(graph: &'g SchemaGraph, exec: Execution) -> Self {
        SteinerSolver {
            graph,
            closure: metric_closure_with(graph, exec),
        }
    }

    pub fn closure(&self) -> &MetricClosure {
        &self.closure
    }

    pub fn solve<S: AsRef<str>>(&self, terminals: &[S]) -> Result<SteinerScaffold> {
        let terminals = resolve_terminals(self.graph, terminals)?;
        let mst = mst_on_terminals(&self.closure, &terminals)?;
        let sub = expand_to_paths(self.graph, &self.closure, &terminals, &mst);
        prune_to_tree(self.graph, &sub, &terminals)
    }
}

/// KMB 2-approximation of the minimum Steiner tree.
pub fn solve_steiner<S: AsRef<str>>(graph: &SchemaGraph, terminals: &[S]) -> Result<SteinerScaffold> {
    SteinerSolver::new(graph).solve(terminals)
}

pub fn solve_steiner_with<S: AsRef<str>>(graph: &SchemaGraph, terminals: &[S], exec: Execution) -> Result<SteinerScaffold> {
    SteinerSolver::with_execution(graph, exec).solve(terminals)
}

pub fn exact_steiner_oracle<S: AsRef<str>>(graph: &SchemaGraph, terminals: &[S]) -> Result<SteinerScaffold> {
    exact_steiner_oracle_with(graph, terminals, Execution::default())
}

/// Minimum Steiner tree by enumerating every subset of non-terminal vertices
/// and taking the MST of each connected induced subgraph. Among equal costs
/// the lexicographically smallest edge list wins.
pub fn exact_steiner_oracle_with<S: AsRef<str>>(graph: &SchemaGraph, terminals: &[S], exec: Execution) -> Result<SteinerScaffold> {
    let n = graph.vertex_count();
    if n > ORACLE_VERTEX_LIMIT {
        return Err(Error::GraphTooLarge {
            vertices: n,
            limit: ORACLE_VERTEX_LIMIT,
        });
    }
    let terminals = resolve_terminals(graph, terminals)?;
    require_connected(graph, &terminals)?;
    let others: Vec<usize> = (0..n).filter(|v| terminals.binary_search(v).is_err()).collect();
    let mut by_weight: Vec<usize> = (0..graph.edges().len()).collect();
    by_weight.sort_by_key(|&k| (graph.weight(k), k));

    let best = exec.min_by_range(1usize << others.len(), |mask| {
        let mut inside = vec![false; n];
        for &t in &terminals {
            inside[t] = true;
        }
        let mut size = terminals.len();
        for (bit, &v) in others.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                inside[v] = true;
                size += 1;
            }
        }
        let mut uf = UnionFind::new(n);
        let mut tree = Vec::with_capacity(size - 1);
        let mut cost = Cost::ZERO;
        for &k in &by_weight {
            let (i, j) = graph.endpoints(k);
            if inside[i] && inside[j] && uf.union(i, j) {
                tree.push(k);
                cost = cost + graph.weight(k);
            }
        }
        if tree.len() + 1 != size {
            return None;
        }
        tree.sort_unstable();
        Some((cost, tree, mask))
    });
    let (_, tree, mask) = best.expect("terminals are connected, so the full vertex set spans them");
    let mut sub = Subgraph {
        vertices: terminals.iter().copied().collect(),
        edges: tree.into_iter().collect(),
    };
    for (bit, &v) in others.iter().enumerate() {
        if mask & (1 << bit) != 0 {
            sub.vertices.insert(v);
        }
    }
    prune_to_tree(graph, &sub, &terminals)
}

/// Union of shortest paths from the first terminal (by name) to every other
/// terminal, pruned to a tree.
pub fn baseline_shortest_path_combination<S: AsRef<str>>(graph: &SchemaGraph, terminals: &[S]) -> Result<SteinerScaffold> {
    let terminals = resolve_terminals(graph, terminals)?;
    let closure = metric_closure(graph);
    let groups = terminal_groups(&terminals, |a, b| closure.is_reachable(a, b));
    if groups.len() > 1 {
        return Err(disconnected(graph.vertices(), groups));
    }
    let root = terminals[0];
    let star: Vec<(usize, usize)> = terminals[1..].iter().map(|&t| (root, t)).collect();
    let sub = expand_to_paths(graph, &closure, &terminals, &star);
    prune_to_tree(graph, &sub, &terminals)
}

/// MST over the edges whose endpoints are both terminals. Undefined when
/// those edges do not connect the terminals.
pub fn baseline_mst_on_terminal_subgraph<S: AsRef<str>>(graph: &SchemaGraph, terminals: &[S]) -> Result<SteinerScaffold> {
    let terminals = resolve_terminals(graph, terminals)?;
    require_connected(graph, &terminals)?;
    let sub = Subgraph {
        vertices: terminals.iter().copied().collect(),
        edges: (0..graph.edges().len())
            .filter(|&k| {
                let (i, j) = graph.endpoints(k);
                terminals.binary_search(&i).is_ok() && terminals.binary_search(&j).is_ok()
            })
            .collect(),
    };
    prune_to_tree(graph, &sub, &terminals).map_err(|e| match e {
        Error::NotSpanning(msg) => Error::BaselineUndefined(format!("terminal-induced subgraph is disconnected ({msg})")),
        other => other,
    })
}
