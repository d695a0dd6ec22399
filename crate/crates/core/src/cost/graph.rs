use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    connection_cost_from, statistical_cost, Cost, CostWeights, EdgeCost, SimilarityModel,
};
use crate::par::Execution;
use crate::schema::{Schema, StatsProfile};
use crate::{Error, Result};

/// Undirected edge with `a < b` by name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphEdge {
    pub a: String,
    pub b: String,
    pub cost: EdgeCost,
}

/// Weighted undirected schema graph. Vertices are sorted by name and edges
/// by `(a, b)`; there are no self-loops or parallel edges.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaGraph {
    vertices: Vec<String>,
    edges: Vec<GraphEdge>,
    weights: Vec<Cost>,
    endpoints: Vec<(usize, usize)>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl SchemaGraph {
    fn assemble(vertices: BTreeSet<String>, mut edges: Vec<GraphEdge>) -> Result<Self> {
        let vertices: Vec<String> = vertices.into_iter().collect();
        let index: BTreeMap<&str, usize> = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i))
            .collect();
        edges.sort_by(|x, y| (&x.a, &x.b).cmp(&(&y.a, &y.b)));
        let mut adjacency = vec![Vec::new(); vertices.len()];
        let mut weights = Vec::with_capacity(edges.len());
        let mut endpoints = Vec::with_capacity(edges.len());
        for (k, e) in edges.iter().enumerate() {
            if e.a == e.b {
                return Err(Error::MalformedCostTable(format!("self-loop on `{}`", e.a)));
            }
            if k > 0 && edges[k - 1].a == e.a && edges[k - 1].b == e.b {
                return Err(Error::MalformedCostTable(format!(
                    "parallel edge {} -- {}",
                    e.a, e.b
                )));
            }
            let (Some(&i), Some(&j)) = (index.get(e.a.as_str()), index.get(e.b.as_str())) else {
                return Err(Error::MalformedCostTable(format!(
                    "edge {} -- {} names an unknown vertex",
                    e.a, e.b
                )));
            };
            let w = Cost::from_f64(e.cost.total).ok_or_else(|| {
                Error::MalformedCostTable(format!("edge {} -- {} has invalid cost {}", e.a, e.b, e.cost.total))
            })?;
            adjacency[i].push((j, k));
            adjacency[j].push((i, k));
            weights.push(w);
            endpoints.push((i, j));
        }
        for list in &mut adjacency {
            list.sort();
        }
        Ok(SchemaGraph {
            vertices,
            edges,
            weights,
            endpoints,
            adjacency,
        })
    }

    /// A graph from explicit non-negative weights. Every cost component is
    /// set to the weight.
    pub fn from_weighted_edges<S: AsRef<str>>(
        vertices: impl IntoIterator<Item = S>,
        edges: &[(S, S, f64)],
    ) -> Result<Self> {
        let mut names: BTreeSet<String> = vertices.into_iter().map(|v| v.as_ref().to_string()).collect();
        let mut out = Vec::with_capacity(edges.len());
        for (a, b, w) in edges {
            check_cost(a.as_ref(), b.as_ref(), *w)?;
            let (a, b) = ordered(a.as_ref(), b.as_ref());
            names.insert(a.clone());
            names.insert(b.clone());
            out.push(GraphEdge {
                a,
                b,
                cost: EdgeCost::pinned(*w, false, (String::new(), String::new())),
            });
        }
        SchemaGraph::assemble(names, out)
    }

    pub fn from_cost_table(table: &CostTable) -> Result<Self> {
        let edges: Vec<(&str, &str, f64)> = table
            .edges
            .iter()
            .map(|((a, b), w)| (a.as_str(), b.as_str(), *w))
            .collect();
        SchemaGraph::from_weighted_edges(table.vertices.iter().map(String::as_str), &edges)
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.vertices.binary_search_by(|v| v.as_str().cmp(name)).ok()
    }

    /// Solver weight of edge `k`.
    pub fn weight(&self, k: usize) -> Cost {
        self.weights[k]
    }

    /// Vertex indices `(i, j)` of edge `k`, `i < j`.
    pub fn endpoints(&self, k: usize) -> (usize, usize) {
        self.endpoints[k]
    }

    /// `(neighbor, edge index)` pairs of vertex `i`, sorted by neighbor.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        self.adjacency[i]
            .binary_search_by(|(n, _)| n.cmp(&j))
            .ok()
            .map(|p| self.adjacency[i][p].1)
    }

    pub fn edge_between(&self, a: &str, b: &str) -> Option<&GraphEdge> {
        let i = self.vertex_index(a)?;
        let j = self.vertex_index(b)?;
        self.edge_index(i, j).map(|k| &self.edges[k])
    }

    /// Canonical text export. One line per vertex, then one per edge with
    /// its total and component costs.
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "# schema graph: {} vertices, {} edges",
            self.vertices.len(),
            self.edges.len()
        )
        .unwrap();
        for v in &self.vertices {
            writeln!(out, "vertex {v}").unwrap();
        }
        for (k, e) in self.edges.iter().enumerate() {
            let c = &e.cost;
            write!(
                out,
                "edge {} {} total={} connect={:.6} semantic={:.6} statistical={:.6} fk={}",
                e.a,
                e.b,
                self.weights[k],
                c.connect,
                c.semantic,
                c.statistical,
                if c.has_fk { "yes" } else { "no" },
            )
            .unwrap();
            if !c.best_column_pair.0.is_empty() {
                write!(out, " pair={}:{}", c.best_column_pair.0, c.best_column_pair.1).unwrap();
            }
            if c.overridden {
                out.push_str(" pinned");
            }
            out.push('\n');
        }
        out
    }

    /// Aligned per-edge component table.
    pub fn cost_breakdown(&self) -> String {
        let width = self
            .edges
            .iter()
            .map(|e| e.a.len() + e.b.len() + 4)
            .max()
            .unwrap_or(4)
            .max(4);
        let mut out = String::new();
        writeln!(
            out,
            "{:<width$}  {:>14}  {:>9}  {:>9}  {:>11}  fk",
            "edge", "total", "connect", "semantic", "statistical"
        )
        .unwrap();
        for (k, e) in self.edges.iter().enumerate() {
            let c = &e.cost;
            writeln!(
                out,
                "{:<width$}  {:>14}  {:>9.6}  {:>9.6}  {:>11.6}  {}",
                format!("{} -- {}", e.a, e.b),
                self.weights[k].to_string(),
                c.connect,
                c.semantic,
                c.statistical,
                if c.has_fk { "yes" } else { "no" },
            )
            .unwrap();
        }
        out
    }
}

fn check_cost(a: &str, b: &str, w: f64) -> Result<()> {
    if !w.is_finite() || w < 0.0 {
        return Err(Error::MalformedCostTable(format!(
            "cost of {a} -- {b} must be finite and non-negative, got {w}"
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostTableDoc {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    vertices: Vec<String>,
    edges: Vec<CostEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostEntry {
    a: String,
    b: String,
    cost: f64,
}

/// Explicit edge costs: `{"vertices": [...], "edges": [{"a", "b", "cost"}]}`.
///
/// As a graph-builder override, every listed edge is forced into the graph
/// with that total. As standalone graph input, it is the whole graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostTable {
    pub vertices: BTreeSet<String>,
    pub edges: BTreeMap<(String, String), f64>,
}

impl CostTable {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: CostTableDoc =
            serde_json::from_str(text).map_err(|e| Error::MalformedCostTable(e.to_string()))?;
        let mut table = CostTable {
            vertices: doc.vertices.into_iter().collect(),
            edges: BTreeMap::new(),
        };
        for entry in doc.edges {
            table.insert(&entry.a, &entry.b, entry.cost)?;
        }
        Ok(table)
    }

    pub fn insert(&mut self, a: &str, b: &str, cost: f64) -> Result<()> {
        if a == b {
            return Err(Error::MalformedCostTable(format!("self-loop on `{a}`")));
        }
        check_cost(a, b, cost)?;
        if self.edges.insert(ordered(a, b), cost).is_some() {
            return Err(Error::MalformedCostTable(format!("duplicate edge {a} -- {b}")));
        }
        Ok(())
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        self.edges.get(&ordered(a, b)).copied()
    }

    pub fn to_json(&self) -> String {
        let doc = CostTableDoc {
            vertices: self.vertices.iter().cloned().collect(),
            edges: self
                .edges
                .iter()
                .map(|((a, b), c)| CostEntry {
                    a: a.clone(),
                    b: b.clone(),
                    cost: *c,
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("cost table serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Default)]
pub struct GraphOptions {
    /// Pinned edge costs.
    pub overrides: Option<CostTable>,
    /// Table pairs whose edge must be left out (re-planning feedback).
    pub excluded: BTreeSet<(String, String)>,
}

impl GraphOptions {
    pub fn exclude(&mut self, a: &str, b: &str) {
        self.excluded.insert(ordered(a, b));
    }

    pub fn is_excluded(&self, a: &str, b: &str) -> bool {
        self.excluded.contains(&ordered(a, b))
    }
}

pub fn build_schema_graph(
    schema: &Schema,
    stats: Option<&StatsProfile>,
    model: &SimilarityModel<'_>,
    options: &GraphOptions,
) -> Result<SchemaGraph> {
    build_schema_graph_with(schema, stats, model, options, Execution::default())
}

/// Builds the schema graph: an edge joins two tables when a foreign key links
/// them or their best column-pair similarity reaches `tau`. Pinned costs in
/// `options.overrides` force their edge in; exclusions remove edges.
pub fn build_schema_graph_with(
    schema: &Schema,
    stats: Option<&StatsProfile>,
    model: &SimilarityModel<'_>,
    options: &GraphOptions,
    exec: Execution,
) -> Result<SchemaGraph> {
    let weights: &CostWeights = model.weights();
    weights.validate()?;
    if let Some(table) = &options.overrides {
        for ((a, b), cost) in &table.edges {
            if !(0.0..=1.0).contains(cost) {
                return Err(Error::MalformedCostTable(format!(
                    "pinned cost of {a} -- {b} must lie in [0, 1], got {cost}"
                )));
            }
            for t in [a, b] {
                if schema.table(t).is_none() {
                    return Err(Error::MalformedCostTable(format!(
                        "pinned edge {a} -- {b} names unknown table `{t}`"
                    )));
                }
            }
        }
    }
    model.prime(schema)?;

    let tables = schema.tables();
    let pairs: Vec<(usize, usize)> = (0..tables.len())
        .flat_map(|i| (i + 1..tables.len()).map(move |j| (i, j)))
        .collect();

    let results = exec.map(&pairs, |&(i, j)| -> Result<Option<GraphEdge>> {
        let (ti, tj) = (&tables[i], &tables[j]);
        if options.is_excluded(&ti.name, &tj.name) {
            return Ok(None);
        }
        let fk = schema.fks_between(&ti.name, &tj.name).next();
        let sim = model.table_similarity(ti, tj)?;
        let column_pair = match fk {
            Some(fk) if fk.from_table == ti.name => (fk.from_column.clone(), fk.to_column.clone()),
            Some(fk) => (fk.to_column.clone(), fk.from_column.clone()),
            None => sim.best_pair.clone(),
        };
        let pinned = options
            .overrides
            .as_ref()
            .and_then(|t| t.get(&ti.name, &tj.name));
        let cost = match pinned {
            Some(total) => EdgeCost::pinned(total, fk.is_some(), column_pair),
            None if fk.is_some() || weights.admits(sim.score) => {
                let connect = connection_cost_from(fk.is_some(), sim.sim_name, sim.sim_type, weights);
                let semantic = model.semantic_cost(ti, tj)?;
                let statistical = statistical_cost(&ti.name, &tj.name, stats, weights);
                EdgeCost::from_components(weights, connect, semantic, statistical, fk.is_some(), column_pair)
            }
            None => return Ok(None),
        };
        Ok(Some(GraphEdge {
            a: ti.name.clone(),
            b: tj.name.clone(),
            cost,
        }))
    });

    let mut edges = Vec::new();
    for r in results {
        if let Some(e) = r? {
            edges.push(e);
        }
    }
    SchemaGraph::assemble(schema.table_names().map(String::from).collect(), edges)
}
