use crate::cost::{Cost, SchemaGraph};
use crate::par::Execution;

const INF: u64 = u64::MAX;

/// All-pairs shortest paths over a schema graph.
///
/// Among minimum-cost paths the one with the fewest edges wins, and among
/// those the lexicographically smallest vertex sequence. Vertices are indexed
/// in name order, so index order and name order coincide.
#[derive(Debug, Clone)]
pub struct MetricClosure {
    n: usize,
    names: Vec<String>,
    dist: Vec<u64>,
    hops: Vec<u32>,
    next: Vec<usize>,
}

impl MetricClosure {
    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn vertex_name(&self, i: usize) -> &str {
        &self.names[i]
    }

    /// Shortest distance, `None` when `j` is unreachable from `i`.
    pub fn distance(&self, i: usize, j: usize) -> Option<Cost> {
        let d = self.dist[i * self.n + j];
        (d != INF).then(|| Cost::from_units(d))
    }

    pub fn is_reachable(&self, i: usize, j: usize) -> bool {
        self.dist[i * self.n + j] != INF
    }

    /// Number of edges on the chosen shortest path.
    pub fn hop_count(&self, i: usize, j: usize) -> Option<u32> {
        self.is_reachable(i, j).then(|| self.hops[i * self.n + j])
    }

    /// Vertex sequence of the chosen shortest path from `i` to `j`.
    pub fn path(&self, i: usize, j: usize) -> Option<Vec<usize>> {
        if !self.is_reachable(i, j) {
            return None;
        }
        let mut path = vec![i];
        let mut u = i;
        while u != j {
            u = self.next[u * self.n + j];
            path.push(u);
        }
        Some(path)
    }
}

pub fn metric_closure(graph: &SchemaGraph) -> MetricClosure {
    metric_closure_with(graph, Execution::default())
}

/// Floyd–Warshall over `(cost, hops)` pairs, then a next-hop table that picks
/// the smallest-index neighbor on an optimal path. `O(|V|^3)`.
///
/// Each `k` phase may update rows in parallel: row `k` is read-only during
/// its own phase, so a copy of it is all the rows share.
pub fn metric_closure_with(graph: &SchemaGraph, exec: Execution) -> MetricClosure {
    let n = graph.vertex_count();
    let mut dist = vec![INF; n * n];
    let mut hops = vec![0u32; n * n];
    for i in 0..n {
        dist[i * n + i] = 0;
    }
    for k in 0..graph.edges().len() {
        let (i, j) = graph.endpoints(k);
        let w = graph.weight(k).units();
        dist[i * n + j] = w;
        dist[j * n + i] = w;
        hops[i * n + j] = 1;
        hops[j * n + i] = 1;
    }

    // Interleave so a row of the combined matrix carries both keys.
    let mut cells: Vec<(u64, u32)> = dist.iter().copied().zip(hops.iter().copied()).collect();
    for k in 0..n {
        let row_k: Vec<(u64, u32)> = cells[k * n..(k + 1) * n].to_vec();
        exec.for_each_row(&mut cells, n, |_, row| {
            let (dik, hik) = row[k];
            if dik == INF {
                return;
            }
            for (cell, &(dkj, hkj)) in row.iter_mut().zip(&row_k) {
                if dkj == INF {
                    continue;
                }
                let candidate = (dik + dkj, hik + hkj);
                if candidate < *cell {
                    *cell = candidate;
                }
            }
        });
    }
    for (idx, &(d, h)) in cells.iter().enumerate() {
        dist[idx] = d;
        hops[idx] = h;
    }

    let mut next = vec![usize::MAX; n * n];
    exec.for_each_row(&mut next, n, |u, row| {
        for (v, slot) in row.iter_mut().enumerate() {
            let duv = dist[u * n + v];
            if u == v || duv == INF {
                continue;
            }
            for &(w, k) in graph.neighbors(u) {
                let dwv = dist[w * n + v];
                if dwv == INF {
                    continue;
                }
                if graph.weight(k).units() + dwv == duv && 1 + hops[w * n + v] == hops[u * n + v] {
                    *slot = w;
                    break;
                }
            }
        }
    });

    MetricClosure {
        n,
        names: graph.vertices().to_vec(),
        dist,
        hops,
        next,
    }
}
