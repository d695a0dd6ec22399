//! Edge costs for the schema graph.
//!
//! Every admitted table pair gets three dissimilarities in `[0, 1]`:
//!
//! - connection: `w1·[no FK] + w2·(1 − sim_name) + w3·(1 − sim_type)`;
//! - semantic: `1 − cos(e_a, e_b)` where a table's embedding is the mean of
//!   its name's and its columns' embeddings;
//! - statistical: `w4·(1 − selectivity) + w5·(1 − correlation)`;
//!
//! and the edge weight is `alpha·connection + beta·semantic + gamma·statistical`.
//! Cosines are clamped to `[0, 1]` before use.

mod embedding;
mod graph;
mod units;

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::schema::{ColumnDef, JoinPair, Schema, StatsProfile, TableDef};
use crate::{Error, Result};

pub use embedding::{
    split_words, trigrams, Embedding, EmbeddingProvider, HttpEmbedder, LookupEmbedder,
    TrigramEmbedder, DEFAULT_DIMENSION, EMBEDDING_TOKEN_ENV, EMBEDDING_URL_ENV,
};
pub use graph::{
    build_schema_graph, build_schema_graph_with, CostTable, GraphEdge, GraphOptions, SchemaGraph,
};
pub use units::Cost;

/// Slack applied to the `s >= tau` admission test so values that equal the
/// threshold up to float rounding are admitted.
pub const ADMISSION_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub w5: f64,
    pub sim_alpha: f64,
    pub tau: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            alpha: 0.4,
            beta: 0.4,
            gamma: 0.2,
            w1: 1.0 / 3.0,
            w2: 1.0 / 3.0,
            w3: 1.0 / 3.0,
            w4: 0.5,
            w5: 0.5,
            sim_alpha: 0.85,
            tau: 0.75,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("w1", self.w1),
            ("w2", self.w2),
            ("w3", self.w3),
            ("w4", self.w4),
            ("w5", self.w5),
            ("sim_alpha", self.sim_alpha),
            ("tau", self.tau),
        ];
        for (name, v) in named {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidWeights(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        let sums = [
            ("alpha + beta + gamma", self.alpha + self.beta + self.gamma),
            ("w1 + w2 + w3", self.w1 + self.w2 + self.w3),
            ("w4 + w5", self.w4 + self.w5),
        ];
        for (name, s) in sums {
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidWeights(format!("{name} = {s}, expected 1")));
            }
        }
        Ok(())
    }

    pub fn combine(&self, connect: f64, semantic: f64, statistical: f64) -> f64 {
        self.alpha * connect + self.beta * semantic + self.gamma * statistical
    }

    pub fn admits(&self, similarity: f64) -> bool {
        similarity + ADMISSION_EPSILON >= self.tau
    }
}

/// Per-edge cost breakdown.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeCost {
    pub connect: f64,
    pub semantic: f64,
    pub statistical: f64,
    pub total: f64,
    pub has_fk: bool,
    pub best_column_pair: (String, String),
    /// Set when the cost was pinned by an explicit cost table.
    pub overridden: bool,
}

impl EdgeCost {
    pub fn from_components(
        weights: &CostWeights,
        connect: f64,
        semantic: f64,
        statistical: f64,
        has_fk: bool,
        best_column_pair: (String, String),
    ) -> Self {
        EdgeCost {
            connect,
            semantic,
            statistical,
            total: weights.combine(connect, semantic, statistical),
            has_fk,
            best_column_pair,
            overridden: false,
        }
    }

    /// A pinned cost. Every component equals `total`, so the convex
    /// combination still reproduces it.
    pub fn pinned(total: f64, has_fk: bool, best_column_pair: (String, String)) -> Self {
        EdgeCost {
            connect: total,
            semantic: total,
            statistical: total,
            total,
            has_fk,
            best_column_pair,
            overridden: true,
        }
    }
}

pub fn clamp_cosine(cos: f64) -> f64 {
    if cos.is_nan() {
        0.0
    } else {
        cos.clamp(0.0, 1.0)
    }
}

/// `sim_alpha·cos + (1 − sim_alpha)·type_match` with the cosine clamped.
pub fn blend_similarity(cosine: f64, type_match: bool, sim_alpha: f64) -> f64 {
    sim_alpha * clamp_cosine(cosine) + (1.0 - sim_alpha) * if type_match { 1.0 } else { 0.0 }
}

pub fn connection_cost_from(has_fk: bool, sim_name: f64, sim_type: f64, weights: &CostWeights) -> f64 {
    let no_fk = if has_fk { 0.0 } else { 1.0 };
    weights.w1 * no_fk + weights.w2 * (1.0 - sim_name) + weights.w3 * (1.0 - sim_type)
}

pub fn statistical_cost_from(selectivity: f64, correlation: f64, weights: &CostWeights) -> f64 {
    weights.w4 * (1.0 - selectivity) + weights.w5 * (1.0 - correlation)
}

/// Best column pair between two tables.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSimilarity {
    /// Maximum blended similarity over the column cross product.
    pub score: f64,
    /// Column pair achieving `score`; ties go to the lexicographically first pair.
    pub best_pair: (String, String),
    /// Maximum clamped name cosine over column pairs.
    pub sim_name: f64,
    /// 1 when the name-argmax pair type-matches, else the best type-match
    /// indicator over all pairs.
    pub sim_type: f64,
}

/// Embedding-backed similarity with a name cache. Names are embedded once
/// and shared across threads.
pub struct SimilarityModel<'a> {
    provider: &'a dyn EmbeddingProvider,
    weights: CostWeights,
    cache: RwLock<HashMap<String, Arc<Embedding>>>,
}

impl<'a> SimilarityModel<'a> {
    pub fn new(provider: &'a dyn EmbeddingProvider, weights: CostWeights) -> Self {
        SimilarityModel {
            provider,
            weights,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn weights(&self) -> &CostWeights {
        &self.weights
    }

    /// Embeds every table and column name of `schema` in one batch.
    pub fn prime(&self, schema: &Schema) -> Result<()> {
        let mut texts: Vec<String> = Vec::new();
        {
            let cache = self.cache.read().expect("embedding cache poisoned");
            for table in schema.tables() {
                for name in std::iter::once(&table.name).chain(table.columns.iter().map(|c| &c.name)) {
                    if !cache.contains_key(name) && !texts.contains(name) {
                        texts.push(name.clone());
                    }
                }
            }
        }
        if texts.is_empty() {
            return Ok(());
        }
        let vectors = self.provider.embed_batch(&texts)?;
        let mut cache = self.cache.write().expect("embedding cache poisoned");
        for (t, v) in texts.into_iter().zip(vectors) {
            cache.insert(t, Arc::new(v));
        }
        Ok(())
    }

    pub fn embed(&self, text: &str) -> Result<Arc<Embedding>> {
        if let Some(v) = self.cache.read().expect("embedding cache poisoned").get(text) {
            return Ok(Arc::clone(v));
        }
        let v = Arc::new(self.provider.embed(text)?);
        self.cache
            .write()
            .expect("embedding cache poisoned")
            .insert(text.to_string(), Arc::clone(&v));
        Ok(v)
    }

    /// Clamped cosine between the embeddings of two texts.
    pub fn name_cosine(&self, a: &str, b: &str) -> Result<f64> {
        Ok(clamp_cosine(self.embed(a)?.cosine(&*self.embed(b)?)))
    }

    pub fn column_pair_similarity(&self, ci: &ColumnDef, cj: &ColumnDef) -> Result<f64> {
        let cos = self.name_cosine(&ci.name, &cj.name)?;
        Ok(blend_similarity(
            cos,
            ci.declared_type == cj.declared_type,
            self.weights.sim_alpha,
        ))
    }

    pub fn table_similarity(&self, ti: &TableDef, tj: &TableDef) -> Result<TableSimilarity> {
        let mut ci_sorted: Vec<&ColumnDef> = ti.columns.iter().collect();
        let mut cj_sorted: Vec<&ColumnDef> = tj.columns.iter().collect();
        ci_sorted.sort_by(|a, b| a.name.cmp(&b.name));
        cj_sorted.sort_by(|a, b| a.name.cmp(&b.name));

        let mut best: Option<(f64, &ColumnDef, &ColumnDef)> = None;
        let mut best_name: Option<(f64, bool)> = None;
        let mut any_type_match = false;
        for ci in &ci_sorted {
            for cj in &cj_sorted {
                let cos = self.name_cosine(&ci.name, &cj.name)?;
                let type_match = ci.declared_type == cj.declared_type;
                let s = blend_similarity(cos, type_match, self.weights.sim_alpha);
                any_type_match |= type_match;
                if best.is_none_or(|(b, _, _)| s > b) {
                    best = Some((s, ci, cj));
                }
                if best_name.is_none_or(|(b, _)| cos > b) {
                    best_name = Some((cos, type_match));
                }
            }
        }
        let (score, ci, cj) = best.expect("tables have at least one column");
        let (sim_name, argmax_matches) = best_name.expect("tables have at least one column");
        let sim_type = if argmax_matches || any_type_match { 1.0 } else { 0.0 };
        Ok(TableSimilarity {
            score,
            best_pair: (ci.name.clone(), cj.name.clone()),
            sim_name,
            sim_type,
        })
    }

    pub fn table_embedding(&self, table: &TableDef) -> Result<Embedding> {
        let mut parts = vec![self.embed(&table.name)?];
        for c in &table.columns {
            parts.push(self.embed(&c.name)?);
        }
        Ok(Embedding::mean(parts.iter().map(|a| a.as_ref())).expect("at least the table name"))
    }

    pub fn semantic_cost(&self, ti: &TableDef, tj: &TableDef) -> Result<f64> {
        let ei = self.table_embedding(ti)?;
        let ej = self.table_embedding(tj)?;
        Ok(1.0 - clamp_cosine(ei.cosine(&ej)))
    }

    pub fn connection_cost(&self, ti: &TableDef, tj: &TableDef, schema: &Schema) -> Result<f64> {
        let sim = self.table_similarity(ti, tj)?;
        Ok(connection_cost_from(
            schema.has_fk_between(&ti.name, &tj.name),
            sim.sim_name,
            sim.sim_type,
            &self.weights,
        ))
    }
}

pub fn statistical_cost(a: &str, b: &str, stats: Option<&StatsProfile>, weights: &CostWeights) -> f64 {
    let pair = stats.map(|s| s.pair(a, b)).unwrap_or(crate::schema::PairStats::NEUTRAL);
    statistical_cost_from(pair.selectivity, pair.correlation, weights)
}

/// Join pairs the graph builder would admit, one per table pair: the first
/// FK (in canonical order) when one exists, otherwise the best column pair
/// when its similarity clears `tau`.
pub fn candidate_join_pairs(
    schema: &Schema,
    weights: &CostWeights,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<JoinPair>> {
    let model = SimilarityModel::new(provider, *weights);
    model.prime(schema)?;
    let tables = schema.tables();
    let mut pairs = Vec::new();
    for (i, ti) in tables.iter().enumerate() {
        for tj in &tables[i + 1..] {
            if let Some(fk) = schema.fks_between(&ti.name, &tj.name).next() {
                pairs.push(JoinPair::new(&fk.from_table, &fk.from_column, &fk.to_table, &fk.to_column));
                continue;
            }
            let sim = model.table_similarity(ti, tj)?;
            if weights.admits(sim.score) {
                pairs.push(JoinPair::new(&ti.name, &sim.best_pair.0, &tj.name, &sim.best_pair.1));
            }
        }
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{DeclaredType, ForeignKey};
    use approx::assert_abs_diff_eq;

    fn col(name: &str, ty: DeclaredType) -> ColumnDef {
        ColumnDef::new(name, ty, false)
    }

    #[test]
    fn default_weights_are_valid() {
        let w = CostWeights::default();
        w.validate().unwrap();
        assert_eq!((w.alpha, w.beta, w.gamma), (0.4, 0.4, 0.2));
        assert_eq!((w.sim_alpha, w.tau), (0.85, 0.75));
        assert_eq!((w.w4, w.w5), (0.5, 0.5));
    }

    #[test]
    fn invalid_weights_are_rejected() {
        for w in [
            CostWeights { gamma: 0.3, ..CostWeights::default() },
            CostWeights { w4: 0.6, ..CostWeights::default() },
            CostWeights { tau: 1.5, ..CostWeights::default() },
        ] {
            assert!(w.validate().is_err());
        }
    }

    #[test]
    fn blended_similarity_examples() {
        assert_abs_diff_eq!(blend_similarity(1.0, true, 0.85), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(blend_similarity(0.8, false, 0.85), 0.68, epsilon = 1e-12);
        assert_abs_diff_eq!(blend_similarity(0.0, true, 0.85), 0.15, epsilon = 1e-12);
        assert_abs_diff_eq!(blend_similarity(-0.4, false, 0.85), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn connection_cost_examples() {
        let w = CostWeights::default();
        assert_abs_diff_eq!(connection_cost_from(true, 1.0, 1.0, &w), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(connection_cost_from(false, 0.0, 0.0, &w), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(connection_cost_from(true, 0.7, 1.0, &w), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn statistical_cost_examples() {
        let w = CostWeights::default();
        assert_abs_diff_eq!(statistical_cost_from(1.0, 1.0, &w), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(statistical_cost_from(0.0, 0.0, &w), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(statistical_cost_from(0.6, 0.2, &w), 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(statistical_cost("a", "b", None, &w), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn identical_column_gives_unit_table_similarity() {
        let provider = TrigramEmbedder::default();
        let model = SimilarityModel::new(&provider, CostWeights::default());
        let a = TableDef::new(
            "orders",
            vec![col("customer_id", DeclaredType::Integer), col("total", DeclaredType::Real)],
        );
        let b = TableDef::new(
            "customers",
            vec![col("customer_id", DeclaredType::Integer), col("name", DeclaredType::Text)],
        );
        let sim = model.table_similarity(&a, &b).unwrap();
        assert_abs_diff_eq!(sim.score, 1.0, epsilon = 1e-12);
        assert_eq!(sim.best_pair, ("customer_id".to_string(), "customer_id".to_string()));
        assert_eq!(sim.sim_type, 1.0);
    }

    #[test]
    fn table_similarity_is_max_over_grid() {
        // 2x2 grid with exact cosines from a lookup provider.
        let mut provider = LookupEmbedder::new(2);
        provider
            .insert("a1", vec![1.0, 0.0])
            .insert("a2", vec![0.0, 1.0])
            .insert("b1", vec![0.6, 0.8])
            .insert("b2", vec![0.8, 0.6]);
        let model = SimilarityModel::new(&provider, CostWeights::default());
        let a = TableDef::new("a", vec![col("a1", DeclaredType::Integer), col("a2", DeclaredType::Text)]);
        let b = TableDef::new("b", vec![col("b1", DeclaredType::Text), col("b2", DeclaredType::Integer)]);
        // Brute force: (a1,b1)=.85*.6, (a1,b2)=.85*.8+.15, (a2,b1)=.85*.8+.15, (a2,b2)=.85*.6
        let grid = [0.85 * 0.6, 0.85 * 0.8 + 0.15, 0.85 * 0.8 + 0.15, 0.85 * 0.6];
        let expected = grid.iter().cloned().fold(f64::MIN, f64::max);
        let sim = model.table_similarity(&a, &b).unwrap();
        assert_abs_diff_eq!(sim.score, expected, epsilon = 1e-12);
        // Tie between (a1,b2) and (a2,b1): lexicographic first wins.
        assert_eq!(sim.best_pair, ("a1".to_string(), "b2".to_string()));
        assert_abs_diff_eq!(sim.sim_name, 0.8, epsilon = 1e-12);

        let single_a = TableDef::new("x", vec![col("a1", DeclaredType::Integer)]);
        let single_b = TableDef::new("y", vec![col("b1", DeclaredType::Integer)]);
        let s = model.table_similarity(&single_a, &single_b).unwrap().score;
        let direct = model
            .column_pair_similarity(&single_a.columns[0], &single_b.columns[0])
            .unwrap();
        assert_eq!(s, direct);
    }

    #[test]
    fn semantic_cost_matches_mean_then_cosine() {
        let provider = TrigramEmbedder::default();
        let model = SimilarityModel::new(&provider, CostWeights::default());
        let a = TableDef::new("orders", vec![col("order_id", DeclaredType::Integer), col("amount", DeclaredType::Real)]);
        let b = TableDef::new("payments", vec![col("order_id", DeclaredType::Integer), col("paid_at", DeclaredType::Date)]);
        assert_abs_diff_eq!(model.semantic_cost(&a, &a).unwrap(), 0.0, epsilon = 1e-12);
        let ab = model.semantic_cost(&a, &b).unwrap();
        assert_eq!(ab, model.semantic_cost(&b, &a).unwrap());

        // Standalone oracle: average the raw vectors by hand, then cosine.
        let avg = |names: &[&str]| {
            let mut acc = vec![0.0; DEFAULT_DIMENSION];
            for n in names {
                for (s, x) in acc.iter_mut().zip(provider.embed(n).unwrap().values()) {
                    *s += x / names.len() as f64;
                }
            }
            acc
        };
        let va = avg(&["orders", "order_id", "amount"]);
        let vb = avg(&["payments", "order_id", "paid_at"]);
        let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        let na = va.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert_abs_diff_eq!(ab, 1.0 - dot / (na * nb), epsilon = 1e-12);
    }

    #[test]
    fn connection_cost_for_fk_tables_with_shared_column() {
        let provider = TrigramEmbedder::default();
        let model = SimilarityModel::new(&provider, CostWeights::default());
        let schema = Schema::new(
            vec![
                TableDef::new("customers", vec![ColumnDef::new("customer_id", DeclaredType::Integer, true)]),
                TableDef::new("orders", vec![col("customer_id", DeclaredType::Integer)]),
            ],
            vec![ForeignKey::new("orders", "customer_id", "customers", "customer_id")],
        )
        .unwrap();
        let c = model
            .connection_cost(schema.table("customers").unwrap(), schema.table("orders").unwrap(), &schema)
            .unwrap();
        assert_abs_diff_eq!(c, 0.0, epsilon = 1e-12);
    }
}
