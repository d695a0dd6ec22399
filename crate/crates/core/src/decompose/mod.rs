//! Question analysis: math entities, dependency graph and terminal tables.

mod extract;
mod lexicon;

pub use extract::extract_entities;
pub use lexicon::{Cue, Lexicon};

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::cost::{blend_similarity, SimilarityModel};
use crate::schema::Schema;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Aggregation,
    Comparison,
    Range,
    Grouping,
    Temporal,
    Arithmetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Literal {
    Number(f64),
    String(String),
    Date(String),
    Null,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MathEntity {
    pub kind: EntityKind,
    pub operation: String,
    pub target_attributes: Vec<String>,
    pub literals: Vec<Literal>,
    /// Character range `[start, end)` in the question.
    pub source_span: [usize; 2],
}

impl MathEntity {
    /// Checks that the fields a kind needs are populated. Used on entities
    /// that come from outside the rule-based extractor.
    pub fn validate(&self) -> Result<(), String> {
        if self.operation.trim().is_empty() {
            return Err(format!("{:?} entity has no operation", self.kind));
        }
        match self.kind {
            EntityKind::Comparison | EntityKind::Temporal if self.literals.is_empty() => {
                Err(format!("{} entity needs a literal", self.operation))
            }
            EntityKind::Range if self.literals.len() != 2 => Err("range entity needs two bounds".into()),
            EntityKind::Aggregation | EntityKind::Grouping if self.target_attributes.is_empty() && self.operation != "COUNT" => {
                Err(format!("{} entity has no target attribute", self.operation))
            }
            _ if self.source_span[0] > self.source_span[1] => Err("inverted source span".into()),
            _ => Ok(()),
        }
    }

    /// Comparison, range and temporal entities constrain rows rather than
    /// naming the quantities to compute.
    pub fn is_constraint(&self) -> bool {
        matches!(self.kind, EntityKind::Comparison | EntityKind::Range | EntityKind::Temporal)
    }
}

/// Parses and validates a JSON array of entities, e.g. from a model.
pub fn entities_from_json(text: &str) -> Result<Vec<MathEntity>> {
    let entities: Vec<MathEntity> =
        serde_json::from_str(text).map_err(|e| Error::MalformedDocument(format!("entities: {e}")))?;
    for (i, e) in entities.iter().enumerate() {
        e.validate()
            .map_err(|msg| Error::MalformedDocument(format!("entity {i}: {msg}")))?;
    }
    Ok(entities)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalReason {
    DirectReference,
    JoinPath,
    Constraint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terminal {
    pub table: String,
    pub reason: TerminalReason,
}

/// Terminal tables in name order, each with the reason it was first added.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TerminalSet(Vec<Terminal>);

impl TerminalSet {
    pub fn new() -> Self {
        TerminalSet::default()
    }

    /// Adds `table`; an existing entry keeps its reason. Returns whether the
    /// table was new.
    pub fn insert(&mut self, table: &str, reason: TerminalReason) -> bool {
        match self.0.binary_search_by(|t| t.table.as_str().cmp(table)) {
            Ok(_) => false,
            Err(pos) => {
                self.0.insert(
                    pos,
                    Terminal {
                        table: table.to_string(),
                        reason,
                    },
                );
                true
            }
        }
    }

    pub fn contains(&self, table: &str) -> bool {
        self.0.binary_search_by(|t| t.table.as_str().cmp(table)).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Terminal> {
        self.0.iter()
    }

    pub fn tables(&self) -> Vec<String> {
        self.0.iter().map(|t| t.table.clone()).collect()
    }

    pub fn from_tables<S: AsRef<str>>(tables: &[S], reason: TerminalReason) -> Self {
        let mut set = TerminalSet::new();
        for t in tables {
            set.insert(t.as_ref(), reason);
        }
        set
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DependencyKind {
    AttributeFlow,
    JoinDependency,
    Constraint,
}

/// Edge between dependency nodes. Entity nodes are `entity:<index>`, table
/// nodes `table:<name>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DependencyEdge {
    pub from: String,
    pub to: String,
    pub kind: DependencyKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<DependencyEdge>,
}

impl DependencyGraph {
    fn add_node(&mut self, node: String) {
        if let Err(pos) = self.nodes.binary_search(&node) {
            self.nodes.insert(pos, node);
        }
    }

    fn add_edge(&mut self, from: String, to: String, kind: DependencyKind) {
        self.add_node(from.clone());
        self.add_node(to.clone());
        let edge = DependencyEdge { from, to, kind };
        if let Err(pos) = self.edges.binary_search(&edge) {
            self.edges.insert(pos, edge);
        }
    }
}

fn entity_node(i: usize) -> String {
    format!("entity:{i}")
}

fn table_node(t: &str) -> String {
    format!("table:{t}")
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: String,
    /// `None` when the phrase named the table itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeMatch {
    pub phrase: String,
    pub columns: Vec<ColumnRef>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContainingTables {
    pub tables: Vec<String>,
    pub matches: Vec<AttributeMatch>,
    pub unmatched: Vec<String>,
}

/// Lower-case alphanumerics only, so `product revenue`, `productRevenue`
/// and `product_revenue` compare equal.
pub fn normalize_name(text: &str) -> String {
    text.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

const SCORE_TIE: f64 = 1e-12;

/// Columns matching one attribute phrase.
///
/// Normalized-name equality with a column wins; then equality with a table
/// name (allowing a plural `s` on either side); then the columns with the
/// highest blended similarity against a synthetic column named after the
/// phrase, provided it clears `tau`. The synthetic column takes each
/// candidate's type, so the type term always counts.
pub fn match_attribute(phrase: &str, schema: &Schema, model: &SimilarityModel) -> Result<Vec<ColumnRef>> {
    let norm = normalize_name(phrase);
    if norm.is_empty() {
        return Ok(Vec::new());
    }
    let mut exact = Vec::new();
    for t in schema.tables() {
        for c in &t.columns {
            if normalize_name(&c.name) == norm {
                exact.push(ColumnRef {
                    table: t.name.clone(),
                    column: Some(c.name.clone()),
                });
            }
        }
    }
    if !exact.is_empty() {
        return Ok(exact);
    }
    for t in schema.tables() {
        let tn = normalize_name(&t.name);
        if tn == norm || tn == format!("{norm}s") || norm == format!("{tn}s") {
            exact.push(ColumnRef {
                table: t.name.clone(),
                column: None,
            });
        }
    }
    if !exact.is_empty() {
        return Ok(exact);
    }
    let weights = model.weights();
    let mut best = f64::NEG_INFINITY;
    let mut out = Vec::new();
    for t in schema.tables() {
        for c in &t.columns {
            let s = blend_similarity(model.name_cosine(phrase, &c.name)?, true, weights.sim_alpha);
            let r = ColumnRef {
                table: t.name.clone(),
                column: Some(c.name.clone()),
            };
            if s > best + SCORE_TIE {
                best = s;
                out = vec![r];
            } else if (s - best).abs() <= SCORE_TIE {
                out.push(r);
            }
        }
    }
    if weights.admits(best) {
        out.sort();
        Ok(out)
    } else {
        Ok(Vec::new())
    }
}

/// Owning tables of every phrase, with per-phrase matches and the phrases
/// that matched nothing.
pub fn find_containing_tables<S: AsRef<str>>(attributes: &[S], schema: &Schema, model: &SimilarityModel) -> Result<ContainingTables> {
    let mut out = ContainingTables::default();
    let mut tables = BTreeSet::new();
    for a in attributes {
        let phrase = a.as_ref();
        let columns = match_attribute(phrase, schema, model)?;
        if columns.is_empty() {
            if !out.unmatched.iter().any(|u| u == phrase) {
                out.unmatched.push(phrase.to_string());
            }
        } else {
            tables.extend(columns.iter().map(|c| c.table.clone()));
        }
        out.matches.push(AttributeMatch {
            phrase: phrase.to_string(),
            columns,
        });
    }
    out.tables = tables.into_iter().collect();
    Ok(out)
}

/// Shortest path between two tables over FK links only; among equal
/// lengths the path visiting smaller names first.
pub fn fk_path(schema: &Schema, from: &str, to: &str) -> Option<Vec<String>> {
    let adj = schema.fk_adjacency();
    if from == to {
        return Some(vec![from.to_string()]);
    }
    let mut dist: BTreeMap<&str, usize> = BTreeMap::from([(to, 0)]);
    let mut queue = VecDeque::from([to]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u];
        for &w in adj.get(u).into_iter().flatten() {
            if !dist.contains_key(w) {
                dist.insert(w, d + 1);
                queue.push_back(w);
            }
        }
    }
    let mut remaining = *dist.get(from)?;
    let mut path = vec![from.to_string()];
    let mut u = from;
    while remaining > 0 {
        remaining -= 1;
        u = adj[u]
            .iter()
            .copied()
            .find(|w| dist.get(w) == Some(&remaining))
            .expect("a neighbor one step closer exists");
        path.push(u.to_string());
    }
    Some(path)
}

/// Stage-1 output document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub question: String,
    pub entities: Vec<MathEntity>,
    pub terminals: TerminalSet,
    pub unmatched: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub attribute_matches: Vec<AttributeMatch>,
    pub dependencies: DependencyGraph,
}

impl Decomposition {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("decomposition serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: Decomposition =
            serde_json::from_str(text).map_err(|e| Error::MalformedDocument(format!("plan: {e}")))?;
        for (i, e) in d.entities.iter().enumerate() {
            e.validate()
                .map_err(|msg| Error::MalformedDocument(format!("plan entity {i}: {msg}")))?;
        }
        Ok(d)
    }

    /// Columns matched for `phrase`, if it was looked up.
    pub fn columns_for(&self, phrase: &str) -> Option<&[ColumnRef]> {
        self.attribute_matches
            .iter()
            .find(|m| m.phrase == phrase)
            .map(|m| m.columns.as_slice())
    }
}

/// Builds the dependency graph and terminal set in three steps:
///
/// 1. tables owning the targets of non-constraint entities become
///    direct-reference terminals;
/// 2. for every table pair that needs a join (one entity touches both, or a
///    grouping key and an aggregation target sit in different tables) the
///    shortest FK path is added, interior tables as join-path terminals;
/// 3. tables owning the targets of constraint entities become constraint
///    terminals.
///
/// A table keeps the reason of the first step that added it.
pub fn analyze_dependencies(question: &str, entities: &[MathEntity], schema: &Schema, model: &SimilarityModel) -> Result<Decomposition> {
    let phrases: Vec<String> = entities
        .iter()
        .flat_map(|e| e.target_attributes.iter().cloned())
        .collect();
    let found = find_containing_tables(&phrases, schema, model)?;
    let tables_of = |e: &MathEntity| -> BTreeSet<String> {
        e.target_attributes
            .iter()
            .flat_map(|p| {
                found
                    .matches
                    .iter()
                    .find(|m| &m.phrase == p)
                    .into_iter()
                    .flat_map(|m| m.columns.iter().map(|c| c.table.clone()))
            })
            .collect()
    };
    let entity_tables: Vec<BTreeSet<String>> = entities.iter().map(tables_of).collect();

    let mut graph = DependencyGraph::default();
    let mut terminals = TerminalSet::new();
    let mut warnings = Vec::new();
    for i in 0..entities.len() {
        graph.add_node(entity_node(i));
    }

    for (i, e) in entities.iter().enumerate() {
        if e.is_constraint() {
            continue;
        }
        for t in &entity_tables[i] {
            terminals.insert(t, TerminalReason::DirectReference);
            graph.add_edge(entity_node(i), table_node(t), DependencyKind::AttributeFlow);
        }
    }

    let mut join_pairs: BTreeSet<(String, String)> = BTreeSet::new();
    let mut add_pair = |a: &str, b: &str| {
        if a != b {
            let pair = if a < b { (a, b) } else { (b, a) };
            join_pairs.insert((pair.0.to_string(), pair.1.to_string()));
        }
    };
    for ts in &entity_tables {
        let list: Vec<&String> = ts.iter().collect();
        for (x, a) in list.iter().enumerate() {
            for b in &list[x + 1..] {
                add_pair(a, b);
            }
        }
    }
    for (gi, g) in entities.iter().enumerate() {
        if g.kind != EntityKind::Grouping {
            continue;
        }
        for (ai, a) in entities.iter().enumerate() {
            if a.kind != EntityKind::Aggregation {
                continue;
            }
            for tg in &entity_tables[gi] {
                for ta in &entity_tables[ai] {
                    add_pair(tg, ta);
                }
            }
        }
    }
    for (a, b) in &join_pairs {
        match fk_path(schema, a, b) {
            Some(path) => {
                for w in path.windows(2) {
                    graph.add_edge(table_node(&w[0]), table_node(&w[1]), DependencyKind::JoinDependency);
                }
                for t in &path[1..path.len() - 1] {
                    terminals.insert(t, TerminalReason::JoinPath);
                }
            }
            None => warnings.push(format!("no foreign-key path between {a} and {b}")),
        }
    }

    for (i, e) in entities.iter().enumerate() {
        if !e.is_constraint() {
            continue;
        }
        for t in &entity_tables[i] {
            terminals.insert(t, TerminalReason::Constraint);
            graph.add_edge(entity_node(i), table_node(t), DependencyKind::Constraint);
        }
    }

    if terminals.is_empty() && !entities.is_empty() {
        warnings.push("question has math entities but no terminal tables".into());
    }
    Ok(Decomposition {
        question: question.to_string(),
        entities: entities.to_vec(),
        terminals,
        unmatched: found.unmatched,
        warnings,
        attribute_matches: found.matches,
        dependencies: graph,
    })
}

/// Extraction plus dependency analysis.
pub fn decompose(question: &str, schema: &Schema, model: &SimilarityModel, lexicon: &Lexicon) -> Result<Decomposition> {
    if question.trim().is_empty() {
        return Err(Error::EmptyQuestion);
    }
    let entities = extract_entities(question, lexicon);
    analyze_dependencies(question, &entities, schema, model)
}
