//! Join-scaffold planning for analytical text-to-SQL.
//!
//! The crate turns a relational schema and a set of required ("terminal")
//! tables into a minimum-cost join tree by solving a Steiner tree problem on a
//! weighted schema graph, then checks candidate SQL against that tree.
//!
//! Layout:
//! - [`schema`]: schema model, document and SQLite ingestion, statistics profiling.
//! - [`cost`]: embeddings, column/table similarity, edge costs, the schema graph.
//! - [`steiner`]: metric closure, the KMB approximation, an exact oracle, baselines.
//! - [`decompose`]: question analysis into math entities and terminal tables.
//! - [`sql`]: parser for the supported single-block `SELECT` subset.
//! - [`validate`]: execution, semantic and math-logic validation levels.
//! - [`pipeline`]: prompt assembly, generator clients and the re-planning loop.
//! - [`bench`]: random graph families and planner comparison.

pub mod bench;
pub mod config;
pub mod cost;
pub mod decompose;
mod error;
pub mod par;
pub mod pipeline;
pub mod random;
pub mod schema;
pub mod sql;
pub mod steiner;
pub mod validate;

pub use error::{Error, Result};
