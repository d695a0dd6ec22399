use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("database error: {0}")]
    Database(String),

    #[error("no user tables in {0}")]
    NoUserTables(PathBuf),

    #[error("duplicate table name `{0}`")]
    DuplicateTable(String),

    #[error("duplicate column `{column}` in table `{table}`")]
    DuplicateColumn { table: String, column: String },

    #[error("invalid identifier in {0}: names must be non-empty")]
    EmptyName(String),

    #[error("table `{0}` has no columns")]
    NoColumns(String),

    #[error("dangling foreign key {from_table}.{from_column} -> {to_table}.{to_column}")]
    DanglingForeignKey {
        from_table: String,
        from_column: String,
        to_table: String,
        to_column: String,
    },

    #[error("malformed schema document: {0}")]
    MalformedDocument(String),

    #[error("schema/database mismatch: {0}")]
    SchemaMismatch(String),

    #[error("empty text cannot be embedded")]
    EmptyText,

    #[error("embedding provider: {0}")]
    Embedding(String),

    #[error("invalid cost weights: {0}")]
    InvalidWeights(String),

    #[error("malformed cost table: {0}")]
    MalformedCostTable(String),

    #[error("unknown terminal `{0}`")]
    UnknownTerminal(String),

    #[error("terminal set is empty")]
    EmptyTerminals,

    #[error("disconnected terminals: {}", format_groups(.groups))]
    DisconnectedTerminals { groups: Vec<Vec<String>> },

    #[error("graph too large for the exact oracle: {vertices} vertices (limit {limit})")]
    GraphTooLarge { vertices: usize, limit: usize },

    #[error("subgraph does not span the terminals: {0}")]
    NotSpanning(String),

    #[error("baseline undefined: {0}")]
    BaselineUndefined(String),

    #[error("missing template file {0}")]
    MissingTemplate(PathBuf),

    #[error("question is empty")]
    EmptyQuestion,

    #[error("report has no level-2 or level-3 failure to re-plan from")]
    NothingToReplan,

    #[error("generator: {0}")]
    Generator(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    /// Domain failures (solver or validation outcomes) as opposed to
    /// infrastructure problems such as unreadable files or transport errors.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::DisconnectedTerminals { .. }
                | Error::UnknownTerminal(_)
                | Error::EmptyTerminals
                | Error::BaselineUndefined(_)
                | Error::NotSpanning(_)
                | Error::GraphTooLarge { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }
}

impl From<rusqlite::Error> for Error {
    fn from(err: rusqlite::Error) -> Self {
        Error::Database(err.to_string())
    }
}

fn format_groups(groups: &[Vec<String>]) -> String {
    groups
        .iter()
        .map(|g| format!("{{{}}}", g.join(", ")))
        .collect::<Vec<_>>()
        .join(" | ")
}
