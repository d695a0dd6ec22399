//! Relational schema model and its ingestion paths.
//!
//! A [`Schema`] is validated on construction: table names are unique, every
//! table has at least one uniquely-named column, and every foreign key
//! endpoint resolves. Tables are kept sorted by name and columns by column
//! name, so two schemas describing the same database compare equal no matter
//! which order their source listed things in.

mod document;
mod profile;
pub(crate) mod sqlite;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use document::{load_schema_from_document, serialize_schema};
pub use profile::{
    profile_statistics, profile_statistics_for_pairs, ColumnProfile, JoinPair, PairStats,
    StatsProfile, DEFAULT_SAMPLE_LIMIT, NEUTRAL_STAT,
};
pub use sqlite::load_schema_from_database;

/// Declared column type after normalization.
///
/// Raw database type strings are mapped case-insensitively, ignoring any
/// parenthesized size arguments (`VARCHAR(40)` is `VARCHAR`):
///
/// | raw type names                                                        | declared  |
/// |-----------------------------------------------------------------------|-----------|
/// | `INT`, `INTEGER`, `TINYINT`, `SMALLINT`, `MEDIUMINT`, `BIGINT`, `INT2`, `INT4`, `INT8`, `INT64`, `UNSIGNED BIG INT`, `SERIAL`, `BIGSERIAL` | integer |
/// | `REAL`, `DOUBLE`, `DOUBLE PRECISION`, `FLOAT`, `FLOAT4`, `FLOAT8`, `FLOAT64`, `NUMERIC`, `DECIMAL`, `NUMBER` | real |
/// | `TEXT`, `CHAR`, `VARCHAR`, `NCHAR`, `NVARCHAR`, `CHARACTER`, `VARYING CHARACTER`, `NATIVE CHARACTER`, `CHARACTER VARYING`, `CLOB`, `STRING` | text |
/// | `BLOB`, `BYTES`, `BINARY`, `VARBINARY`, `BYTEA`                        | blob      |
/// | `BOOL`, `BOOLEAN`                                                     | boolean   |
/// | `DATE`                                                                | date      |
/// | `DATETIME`, `TIMESTAMP`, `TIMESTAMPTZ`, `TIMESTAMP WITH TIME ZONE`, `TIMESTAMP WITHOUT TIME ZONE` | timestamp |
/// | anything else, including the empty string                             | other     |
///
/// The canonical lower-case names in the right column map to themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeclaredType {
    Integer,
    Real,
    Text,
    Blob,
    Boolean,
    Date,
    Timestamp,
    Other,
}

impl DeclaredType {
    pub fn from_raw(raw: &str) -> Self {
        let base = raw.split('(').next().unwrap_or("");
        let normalized = base
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_ascii_uppercase();
        match normalized.as_str() {
            "INT" | "INTEGER" | "TINYINT" | "SMALLINT" | "MEDIUMINT" | "BIGINT" | "INT2"
            | "INT4" | "INT8" | "INT64" | "UNSIGNED BIG INT" | "SERIAL" | "BIGSERIAL" => {
                DeclaredType::Integer
            }
            "REAL" | "DOUBLE" | "DOUBLE PRECISION" | "FLOAT" | "FLOAT4" | "FLOAT8" | "FLOAT64"
            | "NUMERIC" | "DECIMAL" | "NUMBER" => DeclaredType::Real,
            "TEXT" | "CHAR" | "VARCHAR" | "NCHAR" | "NVARCHAR" | "CHARACTER"
            | "VARYING CHARACTER" | "NATIVE CHARACTER" | "CHARACTER VARYING" | "CLOB"
            | "STRING" => DeclaredType::Text,
            "BLOB" | "BYTES" | "BINARY" | "VARBINARY" | "BYTEA" => DeclaredType::Blob,
            "BOOL" | "BOOLEAN" => DeclaredType::Boolean,
            "DATE" => DeclaredType::Date,
            "DATETIME" | "TIMESTAMP" | "TIMESTAMPTZ" | "TIMESTAMP WITH TIME ZONE"
            | "TIMESTAMP WITHOUT TIME ZONE" => DeclaredType::Timestamp,
            _ => DeclaredType::Other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DeclaredType::Integer => "integer",
            DeclaredType::Real => "real",
            DeclaredType::Text => "text",
            DeclaredType::Blob => "blob",
            DeclaredType::Boolean => "boolean",
            DeclaredType::Date => "date",
            DeclaredType::Timestamp => "timestamp",
            DeclaredType::Other => "other",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(
            self,
            DeclaredType::Integer | DeclaredType::Real | DeclaredType::Boolean
        )
    }
}

impl fmt::Display for DeclaredType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDef {
    pub name: String,
    pub declared_type: DeclaredType,
    pub is_primary_key: bool,
}

impl ColumnDef {
    pub fn new(name: impl Into<String>, declared_type: DeclaredType, is_primary_key: bool) -> Self {
        ColumnDef {
            name: name.into(),
            declared_type,
            is_primary_key,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableDef {
    pub name: String,
    pub columns: Vec<ColumnDef>,
    pub row_count: Option<u64>,
}

impl TableDef {
    pub fn new(name: impl Into<String>, columns: Vec<ColumnDef>) -> Self {
        TableDef {
            name: name.into(),
            columns,
            row_count: None,
        }
    }

    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Case-insensitive column lookup, as SQL engines resolve identifiers.
    pub fn column_ci(&self, name: &str) -> Option<&ColumnDef> {
        self.columns
            .iter()
            .find(|c| c.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ForeignKey {
    pub from_table: String,
    pub from_column: String,
    pub to_table: String,
    pub to_column: String,
}

impl ForeignKey {
    pub fn new(
        from_table: impl Into<String>,
        from_column: impl Into<String>,
        to_table: impl Into<String>,
        to_column: impl Into<String>,
    ) -> Self {
        ForeignKey {
            from_table: from_table.into(),
            from_column: from_column.into(),
            to_table: to_table.into(),
            to_column: to_column.into(),
        }
    }

    /// True when this key links `a` and `b` in either direction.
    pub fn links(&self, a: &str, b: &str) -> bool {
        (self.from_table == a && self.to_table == b) || (self.from_table == b && self.to_table == a)
    }
}

/// Immutable, validated schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    tables: Vec<TableDef>,
    foreign_keys: Vec<ForeignKey>,
}

impl Schema {
    pub fn new(mut tables: Vec<TableDef>, mut foreign_keys: Vec<ForeignKey>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for table in &mut tables {
            if table.name.is_empty() {
                return Err(Error::EmptyName("table name".into()));
            }
            if !seen.insert(table.name.clone()) {
                return Err(Error::DuplicateTable(table.name.clone()));
            }
            if table.columns.is_empty() {
                return Err(Error::NoColumns(table.name.clone()));
            }
            let mut cols = BTreeSet::new();
            for column in &table.columns {
                if column.name.is_empty() {
                    return Err(Error::EmptyName(format!("table `{}`", table.name)));
                }
                if !cols.insert(column.name.as_str()) {
                    return Err(Error::DuplicateColumn {
                        table: table.name.clone(),
                        column: column.name.clone(),
                    });
                }
            }
            table.columns.sort_by(|a, b| a.name.cmp(&b.name));
        }
        tables.sort_by(|a, b| a.name.cmp(&b.name));

        let schema = Schema {
            tables,
            foreign_keys: Vec::new(),
        };
        for fk in &foreign_keys {
            let resolves = |t: &str, c: &str| schema.table(t).is_some_and(|t| t.column(c).is_some());
            if !resolves(&fk.from_table, &fk.from_column) || !resolves(&fk.to_table, &fk.to_column)
            {
                return Err(Error::DanglingForeignKey {
                    from_table: fk.from_table.clone(),
                    from_column: fk.from_column.clone(),
                    to_table: fk.to_table.clone(),
                    to_column: fk.to_column.clone(),
                });
            }
        }
        foreign_keys.sort();
        foreign_keys.dedup();
        Ok(Schema {
            foreign_keys,
            ..schema
        })
    }

    pub fn tables(&self) -> &[TableDef] {
        &self.tables
    }

    pub fn foreign_keys(&self) -> &[ForeignKey] {
        &self.foreign_keys
    }

    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.tables
            .binary_search_by(|t| t.name.as_str().cmp(name))
            .ok()
            .map(|i| &self.tables[i])
    }

    /// Case-insensitive table lookup.
    pub fn table_ci(&self, name: &str) -> Option<&TableDef> {
        self.table(name).or_else(|| {
            self.tables
                .iter()
                .find(|t| t.name.eq_ignore_ascii_case(name))
        })
    }

    pub fn table_names(&self) -> impl Iterator<Item = &str> {
        self.tables.iter().map(|t| t.name.as_str())
    }

    pub fn has_fk_between(&self, a: &str, b: &str) -> bool {
        self.foreign_keys.iter().any(|fk| fk.links(a, b))
    }

    /// Foreign keys between `a` and `b` in either direction.
    pub fn fks_between<'a>(&'a self, a: &'a str, b: &'a str) -> impl Iterator<Item = &'a ForeignKey> {
        self.foreign_keys.iter().filter(move |fk| fk.links(a, b))
    }

    /// Undirected FK adjacency, neighbors sorted by name.
    pub fn fk_adjacency(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut adj: BTreeMap<&str, BTreeSet<&str>> =
            self.tables.iter().map(|t| (t.name.as_str(), BTreeSet::new())).collect();
        for fk in &self.foreign_keys {
            if fk.from_table != fk.to_table {
                adj.entry(fk.from_table.as_str())
                    .or_default()
                    .insert(fk.to_table.as_str());
                adj.entry(fk.to_table.as_str())
                    .or_default()
                    .insert(fk.from_table.as_str());
            }
        }
        adj
    }

    /// Returns a copy with `row_count` filled in for the named tables.
    pub fn with_row_counts(mut self, counts: &BTreeMap<String, u64>) -> Self {
        for table in &mut self.tables {
            if let Some(&n) = counts.get(&table.name) {
                table.row_count = Some(n);
            }
        }
        self
    }
}

/// Loads a schema from either a SQLite database file or a schema document,
/// sniffing the SQLite file header.
pub fn load_schema(path: &Path) -> Result<Schema> {
    if is_sqlite_file(path)? {
        load_schema_from_database(path)
    } else {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        load_schema_from_document(&bytes)
    }
}

pub fn is_sqlite_file(path: &Path) -> Result<bool> {
    use std::io::Read;
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = [0u8; 16];
    match file.read_exact(&mut header) {
        Ok(()) => Ok(&header == b"SQLite format 3\0"),
        Err(_) => Ok(false),
    }
}
