use std::collections::BTreeMap;
use std::path::Path;

use rusqlite::{Connection, OpenFlags};

use super::{ColumnDef, DeclaredType, ForeignKey, Schema, TableDef};
use crate::{Error, Result};

pub(crate) fn open_read_only(path: &Path) -> Result<Connection> {
    if !path.is_file() {
        return Err(Error::io(path, "no such file"));
    }
    let conn = Connection::open_with_flags(
        path,
        OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
    )
    .map_err(|e| Error::io(path, e))?;
    // Opening is lazy; touch the header so a non-database file fails here.
    conn.query_row("SELECT count(*) FROM sqlite_master", [], |r| r.get::<_, i64>(0))
        .map_err(|e| Error::io(path, e))?;
    Ok(conn)
}

pub(crate) fn user_tables(conn: &Connection) -> Result<Vec<String>> {
    let mut stmt = conn.prepare(
        "SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY name",
    )?;
    let names = stmt
        .query_map([], |r| r.get::<_, String>(0))?
        .collect::<rusqlite::Result<Vec<_>>>()?;
    Ok(names)
}

pub(crate) fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

/// Reads every user table, its columns and declared foreign keys from a
/// SQLite database opened read-only. Row counts are filled in.
pub fn load_schema_from_database(path: &Path) -> Result<Schema> {
    let conn = open_read_only(path)?;
    let names = user_tables(&conn)?;
    if names.is_empty() {
        return Err(Error::NoUserTables(path.to_path_buf()));
    }

    let mut tables = Vec::with_capacity(names.len());
    let mut pk_columns: BTreeMap<String, Vec<(i64, String)>> = BTreeMap::new();
    for name in &names {
        let mut stmt = conn.prepare("SELECT name, type, pk FROM pragma_table_info(?1) ORDER BY cid")?;
        let columns = stmt
            .query_map([name], |r| {
                Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?, r.get::<_, i64>(2)?))
            })?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        let mut defs = Vec::with_capacity(columns.len());
        for (col, ty, pk) in columns {
            if pk > 0 {
                pk_columns.entry(name.clone()).or_default().push((pk, col.clone()));
            }
            defs.push(ColumnDef::new(col, DeclaredType::from_raw(&ty), pk > 0));
        }
        let rows: i64 = conn.query_row(
            &format!("SELECT count(*) FROM {}", quote_ident(name)),
            [],
            |r| r.get(0),
        )?;
        let mut table = TableDef::new(name.clone(), defs);
        table.row_count = Some(rows.max(0) as u64);
        tables.push(table);
    }
    for cols in pk_columns.values_mut() {
        cols.sort();
    }

    let mut foreign_keys = Vec::new();
    for name in &names {
        let mut stmt = conn.prepare(
            "SELECT \"table\", \"from\", \"to\", seq FROM pragma_foreign_key_list(?1) ORDER BY id, seq",
        )?;
        let rows = stmt
            .query_map([name], |r| {
                Ok((
                    r.get::<_, String>(0)?,
                    r.get::<_, String>(1)?,
                    r.get::<_, Option<String>>(2)?,
                    r.get::<_, i64>(3)?,
                ))
            })?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        for (parent, from, to, seq) in rows {
            // A missing target column means "the parent's primary key".
            let to = match to {
                Some(to) => to,
                None => pk_columns
                    .get(&parent)
                    .and_then(|cols| cols.get(seq as usize))
                    .map(|(_, c)| c.clone())
                    .unwrap_or_default(),
            };
            foreign_keys.push(ForeignKey::new(name.clone(), from, parent, to));
        }
    }

    Schema::new(tables, foreign_keys)
}
