//! JSON schema document.
//!
//! ```json
//! {
//!   "tables": [
//!     { "name": "customers", "columns": [ { "name": "id", "type": "integer", "pk": true } ] }
//!   ],
//!   "foreign_keys": [
//!     { "from_table": "orders", "from_column": "customer_id", "to_table": "customers", "to_column": "id" }
//!   ]
//! }
//! ```
//!
//! `type` accepts any raw type string (mapped through [`DeclaredType::from_raw`]);
//! `pk` and `row_count` are optional. The canonical form sorts tables, columns
//! and foreign keys, writes canonical type names, and uses two-space indents
//! with a trailing newline.

use serde::{Deserialize, Serialize};

use super::{ColumnDef, DeclaredType, ForeignKey, Schema, TableDef};
use crate::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaDoc {
    tables: Vec<TableDoc>,
    #[serde(default)]
    foreign_keys: Vec<ForeignKey>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDoc {
    name: String,
    columns: Vec<ColumnDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    row_count: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ColumnDoc {
    name: String,
    #[serde(rename = "type", default)]
    ty: String,
    #[serde(default)]
    pk: bool,
}

pub fn load_schema_from_document(bytes: &[u8]) -> Result<Schema> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::MalformedDocument(format!("not UTF-8: {e}")))?;
    let doc: SchemaDoc =
        serde_json::from_str(text).map_err(|e| Error::MalformedDocument(e.to_string()))?;
    let tables = doc
        .tables
        .into_iter()
        .map(|t| TableDef {
            name: t.name,
            columns: t
                .columns
                .into_iter()
                .map(|c| ColumnDef::new(c.name, DeclaredType::from_raw(&c.ty), c.pk))
                .collect(),
            row_count: t.row_count,
        })
        .collect();
    Schema::new(tables, doc.foreign_keys)
}

pub fn serialize_schema(schema: &Schema) -> String {
    let doc = SchemaDoc {
        tables: schema
            .tables()
            .iter()
            .map(|t| TableDoc {
                name: t.name.clone(),
                columns: t
                    .columns
                    .iter()
                    .map(|c| ColumnDoc {
                        name: c.name.clone(),
                        ty: c.declared_type.as_str().to_string(),
                        pk: c.is_primary_key,
                    })
                    .collect(),
                row_count: t.row_count,
            })
            .collect(),
        foreign_keys: schema.foreign_keys().to_vec(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("schema document serializes");
    out.push('\n');
    out
}
