use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SqlError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableInfo {
    pub name: String,
    pub columns: Vec<String>,
}

/// Table and column names of one database, lowercased.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaInfo {
    pub db_id: String,
    pub tables: Vec<TableInfo>,
    /// `(table.column, referenced_table.column)` pairs.
    #[serde(default)]
    pub foreign_keys: Vec<(String, String)>,
}

impl SchemaInfo {
    pub fn new(db_id: &str, tables: &[(&str, &[&str])]) -> Self {
        Self {
            db_id: db_id.to_string(),
            tables: tables
                .iter()
                .map(|(name, cols)| TableInfo {
                    name: name.to_ascii_lowercase(),
                    columns: cols.iter().map(|c| c.to_ascii_lowercase()).collect(),
                })
                .collect(),
            foreign_keys: Vec::new(),
        }
    }

    pub fn table(&self, name: &str) -> Option<&TableInfo> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn has_column(&self, table: &str, column: &str) -> bool {
        self.table(table)
            .map(|t| t.columns.iter().any(|c| c == column))
            .unwrap_or(false)
    }

    /// Flat text form used as model input:
    /// `db_id | table1 : col1, col2 | table2 : col3`.
    pub fn serialize(&self) -> String {
        let mut out = self.db_id.to_ascii_lowercase();
        for t in &self.tables {
            out.push_str(" | ");
            out.push_str(&t.name);
            out.push_str(" : ");
            out.push_str(&t.columns.join(", "));
        }
        out
    }
}

/// One entry of a Spider `tables.json` file.
#[derive(Debug, Deserialize)]
struct RawSchema {
    db_id: String,
    #[serde(default)]
    table_names_original: Option<Vec<String>>,
    #[serde(default)]
    table_names: Option<Vec<String>>,
    #[serde(default)]
    column_names_original: Option<Vec<(i64, String)>>,
    #[serde(default)]
    column_names: Option<Vec<(i64, String)>>,
    #[serde(default)]
    foreign_keys: Vec<(usize, usize)>,
}

impl TryFrom<RawSchema> for SchemaInfo {
    type Error = SqlError;

    fn try_from(raw: RawSchema) -> Result<Self, SqlError> {
        let bad = |msg: &str| SqlError::Schema(format!("{}: {msg}", raw.db_id));
        let names = raw
            .table_names_original
            .as_ref()
            .or(raw.table_names.as_ref())
            .ok_or_else(|| bad("missing table names"))?;
        let cols = raw
            .column_names_original
            .as_ref()
            .or(raw.column_names.as_ref())
            .ok_or_else(|| bad("missing column names"))?;
        let mut tables: Vec<TableInfo> = names
            .iter()
            .map(|n| TableInfo {
                name: n.to_ascii_lowercase(),
                columns: Vec::new(),
            })
            .collect();
        for i in 0..tables.len() {
            if tables[..i].iter().any(|t| t.name == tables[i].name) {
                return Err(bad(&format!("duplicate table {}", tables[i].name)));
            }
        }
        let mut qualified = Vec::with_capacity(cols.len());
        for (tidx, name) in cols {
            if *tidx < 0 {
                qualified.push(None);
                continue;
            }
            let table = tables
                .get_mut(*tidx as usize)
                .ok_or_else(|| bad("column references unknown table"))?;
            let name = name.to_ascii_lowercase();
            qualified.push(Some(format!("{}.{name}", table.name)));
            table.columns.push(name);
        }
        let foreign_keys = raw
            .foreign_keys
            .iter()
            .filter_map(|(a, b)| {
                let a = qualified.get(*a)?.clone()?;
                let b = qualified.get(*b)?.clone()?;
                Some((a, b))
            })
            .collect();
        Ok(SchemaInfo {
            db_id: raw.db_id.clone(),
            tables,
            foreign_keys,
        })
    }
}

/// All schemas of a `tables.json` file, keyed by `db_id`.
#[derive(Debug, Clone, Default)]
pub struct SchemaStore {
    schemas: HashMap<String, SchemaInfo>,
}

impl SchemaStore {
    pub fn from_json(text: &str) -> Result<Self, SqlError> {
        let raw: Vec<RawSchema> = serde_json::from_str(text).map_err(|e| SqlError::Schema(e.to_string()))?;
        let mut schemas = HashMap::new();
        for r in raw {
            let s = SchemaInfo::try_from(r)?;
            schemas.insert(s.db_id.clone(), s);
        }
        Ok(Self { schemas })
    }

    pub fn load(path: &Path) -> Result<Self, SqlError> {
        let text = std::fs::read_to_string(path).map_err(|e| SqlError::Schema(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn insert(&mut self, schema: SchemaInfo) {
        self.schemas.insert(schema.db_id.clone(), schema);
    }

    pub fn get(&self, db_id: &str) -> Option<&SchemaInfo> {
        self.schemas.get(db_id)
    }

    pub fn len(&self) -> usize {
        self.schemas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schemas.is_empty()
    }
}
