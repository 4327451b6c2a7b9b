#![allow(dead_code)]

pub mod fuzz;

use std::path::PathBuf;

use serde::Deserialize;
use sqlfix::sql::{parse_unchecked, tokenize, Query, SchemaStore};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[derive(Debug, Clone, Deserialize)]
pub struct ReferenceCase {
    pub name: String,
    pub db_id: String,
    pub wrong_raw: String,
    pub gold_raw: String,
    pub wrong_sql: String,
    pub gold_sql: String,
    pub wrong_pydict: String,
    pub token: String,
    pub clause_sql: String,
    pub clause_pydict: String,
    pub program: String,
}

pub fn reference_cases() -> Vec<ReferenceCase> {
    let text = std::fs::read_to_string(fixture_path("reference_tables.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn reference_store() -> SchemaStore {
    SchemaStore::load(&fixture_path("tables.json")).unwrap()
}

pub fn q(sql: &str) -> Query {
    parse_unchecked(&tokenize(sql).unwrap()).unwrap()
}
