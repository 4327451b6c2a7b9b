//! Clause decomposition of queries and the Python-dictionary ("PyDict")
//! text form.
//!
//! A [`ClauseMap`] maps clause keys to clause texts. A clause that contains
//! subqueries is stored as a [`Composite`]: its text carries `(subqueryN)`
//! placeholders and each subquery is a nested map. Set operations store the
//! right-hand query as a nested map under `intersect`, `union` or `except`.

mod decompose;
mod sqltext;
mod text;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sql::SqlError;

pub use decompose::decompose;
pub(crate) use sqltext::check_composite;
pub use sqltext::{clause_tokens_to_value, entry_sql, parse_clause_value, split_clauses, split_query, to_sql};
pub(crate) use text::quote;
pub use text::{parse_entries, parse_pydict, render_entry, render_pydict, render_value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PyDictError {
    #[error("malformed PyDict at byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("unterminated mapping")]
    UnterminatedMapping,
    #[error("unknown clause key `{0}`")]
    UnknownKey(String),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("query is missing its `{0}` clause")]
    MissingClause(&'static str),
    #[error("dangling placeholder `{0}`")]
    DanglingPlaceholder(String),
    #[error("subquery{0} is never referenced by its clause")]
    UnreferencedSubquery(usize),
    #[error("clause `{key}` must start with `{keyword}`: {text:?}")]
    KeywordMismatch {
        key: ClauseKey,
        keyword: &'static str,
        text: String,
    },
    #[error("text does not start with a clause keyword: {0:?}")]
    NoClause(String),
    #[error(transparent)]
    Sql(#[from] SqlError),
}

/// Clause keys in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClauseKey {
    #[serde(rename = "select")]
    Select,
    #[serde(rename = "from")]
    From,
    #[serde(rename = "where")]
    Where,
    #[serde(rename = "groupBy")]
    GroupBy,
    #[serde(rename = "having")]
    Having,
    #[serde(rename = "orderBy")]
    OrderBy,
    #[serde(rename = "limit")]
    Limit,
    #[serde(rename = "intersect")]
    Intersect,
    #[serde(rename = "union")]
    Union,
    #[serde(rename = "except")]
    Except,
}

impl ClauseKey {
    pub const ALL: [ClauseKey; 10] = [
        ClauseKey::Select,
        ClauseKey::From,
        ClauseKey::Where,
        ClauseKey::GroupBy,
        ClauseKey::Having,
        ClauseKey::OrderBy,
        ClauseKey::Limit,
        ClauseKey::Intersect,
        ClauseKey::Union,
        ClauseKey::Except,
    ];

    /// Dictionary key spelling.
    pub fn as_str(self) -> &'static str {
        match self {
            ClauseKey::Select => "select",
            ClauseKey::From => "from",
            ClauseKey::Where => "where",
            ClauseKey::GroupBy => "groupBy",
            ClauseKey::Having => "having",
            ClauseKey::OrderBy => "orderBy",
            ClauseKey::Limit => "limit",
            ClauseKey::Intersect => "intersect",
            ClauseKey::Union => "union",
            ClauseKey::Except => "except",
        }
    }

    /// SQL keyword(s) that open the clause.
    pub fn keyword(self) -> &'static str {
        match self {
            ClauseKey::GroupBy => "group by",
            ClauseKey::OrderBy => "order by",
            other => other.as_str(),
        }
    }

    pub fn is_set_op(self) -> bool {
        matches!(self, ClauseKey::Intersect | ClauseKey::Union | ClauseKey::Except)
    }

    pub fn ordinal(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ClauseKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClauseKey {
    type Err = PyDictError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClauseKey::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| PyDictError::UnknownKey(s.to_string()))
    }
}

/// A clause whose text references nested queries by placeholder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Composite {
    /// Clause text with `(subqueryN)` in place of each nested query.
    pub clause: String,
    /// `subqueries[n]` is the map for placeholder `subqueryN`.
    pub subqueries: Vec<ClauseMap>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClauseValue {
    Text(String),
    Composite(Composite),
    /// Right-hand query of a set operation.
    Query(Box<ClauseMap>),
}

impl ClauseValue {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            ClauseValue::Text(t) => Some(t),
            _ => None,
        }
    }
}

pub fn placeholder_id(n: usize) -> String {
    format!("subquery{n}")
}

/// Index of a `subqueryN` placeholder id.
pub fn placeholder_index(id: &str) -> Option<usize> {
    let digits = id.strip_prefix("subquery")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if digits.len() > 1 && digits.starts_with('0') {
        return None;
    }
    digits.parse().ok()
}

/// Ordered clause map; iteration follows canonical key order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseMap {
    entries: BTreeMap<ClauseKey, ClauseValue>,
}

impl ClauseMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: ClauseKey) -> Option<&ClauseValue> {
        self.entries.get(&key)
    }

    pub fn get_mut(&mut self, key: ClauseKey) -> Option<&mut ClauseValue> {
        self.entries.get_mut(&key)
    }

    pub fn contains(&self, key: ClauseKey) -> bool {
        self.entries.contains_key(&key)
    }

    pub fn insert(&mut self, key: ClauseKey, value: ClauseValue) -> Option<ClauseValue> {
        self.entries.insert(key, value)
    }

    pub fn remove(&mut self, key: ClauseKey) -> Option<ClauseValue> {
        self.entries.remove(&key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClauseKey, &ClauseValue)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn keys(&self) -> impl Iterator<Item = ClauseKey> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Convenience for building maps of plain clause texts.
    pub fn from_texts(pairs: &[(ClauseKey, &str)]) -> Self {
        let mut m = Self::new();
        for (k, v) in pairs {
            m.insert(*k, ClauseValue::Text(v.to_string()));
        }
        m
    }
}

impl FromIterator<(ClauseKey, ClauseValue)> for ClauseMap {
    fn from_iter<I: IntoIterator<Item = (ClauseKey, ClauseValue)>>(iter: I) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}
