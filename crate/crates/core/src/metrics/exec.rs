use std::cmp::Ordering;
use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::MetricsError;
use crate::sql::tokenize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    /// The database itself cannot be reached.
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    /// The query failed on a reachable database.
    #[error("query failed: {0}")]
    Query(String),
}

/// Executes read-only queries against a named database.
pub trait ExecBackend: Send + Sync {
    fn execute(&self, sql: &str, db_id: &str) -> Result<Vec<Vec<Value>>, ExecError>;
}

/// SQLite files in the Spider layout `<root>/<db_id>/<db_id>.sqlite`.
/// Each database has one connection; calls on the same database are
/// serialized.
pub struct SqliteBackend {
    root: PathBuf,
    conns: Mutex<HashMap<String, Arc<Mutex<Connection>>>>,
}

impl SqliteBackend {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            conns: Mutex::new(HashMap::new()),
        }
    }

    pub fn db_path(&self, db_id: &str) -> PathBuf {
        self.root.join(db_id).join(format!("{db_id}.sqlite"))
    }

    fn connection(&self, db_id: &str) -> Result<Arc<Mutex<Connection>>, ExecError> {
        let mut conns = self.conns.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(c) = conns.get(db_id) {
            return Ok(c.clone());
        }
        let path = self.db_path(db_id);
        if !path.is_file() {
            return Err(ExecError::Unavailable(format!("no database at {}", path.display())));
        }
        let conn = Connection::open_with_flags(&path, OpenFlags::SQLITE_OPEN_READ_ONLY)
            .map_err(|e| ExecError::Unavailable(e.to_string()))?;
        let conn = Arc::new(Mutex::new(conn));
        conns.insert(db_id.to_string(), conn.clone());
        Ok(conn)
    }
}

impl ExecBackend for SqliteBackend {
    fn execute(&self, sql: &str, db_id: &str) -> Result<Vec<Vec<Value>>, ExecError> {
        let conn = self.connection(db_id)?;
        let conn = conn.lock().unwrap_or_else(|e| e.into_inner());
        let q = |e: rusqlite::Error| ExecError::Query(e.to_string());
        let mut stmt = conn.prepare(sql).map_err(q)?;
        let width = stmt.column_count();
        let mut rows = stmt.query([]).map_err(q)?;
        let mut out = Vec::new();
        while let Some(row) = rows.next().map_err(q)? {
            let mut vals = Vec::with_capacity(width);
            for i in 0..width {
                vals.push(match row.get_ref(i).map_err(q)? {
                    ValueRef::Null => Value::Null,
                    ValueRef::Integer(n) => Value::Int(n),
                    ValueRef::Real(x) => Value::Real(x),
                    ValueRef::Text(t) => Value::Text(String::from_utf8_lossy(t).into_owned()),
                    ValueRef::Blob(b) => Value::Blob(b.to_vec()),
                });
            }
            out.push(vals);
        }
        Ok(out)
    }
}

/// Comparable form of a value: integers and reals compare numerically.
#[derive(Debug, Clone, PartialEq)]
enum Key {
    Null,
    Num(f64),
    Text(String),
    Blob(Vec<u8>),
}

impl Key {
    fn of(v: &Value) -> Key {
        match v {
            Value::Null => Key::Null,
            Value::Int(n) => Key::Num(*n as f64),
            Value::Real(x) => Key::Num(if *x == 0.0 { 0.0 } else { *x }),
            Value::Text(t) => Key::Text(t.clone()),
            Value::Blob(b) => Key::Blob(b.clone()),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Key::Null => 0,
            Key::Num(_) => 1,
            Key::Text(_) => 2,
            Key::Blob(_) => 3,
        }
    }

    fn cmp(&self, other: &Key) -> Ordering {
        match (self, other) {
            (Key::Num(a), Key::Num(b)) => a.total_cmp(b),
            (Key::Text(a), Key::Text(b)) => a.cmp(b),
            (Key::Blob(a), Key::Blob(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

fn row_cmp(a: &[Key], b: &[Key]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.cmp(y) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Whether `gold` has an ORDER BY on its outermost query.
pub fn gold_is_ordered(gold: &str) -> bool {
    let Ok(tokens) = tokenize(gold) else { return false };
    let mut depth = 0i32;
    tokens.iter().enumerate().any(|(i, t)| {
        if t.is_punct("(") {
            depth += 1;
        } else if t.is_punct(")") {
            depth -= 1;
        }
        depth == 0 && t.is_keyword("order") && tokens.get(i + 1).is_some_and(|n| n.is_keyword("by"))
    })
}

/// Execution match: false when either query fails; an unreachable
/// database is an error, not a verdict.
pub fn execution_match(pred: &str, gold: &str, db_id: &str, backend: &dyn ExecBackend) -> Result<bool, MetricsError> {
    let run = |sql: &str| match backend.execute(sql, db_id) {
        Ok(rows) => Ok(Some(rows)),
        Err(ExecError::Query(_)) => Ok(None),
        Err(ExecError::Unavailable(m)) => Err(MetricsError::Unavailable(m)),
    };
    let Some(g) = run(gold)? else { return Ok(false) };
    let Some(p) = run(pred)? else { return Ok(false) };
    let keys =
        |rows: Vec<Vec<Value>>| -> Vec<Vec<Key>> { rows.iter().map(|r| r.iter().map(Key::of).collect()).collect() };
    let (mut g, mut p) = (keys(g), keys(p));
    if !gold_is_ordered(gold) {
        g.sort_by(|a, b| row_cmp(a, b));
        p.sort_by(|a, b| row_cmp(a, b));
    }
    Ok(g.len() == p.len() && g.iter().zip(&p).all(|(a, b)| row_cmp(a, b) == Ordering::Equal))
}
