//! Edit representations between a wrong and a gold query: token-level and
//! clause-level scripts (in SQL or PyDict form) and edit programs.

mod diff;
mod markers;
mod program;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pydict::{placeholder_id, placeholder_index, ClauseKey};

pub use diff::{
    align_clauses, diff_clauses_pydict, diff_clauses_sql, diff_program, diff_token_seqs, diff_tokens, ClauseAlignment,
    ClauseOp,
};
pub use markers::{parse_edits, render_edits};
pub use program::{parse_program, render_program, render_stmt};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditsError {
    #[error("unbalanced marker `{marker}` at byte {offset}")]
    UnbalancedMarker { marker: String, offset: usize },
    #[error("unknown marker `{0}`")]
    UnknownMarker(String),
    #[error("empty {0} span")]
    EmptySpan(&'static str),
    #[error("text outside any edit action at byte {0}")]
    StrayText(usize),
    #[error("line {line}: {message}")]
    Program { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditKind {
    Replace,
    Insert,
    Delete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Granularity {
    Token,
    ClauseSql,
    ClausePydict,
}

impl Granularity {
    pub fn is_clause(self) -> bool {
        !matches!(self, Granularity::Token)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EditAction {
    pub kind: EditKind,
    /// Span being replaced or deleted; empty for inserts.
    pub old: String,
    /// Replacement or inserted span; empty for deletes.
    pub new: String,
}

impl EditAction {
    pub fn replace(old: impl Into<String>, new: impl Into<String>) -> Self {
        Self {
            kind: EditKind::Replace,
            old: old.into(),
            new: new.into(),
        }
    }

    pub fn insert(new: impl Into<String>) -> Self {
        Self {
            kind: EditKind::Insert,
            old: String::new(),
            new: new.into(),
        }
    }

    pub fn delete(old: impl Into<String>) -> Self {
        Self {
            kind: EditKind::Delete,
            old: old.into(),
            new: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditScript {
    pub granularity: Granularity,
    pub actions: Vec<EditAction>,
}

impl EditScript {
    pub fn new(granularity: Granularity) -> Self {
        Self {
            granularity,
            actions: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// One step of a path into a clause map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PathSeg {
    Key(ClauseKey),
    /// Placeholder `subqueryN` inside a composite entry.
    Sub(usize),
    /// Text of a composite entry.
    Clause,
}

impl PathSeg {
    /// Position among siblings, used for depth-first ordering.
    pub fn ordinal(self) -> usize {
        match self {
            PathSeg::Key(k) => k.ordinal(),
            PathSeg::Sub(n) => n,
            PathSeg::Clause => 0,
        }
    }
}

impl fmt::Display for PathSeg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathSeg::Key(k) => f.write_str(k.as_str()),
            PathSeg::Sub(n) => f.write_str(&placeholder_id(*n)),
            PathSeg::Clause => f.write_str("clause"),
        }
    }
}

impl FromStr for PathSeg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "clause" {
            return Ok(PathSeg::Clause);
        }
        if let Some(n) = placeholder_index(s) {
            return Ok(PathSeg::Sub(n));
        }
        s.parse::<ClauseKey>()
            .map(PathSeg::Key)
            .map_err(|_| format!("unknown key `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EditStmt {
    /// `sql[p0][p1]... = "value"`
    Assign { path: Vec<PathSeg>, value: String },
    /// `sql[p0]....pop("key")`
    Pop { path: Vec<PathSeg>, key: PathSeg },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditProgram {
    pub stmts: Vec<EditStmt>,
}

impl EditProgram {
    pub fn is_empty(&self) -> bool {
        self.stmts.is_empty()
    }
}
