//! Execution of edit programs and application of edit scripts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::edits::{EditKind, EditProgram, EditScript, EditStmt, Granularity, PathSeg};
use crate::pydict::{
    check_composite, parse_clause_value, parse_entries, split_clauses, split_query, ClauseKey, ClauseMap, ClauseValue,
    PyDictError,
};
use crate::sql::{join_tokens, tokenize};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VmError {
    #[error("anchor not found: {0}")]
    AnchorNotFound(String),
    #[error("key `{0}` already present")]
    KeyExists(ClauseKey),
    #[error("missing path {0}")]
    MissingPath(String),
    #[error("pop of absent key `{0}`")]
    PopAbsent(String),
    #[error("statement would orphan placeholders at {0}")]
    Orphan(String),
    #[error("{0:?} scripts cannot be applied to a clause map")]
    WrongGranularity(Granularity),
    #[error("expected exactly one clause in {0:?}")]
    NotSingleEntry(String),
    #[error("bad edit content {content:?}: {source}")]
    Content {
        content: String,
        #[source]
        source: PyDictError,
    },
}

type Result<T> = std::result::Result<T, VmError>;

fn show(path: &[PathSeg]) -> String {
    let mut s = String::from("sql");
    for p in path {
        s.push_str(&format!("[\"{p}\"]"));
    }
    s
}

fn map_at_mut<'a>(map: &'a mut ClauseMap, path: &[PathSeg], full: &[PathSeg]) -> Result<&'a mut ClauseMap> {
    let missing = || VmError::MissingPath(show(full));
    match path {
        [] => Ok(map),
        [PathSeg::Key(k), rest @ ..] => match (map.get_mut(*k), rest) {
            (Some(ClauseValue::Composite(c)), [PathSeg::Sub(n), rest @ ..]) => {
                let sub = c.subqueries.get_mut(*n).ok_or_else(missing)?;
                map_at_mut(sub, rest, full)
            }
            (Some(ClauseValue::Query(q)), rest) => map_at_mut(q, rest, full),
            _ => Err(missing()),
        },
        _ => Err(missing()),
    }
}

fn content_err(content: &str) -> impl FnOnce(PyDictError) -> VmError + '_ {
    move |source| VmError::Content {
        content: content.to_string(),
        source,
    }
}

/// Runs an edit program against a clause map.
///
/// Assigned strings are canonicalized: inline subqueries become composite
/// entries and set-operation values become nested maps. Intermediate paths
/// are never created.
pub fn exec_program(map: &ClauseMap, program: &EditProgram) -> Result<ClauseMap> {
    let mut out = map.clone();
    for stmt in &program.stmts {
        match stmt {
            EditStmt::Assign { path, value } => assign(&mut out, path, value)?,
            EditStmt::Pop { path, key } => {
                let PathSeg::Key(k) = key else {
                    let mut p = path.clone();
                    p.push(*key);
                    return Err(VmError::Orphan(show(&p)));
                };
                let m = map_at_mut(&mut out, path, path)?;
                if m.remove(*k).is_none() {
                    let mut p = path.clone();
                    p.push(*key);
                    return Err(VmError::PopAbsent(show(&p)));
                }
            }
        }
    }
    Ok(out)
}

fn assign(map: &mut ClauseMap, path: &[PathSeg], value: &str) -> Result<()> {
    let Some((leaf, parent)) = path.split_last() else {
        return Err(VmError::MissingPath(show(path)));
    };
    match leaf {
        PathSeg::Key(k) => {
            let v = parse_clause_value(*k, value).map_err(content_err(value))?;
            map_at_mut(map, parent, path)?.insert(*k, v);
        }
        PathSeg::Sub(_) | PathSeg::Clause => {
            let Some((PathSeg::Key(k), outer)) = parent.split_last() else {
                return Err(VmError::MissingPath(show(path)));
            };
            let m = map_at_mut(map, outer, path)?;
            let Some(ClauseValue::Composite(c)) = m.get_mut(*k) else {
                return Err(VmError::MissingPath(show(path)));
            };
            if let PathSeg::Sub(n) = leaf {
                let sub = split_query(value).map_err(content_err(value))?;
                *c.subqueries.get_mut(*n).ok_or_else(|| VmError::Orphan(show(path)))? = sub;
            } else {
                let text = match parse_clause_value(*k, value).map_err(content_err(value))? {
                    ClauseValue::Text(t) => t,
                    _ => return Err(VmError::Orphan(show(path))),
                };
                let mut next = c.clone();
                next.clause = text;
                check_composite(*k, &next).map_err(|_| VmError::Orphan(show(path)))?;
                *c = next;
            }
        }
    }
    Ok(())
}

struct Slot {
    scope: Vec<PathSeg>,
    key: ClauseKey,
    pos: Vec<usize>,
}

fn position(scope: &[PathSeg], key: ClauseKey) -> Vec<usize> {
    scope.iter().map(|s| s.ordinal()).chain([key.ordinal()]).collect()
}

/// Entries matching `(key, value)` anywhere in the map, depth first.
fn find_slots(map: &ClauseMap, scope: &mut Vec<PathSeg>, key: ClauseKey, value: &ClauseValue, out: &mut Vec<Slot>) {
    for (k, v) in map.iter() {
        if k == key && v == value {
            out.push(Slot {
                scope: scope.clone(),
                key: k,
                pos: position(scope, k),
            });
        }
        scope.push(PathSeg::Key(k));
        match v {
            ClauseValue::Composite(c) => {
                for (n, sub) in c.subqueries.iter().enumerate() {
                    scope.push(PathSeg::Sub(n));
                    find_slots(sub, scope, key, value, out);
                    scope.pop();
                }
            }
            ClauseValue::Query(q) => find_slots(q, scope, key, value, out),
            ClauseValue::Text(_) => {}
        }
        scope.pop();
    }
}

fn entries(form: Granularity, text: &str) -> Result<Vec<(ClauseKey, ClauseValue)>> {
    match form {
        Granularity::ClausePydict => parse_entries(text),
        _ => split_clauses(text),
    }
    .map_err(content_err(text))
}

fn single(form: Granularity, text: &str) -> Result<(ClauseKey, ClauseValue)> {
    let mut e = entries(form, text)?;
    if e.len() != 1 {
        return Err(VmError::NotSingleEntry(text.to_string()));
    }
    Ok(e.remove(0))
}

/// Applies a clause-level script.
///
/// Replace and delete anchor on an entry with the same key and value: the
/// shallowest match after the previous action in depth-first order, or the
/// shallowest match anywhere if none follows. Inserts go into the map the
/// previous action touched (the root for a leading insert).
pub fn apply_clause_edits(map: &ClauseMap, script: &EditScript) -> Result<ClauseMap> {
    let form = script.granularity;
    if !form.is_clause() {
        return Err(VmError::WrongGranularity(form));
    }
    let mut out = map.clone();
    let mut cursor: Option<Vec<usize>> = None;
    let mut scope: Vec<PathSeg> = Vec::new();
    for action in &script.actions {
        match action.kind {
            EditKind::Replace | EditKind::Delete => {
                let (key, value) = single(form, &action.old)?;
                let mut slots = Vec::new();
                find_slots(&out, &mut Vec::new(), key, &value, &mut slots);
                let after: Vec<&Slot> = slots
                    .iter()
                    .filter(|s| cursor.as_ref().is_none_or(|c| &s.pos > c))
                    .collect();
                let pool: Vec<&Slot> = if after.is_empty() {
                    slots.iter().collect()
                } else {
                    after
                };
                let slot = pool
                    .into_iter()
                    .min_by(|a, b| (a.scope.len(), &a.pos).cmp(&(b.scope.len(), &b.pos)))
                    .ok_or_else(|| VmError::AnchorNotFound(action.old.clone()))?;
                let m = map_at_mut(&mut out, &slot.scope, &slot.scope)?;
                m.remove(slot.key);
                if action.kind == EditKind::Replace {
                    let (nk, nv) = single(form, &action.new)?;
                    if m.insert(nk, nv).is_some() {
                        return Err(VmError::KeyExists(nk));
                    }
                }
                cursor = Some(slot.pos.clone());
                scope = slot.scope.clone();
            }
            EditKind::Insert => {
                let m =
                    map_at_mut(&mut out, &scope, &scope).map_err(|_| VmError::AnchorNotFound(action.new.clone()))?;
                for (k, v) in entries(form, &action.new)? {
                    if m.contains(k) {
                        return Err(VmError::KeyExists(k));
                    }
                    m.insert(k, v);
                    cursor = Some(position(&scope, k));
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplyReport {
    pub result: String,
    /// Actions whose span occurred more than once.
    pub ambiguous_spans: usize,
    /// Actions whose span did not occur at all.
    pub skipped: usize,
}

/// Best-effort token-level application: each span is matched at its
/// leftmost occurrence; inserts go after the previously applied span (or at
/// the end when nothing was applied yet).
pub fn apply_token_edits(wrong: &str, script: &EditScript) -> ApplyReport {
    let Ok(tokens) = tokenize(wrong) else {
        return ApplyReport {
            result: wrong.to_string(),
            ambiguous_spans: 0,
            skipped: script.actions.len(),
        };
    };
    let mut seq: Vec<String> = tokens.into_iter().map(|t| t.text).collect();
    let mut cursor = seq.len();
    let mut report = ApplyReport {
        result: String::new(),
        ambiguous_spans: 0,
        skipped: 0,
    };
    let toks = |s: &str| -> Option<Vec<String>> {
        if s.trim().is_empty() {
            return Some(Vec::new());
        }
        tokenize(s).ok().map(|t| t.into_iter().map(|t| t.text).collect())
    };
    for action in &script.actions {
        let (Some(old), Some(new)) = (toks(&action.old), toks(&action.new)) else {
            report.skipped += 1;
            continue;
        };
        if action.kind == EditKind::Insert {
            let at = cursor.min(seq.len());
            cursor = at + new.len();
            seq.splice(at..at, new);
            continue;
        }
        let hits: Vec<usize> = if old.is_empty() || old.len() > seq.len() {
            Vec::new()
        } else {
            (0..=seq.len() - old.len())
                .filter(|&i| seq[i..i + old.len()] == old[..])
                .collect()
        };
        let Some(&at) = hits.first() else {
            report.skipped += 1;
            continue;
        };
        if hits.len() > 1 {
            report.ambiguous_spans += 1;
        }
        cursor = at + new.len();
        seq.splice(at..at + old.len(), new);
    }
    report.result = join_tokens(seq.iter().map(String::as_str));
    report
}
