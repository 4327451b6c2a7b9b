use super::{EditAction, EditKind, EditProgram, EditScript, EditStmt, Granularity, PathSeg};
use crate::editvm::apply_clause_edits;
use crate::pydict::{decompose, entry_sql, render_entry, ClauseKey, ClauseMap, ClauseValue, PyDictError};
use crate::sql::{join_tokens, render, tokenize, Query, Token};

/// Token-level diff of two token sequences.
///
/// Forward walk over a suffix-LCS table; on a mismatch a deletion is
/// preferred when it keeps the LCS. Every maximal gap between matched tokens
/// becomes one action.
pub fn diff_token_seqs(wrong: &[Token], gold: &[Token]) -> EditScript {
    let (n, m) = (wrong.len(), gold.len());
    let mut lcs = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i][j] = if wrong[i].text == gold[j].text {
                lcs[i + 1][j + 1] + 1
            } else {
                lcs[i + 1][j].max(lcs[i][j + 1])
            };
        }
    }

    let mut script = EditScript::new(Granularity::Token);
    let mut del: Vec<&str> = Vec::new();
    let mut ins: Vec<&str> = Vec::new();
    let flush =
        |del: &mut Vec<&str>, ins: &mut Vec<&str>, out: &mut Vec<EditAction>| match (del.is_empty(), ins.is_empty()) {
            (true, true) => {}
            (false, true) => out.push(EditAction::delete(join_tokens(del.drain(..)))),
            (true, false) => out.push(EditAction::insert(join_tokens(ins.drain(..)))),
            (false, false) => out.push(EditAction::replace(
                join_tokens(del.drain(..)),
                join_tokens(ins.drain(..)),
            )),
        };
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        if i < n && j < m && wrong[i].text == gold[j].text {
            flush(&mut del, &mut ins, &mut script.actions);
            i += 1;
            j += 1;
        } else if i < n && (j == m || lcs[i + 1][j] >= lcs[i][j + 1]) {
            del.push(&wrong[i].text);
            i += 1;
        } else {
            ins.push(&gold[j].text);
            j += 1;
        }
    }
    flush(&mut del, &mut ins, &mut script.actions);
    script
}

pub fn diff_tokens(wrong: &Query, gold: &Query) -> EditScript {
    let tok = |q: &Query| tokenize(&render(q)).unwrap_or_default();
    diff_token_seqs(&tok(wrong), &tok(gold))
}

/// One aligned clause difference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClauseOp {
    /// Path of the map holding the entry.
    pub scope: Vec<PathSeg>,
    pub kind: EditKind,
    pub key: ClauseKey,
    pub old: Option<ClauseValue>,
    pub new: Option<ClauseValue>,
}

impl ClauseOp {
    /// Full path of the touched entry.
    pub fn path(&self) -> Vec<PathSeg> {
        let mut p = self.scope.clone();
        p.push(PathSeg::Key(self.key));
        p
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClauseAlignment {
    pub ops: Vec<ClauseOp>,
    /// Entries replaced whole instead of being recursed into.
    pub collapsed: Vec<Vec<PathSeg>>,
}

fn child(scope: &[PathSeg], extra: &[PathSeg]) -> Vec<PathSeg> {
    let mut p = scope.to_vec();
    p.extend_from_slice(extra);
    p
}

fn align_into(
    wrong: &ClauseMap,
    gold: &ClauseMap,
    scope: &[PathSeg],
    collapsed: &[Vec<PathSeg>],
    ops: &mut Vec<ClauseOp>,
    points: &mut Vec<Vec<PathSeg>>,
) {
    for key in ClauseKey::ALL {
        let op = |kind, old: Option<&ClauseValue>, new: Option<&ClauseValue>| ClauseOp {
            scope: scope.to_vec(),
            kind,
            key,
            old: old.cloned(),
            new: new.cloned(),
        };
        match (wrong.get(key), gold.get(key)) {
            (None, None) => {}
            (Some(w), None) => ops.push(op(EditKind::Delete, Some(w), None)),
            (None, Some(g)) => ops.push(op(EditKind::Insert, None, Some(g))),
            (Some(w), Some(g)) if w == g => {}
            (Some(w), Some(g)) => {
                let here = child(scope, &[PathSeg::Key(key)]);
                let open = !collapsed.contains(&here);
                match (w, g) {
                    (ClauseValue::Composite(cw), ClauseValue::Composite(cg))
                        if open && cw.clause == cg.clause && cw.subqueries.len() == cg.subqueries.len() =>
                    {
                        points.push(here.clone());
                        for (n, (sw, sg)) in cw.subqueries.iter().zip(&cg.subqueries).enumerate() {
                            let inner = child(&here, &[PathSeg::Sub(n)]);
                            align_into(sw, sg, &inner, collapsed, ops, points);
                        }
                    }
                    (ClauseValue::Query(qw), ClauseValue::Query(qg)) if open => {
                        points.push(here.clone());
                        align_into(qw, qg, &here, collapsed, ops, points);
                    }
                    _ => ops.push(op(EditKind::Replace, Some(w), Some(g))),
                }
            }
        }
    }
}

fn content(form: Granularity, key: ClauseKey, value: &ClauseValue) -> Result<String, PyDictError> {
    match form {
        Granularity::ClausePydict => Ok(render_entry(key, value)),
        _ => entry_sql(key, value),
    }
}

/// Renders aligned ops as a clause script; consecutive inserts into the
/// same map merge into one action.
fn script_of(ops: &[ClauseOp], form: Granularity) -> Result<EditScript, PyDictError> {
    let sep = if form == Granularity::ClausePydict { ", " } else { " " };
    let mut script = EditScript::new(form);
    let mut last_insert_scope: Option<&[PathSeg]> = None;
    for op in ops {
        let old = op.old.as_ref().map(|v| content(form, op.key, v)).transpose()?;
        let new = op.new.as_ref().map(|v| content(form, op.key, v)).transpose()?;
        match op.kind {
            EditKind::Insert => {
                let new = new.unwrap_or_default();
                match (last_insert_scope, script.actions.last_mut()) {
                    (Some(s), Some(prev)) if s == op.scope.as_slice() => {
                        prev.new.push_str(sep);
                        prev.new.push_str(&new);
                    }
                    _ => script.actions.push(EditAction::insert(new)),
                }
                last_insert_scope = Some(&op.scope);
                continue;
            }
            EditKind::Delete => script.actions.push(EditAction::delete(old.unwrap_or_default())),
            EditKind::Replace => script
                .actions
                .push(EditAction::replace(old.unwrap_or_default(), new.unwrap_or_default())),
        }
        last_insert_scope = None;
    }
    Ok(script)
}

/// Aligns two clause maps for a clause form (`ClauseSql` or
/// `ClausePydict`).
///
/// Nested entries are diffed in place when their skeletons agree. If the
/// resulting script would not reproduce `gold` when applied to `wrong`, the
/// outermost recursion points are collapsed into whole-entry replacements
/// one at a time until it does.
pub fn align_clauses(wrong: &ClauseMap, gold: &ClauseMap, form: Granularity) -> Result<ClauseAlignment, PyDictError> {
    let mut collapsed: Vec<Vec<PathSeg>> = Vec::new();
    loop {
        let mut ops = Vec::new();
        let mut points = Vec::new();
        align_into(wrong, gold, &[], &collapsed, &mut ops, &mut points);
        let script = script_of(&ops, form)?;
        let sound = apply_clause_edits(wrong, &script).is_ok_and(|m| &m == gold);
        match points.into_iter().next() {
            Some(p) if !sound => collapsed.push(p),
            _ => return Ok(ClauseAlignment { ops, collapsed }),
        }
    }
}

pub fn diff_clauses_sql(wrong: &Query, gold: &Query) -> EditScript {
    let (w, g) = (decompose(wrong), decompose(gold));
    align_clauses(&w, &g, Granularity::ClauseSql)
        .and_then(|a| script_of(&a.ops, Granularity::ClauseSql))
        .expect("decomposed queries always render")
}

pub fn diff_clauses_pydict(wrong: &ClauseMap, gold: &ClauseMap) -> Result<EditScript, PyDictError> {
    let a = align_clauses(wrong, gold, Granularity::ClausePydict)?;
    script_of(&a.ops, Granularity::ClausePydict)
}

/// Edit program between two clause maps: one statement per touched entry,
/// sharing the alignment of [`diff_clauses_pydict`].
pub fn diff_program(wrong: &ClauseMap, gold: &ClauseMap) -> Result<EditProgram, PyDictError> {
    let a = align_clauses(wrong, gold, Granularity::ClausePydict)?;
    let stmts = a
        .ops
        .into_iter()
        .map(|op| {
            Ok(match op.kind {
                EditKind::Delete => EditStmt::Pop {
                    path: op.scope,
                    key: PathSeg::Key(op.key),
                },
                _ => EditStmt::Assign {
                    value: entry_sql(op.key, op.new.as_ref().expect("assign has a value"))?,
                    path: child(&op.scope, &[PathSeg::Key(op.key)]),
                },
            })
        })
        .collect::<Result<_, PyDictError>>()?;
    Ok(EditProgram { stmts })
}
