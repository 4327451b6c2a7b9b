//! Exact set match, execution match and McNemar's test.

mod exec;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};
use thiserror::Error;

use crate::sql::{parse_normalized, Cond, Expr, FromClause, JoinCond, Predicate, Query, SchemaInfo, SqlError};

pub use exec::{execution_match, gold_is_ordered, ExecBackend, ExecError, SqliteBackend, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("execution backend unavailable: {0}")]
    Unavailable(String),
    #[error("gold query is invalid: {0}")]
    Gold(SqlError),
    #[error("no outcomes to test")]
    NoOutcomes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub em: bool,
    /// Present iff an execution backend was supplied.
    pub ex: Option<bool>,
}

/// Multiset equality under a custom equivalence.
fn same_bag<T>(a: &[T], b: &[T], eq: impl Fn(&T, &T) -> bool) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    a.iter()
        .all(|x| match (0..b.len()).find(|&j| !used[j] && eq(x, &b[j])) {
            Some(j) => {
                used[j] = true;
                true
            }
            None => false,
        })
}

fn expr_eq(a: &Expr, b: &Expr) -> bool {
    match (a, b) {
        (Expr::Subquery(x), Expr::Subquery(y)) => exact_set_match(x, y),
        (
            Expr::Agg {
                func: f1,
                distinct: d1,
                arg: a1,
            },
            Expr::Agg {
                func: f2,
                distinct: d2,
                arg: a2,
            },
        ) => f1 == f2 && d1 == d2 && expr_eq(a1, a2),
        (
            Expr::Arith {
                op: o1,
                lhs: l1,
                rhs: r1,
            },
            Expr::Arith {
                op: o2,
                lhs: l2,
                rhs: r2,
            },
        ) => o1 == o2 && expr_eq(l1, l2) && expr_eq(r1, r2),
        _ => a == b,
    }
}

fn pred_eq(a: &Predicate, b: &Predicate) -> bool {
    match (a, b) {
        (
            Predicate::Compare {
                lhs: l1,
                op: o1,
                rhs: r1,
            },
            Predicate::Compare {
                lhs: l2,
                op: o2,
                rhs: r2,
            },
        ) => o1 == o2 && expr_eq(l1, l2) && expr_eq(r1, r2),
        (
            Predicate::Between {
                lhs: l1,
                low: lo1,
                high: h1,
            },
            Predicate::Between {
                lhs: l2,
                low: lo2,
                high: h2,
            },
        ) => expr_eq(l1, l2) && expr_eq(lo1, lo2) && expr_eq(h1, h2),
        _ => false,
    }
}

/// Top-level conjuncts compare as a bag; OR subtrees compare in order.
fn cond_eq(a: &Cond, b: &Cond) -> bool {
    match (a, b) {
        (Cond::And(_), _) | (_, Cond::And(_)) => same_bag(&a.conjuncts(), &b.conjuncts(), |x, y| cond_eq(x, y)),
        (Cond::Or(x), Cond::Or(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| cond_eq(p, q)),
        (Cond::Pred(x), Cond::Pred(y)) => pred_eq(x, y),
        _ => false,
    }
}

fn opt_cond_eq(a: &Option<Cond>, b: &Option<Cond>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => cond_eq(x, y),
        _ => false,
    }
}

fn join_eq(a: &JoinCond, b: &JoinCond) -> bool {
    a == b || (a.left == b.right && a.right == b.left)
}

fn from_eq(a: &FromClause, b: &FromClause) -> bool {
    match (a, b) {
        (FromClause::Subquery(x), FromClause::Subquery(y)) => exact_set_match(x, y),
        (FromClause::Tables(x), FromClause::Tables(y)) => {
            let tables = |t: &[crate::sql::JoinedTable]| t.iter().map(|j| j.table.clone()).collect::<Vec<_>>();
            let joins = |t: &[crate::sql::JoinedTable]| t.iter().flat_map(|j| j.on.clone()).collect::<Vec<_>>();
            same_bag(&tables(x), &tables(y), |p, q| p == q) && same_bag(&joins(x), &joins(y), join_eq)
        }
        _ => false,
    }
}

/// Component-wise exact set match of two normalized queries.
pub fn exact_set_match(pred: &Query, gold: &Query) -> bool {
    pred.select.distinct == gold.select.distinct
        && same_bag(&pred.select.items, &gold.select.items, expr_eq)
        && from_eq(&pred.from, &gold.from)
        && opt_cond_eq(&pred.where_, &gold.where_)
        && same_bag(&pred.group_by, &gold.group_by, |a, b| a == b)
        && opt_cond_eq(&pred.having, &gold.having)
        && pred.order_by.len() == gold.order_by.len()
        && pred
            .order_by
            .iter()
            .zip(&gold.order_by)
            .all(|(a, b)| a.dir == b.dir && expr_eq(&a.expr, &b.expr))
        && pred.limit == gold.limit
        && match (&pred.set_op, &gold.set_op) {
            (None, None) => true,
            (Some(a), Some(b)) => a.kind == b.kind && exact_set_match(&a.right, &b.right),
            _ => false,
        }
}

/// EM (and EX when a backend is given) of a predicted query against gold.
/// An unparseable prediction counts as wrong on both metrics.
pub fn evaluate(
    pred_sql: &str,
    gold_sql: &str,
    schema: &SchemaInfo,
    backend: Option<&dyn ExecBackend>,
) -> Result<EvalOutcome, MetricsError> {
    let gold = parse_normalized(gold_sql, schema).map_err(MetricsError::Gold)?;
    let pred = parse_normalized(pred_sql, schema).ok();
    let em = pred.as_ref().is_some_and(|p| exact_set_match(p, &gold));
    let ex = match backend {
        None => None,
        Some(b) => Some(execution_match(pred_sql, gold_sql, &schema.db_id, b)?),
    };
    Ok(EvalOutcome { em, ex })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemar {
    /// First system right, second wrong.
    pub b: u64,
    /// First system wrong, second right.
    pub c: u64,
    pub p: f64,
    /// No discordant pairs, so the test says nothing.
    pub degenerate: bool,
}

/// Exact two-sided McNemar test from discordant counts.
pub fn mcnemar_counts(b: u64, c: u64) -> McNemar {
    let n = b + c;
    if n == 0 {
        return McNemar {
            b,
            c,
            p: 1.0,
            degenerate: true,
        };
    }
    let dist = Binomial::new(0.5, n).expect("p = 0.5 is a valid probability");
    let p = (2.0 * dist.cdf(b.min(c))).min(1.0);
    McNemar {
        b,
        c,
        p,
        degenerate: false,
    }
}

/// McNemar's test over paired outcomes `(a_correct, b_correct)`.
pub fn mcnemar(outcomes: &[(bool, bool)]) -> Result<McNemar, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::NoOutcomes);
    }
    let b = outcomes.iter().filter(|(a, b)| *a && !*b).count() as u64;
    let c = outcomes.iter().filter(|(a, b)| !*a && *b).count() as u64;
    Ok(mcnemar_counts(b, c))
}
