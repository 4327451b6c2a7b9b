use super::{ClauseKey, ClauseMap, ClauseValue, Composite};
use crate::sql::{Emitter, Query, SetOpKind};

/// Decomposes a normalized query into its clause map, depth first: every
/// subquery is decomposed on its own and referenced from its clause by a
/// `subqueryN` placeholder.
pub fn decompose(q: &Query) -> ClauseMap {
    let mut map = ClauseMap::new();
    let mut clause = |key: ClauseKey, emit: for<'q> fn(&mut Emitter<'q>, &'q Query)| {
        let mut e = Emitter::with_placeholders();
        emit(&mut e, q);
        let (text, subs) = e.finish_with_subqueries();
        let value = if subs.is_empty() {
            ClauseValue::Text(text)
        } else {
            ClauseValue::Composite(Composite {
                clause: text,
                subqueries: subs.into_iter().map(decompose).collect(),
            })
        };
        map.insert(key, value);
    };
    clause(ClauseKey::Select, |e, q| e.select(q));
    clause(ClauseKey::From, |e, q| e.from(q));
    if q.where_.is_some() {
        clause(ClauseKey::Where, |e, q| e.where_(q));
    }
    if !q.group_by.is_empty() {
        clause(ClauseKey::GroupBy, |e, q| e.group_by(q));
    }
    if q.having.is_some() {
        clause(ClauseKey::Having, |e, q| e.having(q));
    }
    if !q.order_by.is_empty() {
        clause(ClauseKey::OrderBy, |e, q| e.order_by(q));
    }
    if q.limit.is_some() {
        clause(ClauseKey::Limit, |e, q| e.limit(q));
    }
    if let Some(op) = &q.set_op {
        let key = match op.kind {
            SetOpKind::Intersect => ClauseKey::Intersect,
            SetOpKind::Union => ClauseKey::Union,
            SetOpKind::Except => ClauseKey::Except,
        };
        map.insert(key, ClauseValue::Query(Box::new(decompose(&op.right))));
    }
    map
}
