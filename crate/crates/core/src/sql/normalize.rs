use super::ast::*;
use super::parser::flatten;
use super::schema::SchemaInfo;
use super::SqlError;

/// Resolves table references and qualifies every column.
///
/// Aliases are dropped for tables that occur once in their FROM clause and
/// kept (lowercased) for tables that occur more than once. Unqualified
/// columns are qualified when exactly one FROM table has them.
pub fn normalize(q: &Query, schema: &SchemaInfo) -> Result<Query, SqlError> {
    Normalizer { schema }.query(q, &[])
}

struct Normalizer<'s> {
    schema: &'s SchemaInfo,
}

struct Entry {
    name: String,
    /// Name the query uses to refer to this entry.
    visible: String,
    repeated: bool,
}

enum Scope {
    Tables(Vec<Entry>),
    /// Output column names of a FROM subquery.
    Derived(Vec<String>),
}

impl Scope {
    fn qualifier_for(&self, entry: &Entry) -> String {
        if entry.repeated {
            entry.visible.clone()
        } else {
            entry.name.clone()
        }
    }
}

fn lower(s: &str) -> String {
    s.to_ascii_lowercase()
}

impl Normalizer<'_> {
    fn query(&self, q: &Query, outer: &[&Scope]) -> Result<Query, SqlError> {
        let (from, scope) = self.from(&q.from, outer)?;
        let mut chain: Vec<&Scope> = outer.to_vec();
        chain.push(&scope);

        let from = match from {
            FromClause::Tables(tables) => FromClause::Tables(
                tables
                    .into_iter()
                    .map(|jt| {
                        let on = jt
                            .on
                            .iter()
                            .map(|c| {
                                Ok(JoinCond {
                                    left: self.column(&c.left, &chain)?,
                                    right: self.column(&c.right, &chain)?,
                                })
                            })
                            .collect::<Result<_, SqlError>>()?;
                        Ok(JoinedTable { table: jt.table, on })
                    })
                    .collect::<Result<_, SqlError>>()?,
            ),
            other => other,
        };

        let items = q
            .select
            .items
            .iter()
            .map(|e| self.expr(e, &chain))
            .collect::<Result<_, _>>()?;
        let where_ = q.where_.as_ref().map(|c| self.cond(c, &chain)).transpose()?;
        let group_by = q
            .group_by
            .iter()
            .map(|c| self.column(c, &chain))
            .collect::<Result<_, _>>()?;
        let having = q.having.as_ref().map(|c| self.cond(c, &chain)).transpose()?;
        let order_by = q
            .order_by
            .iter()
            .map(|o| {
                Ok(OrderItem {
                    expr: self.expr(&o.expr, &chain)?,
                    dir: o.dir,
                })
            })
            .collect::<Result<_, SqlError>>()?;
        let set_op = match &q.set_op {
            Some(op) => Some(SetOp {
                kind: op.kind,
                right: Box::new(self.query(&op.right, outer)?),
            }),
            None => None,
        };
        Ok(Query {
            select: Select {
                distinct: q.select.distinct,
                items,
            },
            from,
            where_,
            group_by,
            having,
            order_by,
            limit: q.limit,
            set_op,
        })
    }

    fn from(&self, from: &FromClause, outer: &[&Scope]) -> Result<(FromClause, Scope), SqlError> {
        match from {
            FromClause::Subquery(sub) => {
                let sub = self.query(sub, outer)?;
                let outputs = sub
                    .select
                    .items
                    .iter()
                    .filter_map(|e| match e {
                        Expr::Column(c) => Some(c.column.clone()),
                        _ => None,
                    })
                    .collect();
                Ok((FromClause::Subquery(Box::new(sub)), Scope::Derived(outputs)))
            }
            FromClause::Tables(tables) => {
                let mut entries: Vec<Entry> = Vec::with_capacity(tables.len());
                for jt in tables {
                    let name = lower(&jt.table.name);
                    if self.schema.table(&name).is_none() {
                        return Err(SqlError::UnknownTable(name));
                    }
                    let visible = jt.table.alias.as_deref().map(lower).unwrap_or_else(|| name.clone());
                    if entries.iter().any(|e| e.visible == visible) {
                        return Err(SqlError::AliasCollision(visible));
                    }
                    entries.push(Entry {
                        name,
                        visible,
                        repeated: false,
                    });
                }
                for i in 0..entries.len() {
                    let n = entries.iter().filter(|e| e.name == entries[i].name).count();
                    entries[i].repeated = n > 1;
                }
                let out = tables
                    .iter()
                    .zip(&entries)
                    .map(|(jt, e)| JoinedTable {
                        table: TableRef {
                            name: e.name.clone(),
                            alias: if e.repeated {
                                jt.table.alias.as_deref().map(lower)
                            } else {
                                None
                            },
                        },
                        on: jt.on.clone(),
                    })
                    .collect();
                Ok((FromClause::Tables(out), Scope::Tables(entries)))
            }
        }
    }

    fn column(&self, c: &ColumnRef, chain: &[&Scope]) -> Result<ColumnRef, SqlError> {
        let column = lower(&c.column);
        match &c.qualifier {
            Some(q) => {
                let q = lower(q);
                for scope in chain.iter().rev() {
                    let Scope::Tables(entries) = scope else { continue };
                    let hit = entries.iter().find(|e| e.visible == q).or_else(|| {
                        // a real table name still resolves when the table
                        // occurs once, even if it was aliased
                        entries.iter().find(|e| e.name == q && !e.repeated)
                    });
                    if let Some(entry) = hit {
                        if !self.schema.has_column(&entry.name, &column) {
                            return Err(SqlError::UnknownColumn(format!("{q}.{column}")));
                        }
                        return Ok(ColumnRef {
                            qualifier: Some(scope.qualifier_for(entry)),
                            column,
                        });
                    }
                    if entries.iter().any(|e| e.name == q && e.repeated) {
                        return Err(SqlError::AmbiguousColumn(format!("{q}.{column}")));
                    }
                }
                Err(SqlError::UnknownTable(q))
            }
            None => {
                for scope in chain.iter().rev() {
                    match scope {
                        Scope::Tables(entries) => {
                            let hits: Vec<&Entry> = entries
                                .iter()
                                .filter(|e| self.schema.has_column(&e.name, &column))
                                .collect();
                            match hits.as_slice() {
                                [] => continue,
                                [one] => {
                                    return Ok(ColumnRef {
                                        qualifier: Some(scope.qualifier_for(one)),
                                        column,
                                    })
                                }
                                _ => return Err(SqlError::AmbiguousColumn(column)),
                            }
                        }
                        Scope::Derived(outputs) => {
                            if outputs.contains(&column) {
                                return Ok(ColumnRef {
                                    qualifier: None,
                                    column,
                                });
                            }
                        }
                    }
                }
                Err(SqlError::UnknownColumn(column))
            }
        }
    }

    fn expr(&self, e: &Expr, chain: &[&Scope]) -> Result<Expr, SqlError> {
        Ok(match e {
            Expr::Column(c) => Expr::Column(self.column(c, chain)?),
            Expr::Star => Expr::Star,
            Expr::Number(n) => Expr::Number(n.clone()),
            Expr::Str(s) => Expr::Str(s.clone()),
            Expr::Agg { func, distinct, arg } => Expr::Agg {
                func: *func,
                distinct: *distinct,
                arg: Box::new(self.expr(arg, chain)?),
            },
            Expr::Arith { op, lhs, rhs } => Expr::Arith {
                op: *op,
                lhs: Box::new(self.expr(lhs, chain)?),
                rhs: Box::new(self.expr(rhs, chain)?),
            },
            Expr::Subquery(q) => Expr::Subquery(Box::new(self.query(q, chain)?)),
        })
    }

    fn cond(&self, c: &Cond, chain: &[&Scope]) -> Result<Cond, SqlError> {
        Ok(match c {
            Cond::Pred(Predicate::Compare { lhs, op, rhs }) => Cond::Pred(Predicate::Compare {
                lhs: self.expr(lhs, chain)?,
                op: *op,
                rhs: self.expr(rhs, chain)?,
            }),
            Cond::Pred(Predicate::Between { lhs, low, high }) => Cond::Pred(Predicate::Between {
                lhs: self.expr(lhs, chain)?,
                low: self.expr(low, chain)?,
                high: self.expr(high, chain)?,
            }),
            Cond::And(parts) => flatten(
                parts.iter().map(|p| self.cond(p, chain)).collect::<Result<_, _>>()?,
                true,
            ),
            Cond::Or(parts) => flatten(
                parts.iter().map(|p| self.cond(p, chain)).collect::<Result<_, _>>()?,
                false,
            ),
        })
    }
}
