//! Seeded generator of Spider-subset queries over a small concert schema,
//! plus clause-level perturbations for building wrong/gold pairs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sqlfix::sql::{
    AggFunc, ArithOp, CmpOp, ColumnRef, Cond, Expr, FromClause, JoinCond, JoinedTable, OrderDir, OrderItem, Predicate,
    Query, SchemaInfo, Select, SetOp, SetOpKind, TableRef,
};

const TABLES: &[(&str, &[&str])] = &[
    ("singer", &["singer_id", "name", "country", "age"]),
    ("concert", &["concert_id", "concert_name", "stadium_id", "year"]),
    ("stadium", &["stadium_id", "location", "name", "capacity"]),
    ("singer_in_concert", &["concert_id", "singer_id"]),
];

const JOINS: &[(&str, &str, &str)] = &[
    ("concert", "stadium", "stadium_id"),
    ("singer_in_concert", "singer", "singer_id"),
    ("singer_in_concert", "concert", "concert_id"),
];

const WORDS: &[&str] = &["'France'", "'USA'", "'Netherlands'", "'%a%'", "'Joe Sharp'"];

pub fn schema() -> SchemaInfo {
    SchemaInfo::new("concert_singer", TABLES)
}

/// Calls `f` on `q` and then on every nested query, depth first.
fn visit(q: &mut Query, f: &mut dyn FnMut(&mut Query)) {
    fn in_cond(c: &mut Cond, f: &mut dyn FnMut(&mut Query)) {
        match c {
            Cond::Pred(Predicate::Compare { lhs, rhs, .. }) => {
                for e in [lhs, rhs] {
                    if let Expr::Subquery(s) = e {
                        visit(s, f);
                    }
                }
            }
            Cond::Pred(Predicate::Between { .. }) => {}
            Cond::And(cs) | Cond::Or(cs) => cs.iter_mut().for_each(|c| in_cond(c, f)),
        }
    }
    f(q);
    if let FromClause::Subquery(s) = &mut q.from {
        visit(s, f);
    }
    if let Some(c) = &mut q.where_ {
        in_cond(c, f);
    }
    if let Some(c) = &mut q.having {
        in_cond(c, f);
    }
    if let Some(s) = &mut q.set_op {
        visit(&mut s.right, f);
    }
}

pub struct Fuzzer {
    rng: ChaCha8Rng,
}

fn columns_of(tables: &[&str]) -> Vec<Expr> {
    TABLES
        .iter()
        .filter(|(t, _)| tables.contains(t))
        .flat_map(|(t, cols)| cols.iter().map(move |c| Expr::col(t, c)))
        .collect()
}

fn scope_tables(q: &Query) -> Vec<&str> {
    match &q.from {
        FromClause::Tables(ts) => ts.iter().map(|t| t.table.name.as_str()).collect(),
        FromClause::Subquery(_) => Vec::new(),
    }
}

fn col_ref(e: &Expr) -> ColumnRef {
    match e {
        Expr::Column(c) => c.clone(),
        _ => unreachable!("only columns are grouped"),
    }
}

impl Fuzzer {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn pick<'a, T>(&mut self, xs: &'a [T]) -> &'a T {
        xs.choose(&mut self.rng).unwrap()
    }

    fn number(&mut self) -> Expr {
        Expr::Number(self.rng.gen_range(1..100).to_string())
    }

    fn pick_tables(&mut self) -> Vec<JoinedTable> {
        let plain = |name: &str| JoinedTable {
            table: TableRef {
                name: name.to_string(),
                alias: None,
            },
            on: Vec::new(),
        };
        if self.chance(0.3) {
            let (a, b, key) = *self.pick(JOINS);
            let mut second = plain(b);
            second.on.push(JoinCond {
                left: ColumnRef::qualified(a, key),
                right: ColumnRef::qualified(b, key),
            });
            vec![plain(a), second]
        } else {
            let (t, _) = *self.pick(TABLES);
            vec![plain(t)]
        }
    }

    fn agg(&mut self, cols: &[Expr]) -> Expr {
        let func = *self.pick(&AggFunc::ALL);
        if func == AggFunc::Count && self.chance(0.4) {
            return Expr::agg(func, Expr::Star);
        }
        Expr::Agg {
            func,
            distinct: func == AggFunc::Count && self.chance(0.2),
            arg: Box::new(self.pick(cols).clone()),
        }
    }

    fn select_items(&mut self, cols: &[Expr]) -> Select {
        if cols.is_empty() {
            let item = if self.chance(0.5) {
                Expr::Star
            } else {
                Expr::agg(AggFunc::Count, Expr::Star)
            };
            return Select {
                distinct: false,
                items: vec![item],
            };
        }
        let n = self.rng.gen_range(1..=3);
        let mut items = Vec::new();
        for _ in 0..n {
            let r: f64 = self.rng.gen();
            let e = if r < 0.6 {
                self.pick(cols).clone()
            } else if r < 0.93 {
                self.agg(cols)
            } else {
                Expr::Arith {
                    op: *self.pick(&[ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div]),
                    lhs: Box::new(self.pick(cols).clone()),
                    rhs: Box::new(self.pick(cols).clone()),
                }
            };
            if !items.contains(&e) {
                items.push(e);
            }
        }
        Select {
            distinct: self.chance(0.1),
            items,
        }
    }

    /// `select <one thing> from <table>` for use inside a predicate.
    fn scalar_subquery(&mut self, aggregate: bool) -> Query {
        let tables = self.pick_tables();
        let names: Vec<&str> = tables.iter().map(|t| t.table.name.as_str()).collect();
        let cols = columns_of(&names);
        let item = if aggregate {
            self.agg(&cols)
        } else {
            self.pick(&cols).clone()
        };
        let mut q = Query::simple(vec![item], "x");
        q.from = FromClause::Tables(tables);
        if self.chance(0.4) {
            q.where_ = Some(self.cond(&cols, 2));
        }
        if !aggregate && self.chance(0.2) {
            q.order_by = vec![OrderItem {
                expr: self.pick(&cols).clone(),
                dir: OrderDir::Desc,
            }];
            q.limit = Some(self.rng.gen_range(1..4));
        }
        q
    }

    fn pred(&mut self, cols: &[Expr], depth: usize) -> Predicate {
        let lhs = self.pick(cols).clone();
        let r: f64 = self.rng.gen();
        if depth < 2 && r < 0.12 {
            let op = if self.chance(0.7) { CmpOp::In } else { CmpOp::NotIn };
            return Predicate::Compare {
                lhs,
                op,
                rhs: Expr::Subquery(Box::new(self.scalar_subquery(false))),
            };
        }
        if depth < 2 && r < 0.22 {
            let op = *self.pick(&[CmpOp::Gt, CmpOp::Lt, CmpOp::Eq]);
            return Predicate::Compare {
                lhs,
                op,
                rhs: Expr::Subquery(Box::new(self.scalar_subquery(true))),
            };
        }
        if r < 0.32 {
            let a = self.rng.gen_range(1..50);
            let b = a + self.rng.gen_range(1..50);
            return Predicate::Between {
                lhs,
                low: Expr::Number(a.to_string()),
                high: Expr::Number(b.to_string()),
            };
        }
        if r < 0.55 {
            let op = *self.pick(&[CmpOp::Eq, CmpOp::Ne, CmpOp::Like, CmpOp::NotLike]);
            return Predicate::Compare {
                lhs,
                op,
                rhs: Expr::Str(self.pick(WORDS).to_string()),
            };
        }
        let op = *self.pick(&[CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Gt, CmpOp::Le, CmpOp::Ge]);
        Predicate::Compare {
            lhs,
            op,
            rhs: self.number(),
        }
    }

    fn cond(&mut self, cols: &[Expr], depth: usize) -> Cond {
        let n = self.rng.gen_range(1..=3);
        let preds: Vec<Cond> = (0..n).map(|_| Cond::Pred(self.pred(cols, depth))).collect();
        match n {
            1 => preds.into_iter().next().unwrap(),
            _ if self.chance(0.25) => Cond::Or(preds),
            _ => Cond::And(preds),
        }
    }

    fn having(&mut self, cols: &[Expr], depth: usize) -> Cond {
        let lhs = self.agg(cols);
        let rhs = if depth < 2 && self.chance(0.2) {
            Expr::Subquery(Box::new(self.scalar_subquery(true)))
        } else {
            self.number()
        };
        Cond::Pred(Predicate::Compare {
            lhs,
            op: *self.pick(&[CmpOp::Gt, CmpOp::Ge, CmpOp::Lt, CmpOp::Eq]),
            rhs,
        })
    }

    fn order_by(&mut self, cols: &[Expr]) -> Vec<OrderItem> {
        let n = self.rng.gen_range(1..=2);
        (0..n)
            .map(|_| OrderItem {
                expr: if self.chance(0.25) {
                    self.agg(cols)
                } else {
                    self.pick(cols).clone()
                },
                dir: if self.chance(0.5) {
                    OrderDir::Asc
                } else {
                    OrderDir::Desc
                },
            })
            .collect()
    }

    /// A random query; `depth` 0 is the outermost.
    pub fn query(&mut self, depth: usize) -> Query {
        if depth == 0 && self.chance(0.06) {
            let inner = self.query(1);
            let mut q = Query::simple(vec![Expr::agg(AggFunc::Count, Expr::Star)], "x");
            q.from = FromClause::Subquery(Box::new(inner));
            if self.chance(0.3) {
                q.select.items = vec![Expr::Star];
            }
            return q;
        }
        let tables = self.pick_tables();
        let names: Vec<&str> = tables.iter().map(|t| t.table.name.as_str()).collect();
        let cols = columns_of(&names);
        let mut q = Query::simple(Vec::new(), "x");
        q.select = self.select_items(&cols);
        q.from = FromClause::Tables(tables);
        if self.chance(0.5) {
            q.where_ = Some(self.cond(&cols, depth));
        }
        if self.chance(0.25) {
            q.group_by = vec![col_ref(self.pick(&cols))];
            if self.chance(0.4) {
                q.having = Some(self.having(&cols, depth));
            }
        }
        if self.chance(0.3) {
            q.order_by = self.order_by(&cols);
            if self.chance(0.5) {
                q.limit = Some(self.rng.gen_range(1..6));
            }
        }
        if depth == 0 && self.chance(0.12) {
            let kind = *self.pick(&[SetOpKind::Union, SetOpKind::Intersect, SetOpKind::Except]);
            q.set_op = Some(SetOp {
                kind,
                right: Box::new(self.query(1)),
            });
        }
        q
    }

    /// One random clause edit in one scope of `q`. Returns false when the
    /// chosen edit did not apply.
    fn edit_once(&mut self, q: &mut Query) -> bool {
        let mut count = 0;
        visit(q, &mut |_| count += 1);
        let i = if count > 1 && self.chance(0.4) {
            self.rng.gen_range(1..count)
        } else {
            0
        };
        let (mut n, mut applied) = (0, false);
        visit(q, &mut |s| {
            if n == i {
                applied = self.edit_scope(s, i == 0);
            }
            n += 1;
        });
        applied
    }

    fn edit_scope(&mut self, s: &mut Query, root: bool) -> bool {
        let i = usize::from(!root);
        let cols = columns_of(&scope_tables(s));
        let depth = if i == 0 { 0 } else { 1 };
        if cols.is_empty() {
            s.select = self.select_items(&cols);
            return true;
        }
        match self.rng.gen_range(0..6) {
            0 => {
                s.select = self.select_items(&cols);
            }
            1 => {
                s.where_ = match s.where_ {
                    Some(_) if self.chance(0.4) => None,
                    _ => Some(self.cond(&cols, depth + 1)),
                };
            }
            2 => {
                if s.group_by.is_empty() || self.chance(0.3) {
                    s.group_by = vec![col_ref(self.pick(&cols))];
                    s.having = None;
                } else if self.chance(0.5) {
                    s.group_by.clear();
                    s.having = None;
                } else {
                    s.having = match s.having {
                        Some(_) if self.chance(0.5) => None,
                        _ => Some(self.having(&cols, depth + 1)),
                    };
                }
            }
            3 => {
                if s.order_by.is_empty() || self.chance(0.6) {
                    s.order_by = self.order_by(&cols);
                } else {
                    s.order_by.clear();
                    s.limit = None;
                }
            }
            4 => {
                s.limit = match s.limit {
                    Some(_) if self.chance(0.4) => None,
                    _ => Some(self.rng.gen_range(1..10)),
                };
            }
            _ => {
                if i != 0 {
                    return false;
                }
                s.set_op = match s.set_op {
                    Some(_) if self.chance(0.5) => None,
                    _ => {
                        let kind = *self.pick(&[SetOpKind::Union, SetOpKind::Intersect, SetOpKind::Except]);
                        Some(SetOp {
                            kind,
                            right: Box::new(self.query(1)),
                        })
                    }
                };
            }
        }
        true
    }

    /// Applies 1 to 4 clause edits to a copy of `q`; the result always
    /// differs from `q`.
    pub fn perturb(&mut self, q: &Query) -> Query {
        loop {
            let mut p = q.clone();
            let n = self.rng.gen_range(1..=4);
            let mut done = 0;
            while done < n {
                if self.edit_once(&mut p) {
                    done += 1;
                }
            }
            if &p != q {
                return p;
            }
        }
    }
}
