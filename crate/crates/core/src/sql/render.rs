use super::ast::*;
use super::lexer::join_tokens;

/// Renders a query in canonical text form.
pub fn render(q: &Query) -> String {
    let mut e = Emitter::inline();
    e.query(q);
    e.finish()
}

/// Token emitter. In placeholder mode, subqueries become `(subqueryN)` and
/// are collected in order of appearance instead of being inlined.
pub(crate) struct Emitter<'q> {
    tokens: Vec<String>,
    placeholders: Option<Vec<&'q Query>>,
}

impl<'q> Emitter<'q> {
    pub(crate) fn inline() -> Self {
        Self {
            tokens: Vec::new(),
            placeholders: None,
        }
    }

    pub(crate) fn with_placeholders() -> Self {
        Self {
            tokens: Vec::new(),
            placeholders: Some(Vec::new()),
        }
    }

    pub(crate) fn finish(self) -> String {
        join_tokens(self.tokens.iter().map(String::as_str))
    }

    pub(crate) fn finish_with_subqueries(self) -> (String, Vec<&'q Query>) {
        let subs = self.placeholders.clone().unwrap_or_default();
        (join_tokens(self.tokens.iter().map(String::as_str)), subs)
    }

    fn push(&mut self, t: &str) {
        self.tokens.push(t.to_string());
    }

    fn subquery(&mut self, q: &'q Query) {
        self.push("(");
        match &mut self.placeholders {
            Some(subs) => {
                let id = format!("subquery{}", subs.len());
                subs.push(q);
                self.tokens.push(id);
            }
            None => self.query(q),
        }
        self.push(")");
    }

    pub(crate) fn query(&mut self, q: &'q Query) {
        self.select(q);
        self.from(q);
        if q.where_.is_some() {
            self.where_(q);
        }
        if !q.group_by.is_empty() {
            self.group_by(q);
        }
        if q.having.is_some() {
            self.having(q);
        }
        if !q.order_by.is_empty() {
            self.order_by(q);
        }
        if q.limit.is_some() {
            self.limit(q);
        }
        if let Some(op) = &q.set_op {
            self.push(op.kind.as_str());
            self.query(&op.right);
        }
    }

    pub(crate) fn select(&mut self, q: &'q Query) {
        self.push("select");
        if q.select.distinct {
            self.push("distinct");
        }
        for (i, item) in q.select.items.iter().enumerate() {
            if i > 0 {
                self.push(",");
            }
            self.expr(item);
        }
    }

    pub(crate) fn from(&mut self, q: &'q Query) {
        self.push("from");
        match &q.from {
            FromClause::Subquery(sub) => self.subquery(sub),
            FromClause::Tables(tables) => {
                for (i, jt) in tables.iter().enumerate() {
                    if i > 0 {
                        self.push("join");
                    }
                    self.push(&jt.table.name);
                    if let Some(alias) = &jt.table.alias {
                        self.push("as");
                        self.push(alias);
                    }
                    for (k, c) in jt.on.iter().enumerate() {
                        self.push(if k == 0 { "on" } else { "and" });
                        self.push(&c.left.text());
                        self.push("=");
                        self.push(&c.right.text());
                    }
                }
            }
        }
    }

    pub(crate) fn where_(&mut self, q: &'q Query) {
        if let Some(c) = &q.where_ {
            self.push("where");
            self.cond(c, false);
        }
    }

    pub(crate) fn group_by(&mut self, q: &'q Query) {
        self.push("group");
        self.push("by");
        for (i, c) in q.group_by.iter().enumerate() {
            if i > 0 {
                self.push(",");
            }
            self.push(&c.text());
        }
    }

    pub(crate) fn having(&mut self, q: &'q Query) {
        if let Some(c) = &q.having {
            self.push("having");
            self.cond(c, false);
        }
    }

    pub(crate) fn order_by(&mut self, q: &'q Query) {
        self.push("order");
        self.push("by");
        for (i, item) in q.order_by.iter().enumerate() {
            if i > 0 {
                self.push(",");
            }
            self.expr(&item.expr);
            if item.dir == OrderDir::Desc {
                self.push("desc");
            }
        }
    }

    pub(crate) fn limit(&mut self, q: &'q Query) {
        if let Some(n) = q.limit {
            self.push("limit");
            self.tokens.push(n.to_string());
        }
    }

    fn cond(&mut self, c: &'q Cond, inside_and: bool) {
        match c {
            Cond::Pred(p) => self.predicate(p),
            Cond::And(parts) => {
                for (i, part) in parts.iter().enumerate() {
                    if i > 0 {
                        self.push("and");
                    }
                    self.cond(part, true);
                }
            }
            Cond::Or(parts) => {
                if inside_and {
                    self.push("(");
                }
                for (i, part) in parts.iter().enumerate() {
                    if i > 0 {
                        self.push("or");
                    }
                    self.cond(part, false);
                }
                if inside_and {
                    self.push(")");
                }
            }
        }
    }

    fn predicate(&mut self, p: &'q Predicate) {
        match p {
            Predicate::Compare { lhs, op, rhs } => {
                self.expr(lhs);
                for word in op.as_str().split(' ') {
                    self.push(word);
                }
                self.expr(rhs);
            }
            Predicate::Between { lhs, low, high } => {
                self.expr(lhs);
                self.push("between");
                self.expr(low);
                self.push("and");
                self.expr(high);
            }
        }
    }

    pub(crate) fn expr(&mut self, e: &'q Expr) {
        match e {
            Expr::Column(c) => self.tokens.push(c.text()),
            Expr::Star => self.push("*"),
            Expr::Number(n) => self.push(n),
            Expr::Str(s) => self.push(s),
            Expr::Agg { func, distinct, arg } => {
                self.push(func.as_str());
                self.push("(");
                if *distinct {
                    self.push("distinct");
                }
                self.expr(arg);
                self.push(")");
            }
            Expr::Arith { op, lhs, rhs } => {
                let wrap_l = matches!(&**lhs, Expr::Arith { op: l, .. } if l.precedence() < op.precedence());
                let wrap_r = matches!(&**rhs, Expr::Arith { op: r, .. } if r.precedence() <= op.precedence());
                self.wrapped(lhs, wrap_l);
                self.push(op.as_str());
                self.wrapped(rhs, wrap_r);
            }
            Expr::Subquery(q) => self.subquery(q),
        }
    }

    fn wrapped(&mut self, e: &'q Expr, wrap: bool) {
        if wrap {
            self.push("(");
        }
        self.expr(e);
        if wrap {
            self.push(")");
        }
    }
}
