use super::ast::*;
use super::lexer::{Token, TokenKind};
use super::schema::SchemaInfo;
use super::SqlError;

/// Parses a token stream into a [`Query`]. Table names are checked against
/// the schema; column resolution happens in [`super::normalize`].
pub fn parse(tokens: &[Token], schema: &SchemaInfo) -> Result<Query, SqlError> {
    let mut p = Parser {
        tokens,
        pos: 0,
        schema: Some(schema),
    };
    p.parse_statement()
}

/// Parses without a schema: table names are not checked.
pub fn parse_unchecked(tokens: &[Token]) -> Result<Query, SqlError> {
    let mut p = Parser {
        tokens,
        pos: 0,
        schema: None,
    };
    p.parse_statement()
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    schema: Option<&'a SchemaInfo>,
}

type PResult<T> = Result<T, SqlError>;

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&'a Token> {
        self.tokens.get(self.pos + n)
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(SqlError::Syntax {
            position: self.pos + 1,
            message: message.into(),
        })
    }

    fn at_keyword(&self, kw: &str) -> bool {
        self.peek().map(|t| t.is_keyword(kw)).unwrap_or(false)
    }

    fn at_punct(&self, p: &str) -> bool {
        self.peek().map(|t| t.is_punct(p)).unwrap_or(false)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            self.error(format!("expected `{kw}`"))
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.error(format!("expected `{p}`"))
        }
    }

    fn parse_statement(&mut self) -> PResult<Query> {
        let q = self.parse_query()?;
        self.eat_punct(";");
        if self.peek().is_some() {
            return self.error("unexpected trailing input");
        }
        Ok(q)
    }

    fn parse_query(&mut self) -> PResult<Query> {
        self.expect_keyword("select")?;
        let distinct = self.eat_keyword("distinct");
        let mut items = vec![self.parse_select_item()?];
        while self.eat_punct(",") {
            items.push(self.parse_select_item()?);
        }
        self.expect_keyword("from")?;
        let from = self.parse_from()?;
        let where_ = if self.eat_keyword("where") {
            Some(self.parse_cond()?)
        } else {
            None
        };
        let mut group_by = Vec::new();
        if self.eat_keyword("group") {
            self.expect_keyword("by")?;
            group_by.push(self.parse_column()?);
            while self.eat_punct(",") {
                group_by.push(self.parse_column()?);
            }
        }
        let having = if self.eat_keyword("having") {
            Some(self.parse_cond()?)
        } else {
            None
        };
        let mut order_by = Vec::new();
        if self.eat_keyword("order") {
            self.expect_keyword("by")?;
            loop {
                let expr = self.parse_expr()?;
                let dir = if self.eat_keyword("desc") {
                    OrderDir::Desc
                } else {
                    self.eat_keyword("asc");
                    OrderDir::Asc
                };
                order_by.push(OrderItem { expr, dir });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        let limit = if self.eat_keyword("limit") {
            match self.peek() {
                Some(t) if t.kind == TokenKind::NumberLiteral => match t.text.parse::<u64>() {
                    Ok(n) => {
                        self.pos += 1;
                        Some(n)
                    }
                    Err(_) => return self.error("limit must be a non-negative integer"),
                },
                _ => return self.error("expected limit count"),
            }
        } else {
            None
        };
        let kind = match self.peek() {
            Some(t) if t.is_keyword("intersect") => Some(SetOpKind::Intersect),
            Some(t) if t.is_keyword("union") => Some(SetOpKind::Union),
            Some(t) if t.is_keyword("except") => Some(SetOpKind::Except),
            _ => None,
        };
        let set_op = match kind {
            Some(kind) => {
                self.pos += 1;
                Some(SetOp {
                    kind,
                    right: Box::new(self.parse_query()?),
                })
            }
            None => None,
        };
        Ok(Query {
            select: Select { distinct, items },
            from,
            where_,
            group_by,
            having,
            order_by,
            limit,
            set_op,
        })
    }

    fn parse_select_item(&mut self) -> PResult<Expr> {
        if self.peek().map(|t| t.kind == TokenKind::Star).unwrap_or(false) {
            self.pos += 1;
            return Ok(Expr::Star);
        }
        self.parse_expr()
    }

    fn parse_from(&mut self) -> PResult<FromClause> {
        if self.at_punct("(") && self.peek_at(1).map(|t| t.is_keyword("select")).unwrap_or(false) {
            self.pos += 1;
            let q = self.parse_query()?;
            self.expect_punct(")")?;
            return Ok(FromClause::Subquery(Box::new(q)));
        }
        let mut tables = vec![JoinedTable {
            table: self.parse_table_ref()?,
            on: Vec::new(),
        }];
        loop {
            if !(self.eat_keyword("join") || self.eat_punct(",")) {
                break;
            }
            let table = self.parse_table_ref()?;
            let mut on = Vec::new();
            if self.eat_keyword("on") {
                loop {
                    let left = self.parse_column()?;
                    self.expect_punct("=")?;
                    let right = self.parse_column()?;
                    on.push(JoinCond { left, right });
                    // `and` continues the join condition only when another
                    // column equality follows.
                    let continues = self.at_keyword("and")
                        && matches!(self.peek_at(1), Some(t) if t.kind == TokenKind::Identifier)
                        && matches!(self.peek_at(2), Some(t) if t.is_punct("="))
                        && matches!(self.peek_at(3), Some(t) if t.kind == TokenKind::Identifier);
                    if !continues {
                        break;
                    }
                    self.pos += 1;
                }
            }
            tables.push(JoinedTable { table, on });
        }
        Ok(FromClause::Tables(tables))
    }

    fn parse_table_ref(&mut self) -> PResult<TableRef> {
        let name = match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier && !t.text.contains('.') => t.text.clone(),
            _ => return self.error("expected table name"),
        };
        if let Some(schema) = self.schema {
            if schema.table(&name).is_none() {
                return Err(SqlError::UnknownTable(name));
            }
        }
        self.pos += 1;
        let has_as = self.eat_keyword("as");
        let alias = match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier && !t.text.contains('.') => {
                self.pos += 1;
                Some(t.text.clone())
            }
            _ if has_as => return self.error("expected alias after `as`"),
            _ => None,
        };
        Ok(TableRef { name, alias })
    }

    fn parse_column(&mut self) -> PResult<ColumnRef> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                self.pos += 1;
                Ok(ColumnRef::parse(&t.text))
            }
            _ => self.error("expected column"),
        }
    }

    fn parse_cond(&mut self) -> PResult<Cond> {
        let mut parts = vec![self.parse_and()?];
        while self.eat_keyword("or") {
            parts.push(self.parse_and()?);
        }
        Ok(flatten(parts, false))
    }

    fn parse_and(&mut self) -> PResult<Cond> {
        let mut parts = vec![self.parse_cond_atom()?];
        while self.eat_keyword("and") {
            parts.push(self.parse_cond_atom()?);
        }
        Ok(flatten(parts, true))
    }

    fn parse_cond_atom(&mut self) -> PResult<Cond> {
        let opens_subquery = self.peek_at(1).map(|t| t.is_keyword("select")).unwrap_or(false);
        if self.at_punct("(") && !opens_subquery {
            let save = self.pos;
            self.pos += 1;
            if let Ok(c) = self.parse_cond() {
                if self.eat_punct(")") {
                    return Ok(c);
                }
            }
            // parenthesized arithmetic on the left of a predicate
            self.pos = save;
        }
        Ok(Cond::Pred(self.parse_predicate()?))
    }

    fn parse_predicate(&mut self) -> PResult<Predicate> {
        let lhs = self.parse_expr()?;
        let negated = self.eat_keyword("not");
        if self.eat_keyword("between") {
            if negated {
                return self.error("`not between` is not supported");
            }
            let low = self.parse_expr()?;
            self.expect_keyword("and")?;
            let high = self.parse_expr()?;
            return Ok(Predicate::Between { lhs, low, high });
        }
        let op = match self.peek() {
            Some(t) if t.is_keyword("in") => {
                if negated {
                    CmpOp::NotIn
                } else {
                    CmpOp::In
                }
            }
            Some(t) if t.is_keyword("like") => {
                if negated {
                    CmpOp::NotLike
                } else {
                    CmpOp::Like
                }
            }
            Some(t) if !negated && t.kind == TokenKind::Operator => match t.text.as_str() {
                "=" => CmpOp::Eq,
                "!=" | "<>" => CmpOp::Ne,
                "<" => CmpOp::Lt,
                ">" => CmpOp::Gt,
                "<=" => CmpOp::Le,
                ">=" => CmpOp::Ge,
                _ => return self.error("expected comparison operator"),
            },
            _ => return self.error("expected comparison operator"),
        };
        self.pos += 1;
        let rhs = self.parse_expr()?;
        if matches!(op, CmpOp::In | CmpOp::NotIn) && !matches!(rhs, Expr::Subquery(_)) {
            return self.error("`in` requires a subquery");
        }
        Ok(Predicate::Compare { lhs, op, rhs })
    }

    fn parse_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.parse_term()?;
        loop {
            let op = if self.at_punct("+") {
                ArithOp::Add
            } else if self.at_punct("-") {
                ArithOp::Sub
            } else {
                break;
            };
            self.pos += 1;
            let rhs = self.parse_term()?;
            lhs = Expr::Arith {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn parse_term(&mut self) -> PResult<Expr> {
        let mut lhs = self.parse_factor()?;
        loop {
            let op = match self.peek() {
                Some(t) if t.kind == TokenKind::Star => ArithOp::Mul,
                Some(t) if t.is_punct("/") => ArithOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.parse_factor()?;
            lhs = Expr::Arith {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn parse_factor(&mut self) -> PResult<Expr> {
        let Some(tok) = self.peek() else {
            return self.error("unexpected end of input");
        };
        match tok.kind {
            TokenKind::Identifier => {
                if let Some(func) = AggFunc::from_name(&tok.text) {
                    if self.peek_at(1).map(|t| t.is_punct("(")).unwrap_or(false) {
                        self.pos += 2;
                        let distinct = self.eat_keyword("distinct");
                        let arg = if self.peek().map(|t| t.kind == TokenKind::Star).unwrap_or(false) {
                            self.pos += 1;
                            Expr::Star
                        } else {
                            self.parse_expr()?
                        };
                        if contains_agg(&arg) {
                            return self.error("nested aggregates are not supported");
                        }
                        self.expect_punct(")")?;
                        return Ok(Expr::Agg {
                            func,
                            distinct,
                            arg: Box::new(arg),
                        });
                    }
                }
                self.pos += 1;
                Ok(Expr::Column(ColumnRef::parse(&tok.text)))
            }
            TokenKind::NumberLiteral => {
                self.pos += 1;
                Ok(Expr::Number(tok.text.clone()))
            }
            TokenKind::StringLiteral => {
                self.pos += 1;
                Ok(Expr::Str(tok.text.clone()))
            }
            TokenKind::Punctuation if tok.text == "(" => {
                self.pos += 1;
                let e = if self.at_keyword("select") {
                    Expr::Subquery(Box::new(self.parse_query()?))
                } else {
                    self.parse_expr()?
                };
                self.expect_punct(")")?;
                Ok(e)
            }
            _ => self.error(format!("unexpected `{}`", tok.text)),
        }
    }
}

fn contains_agg(e: &Expr) -> bool {
    match e {
        Expr::Agg { .. } => true,
        Expr::Arith { lhs, rhs, .. } => contains_agg(lhs) || contains_agg(rhs),
        _ => false,
    }
}

/// Builds an n-ary `And`/`Or`, splicing in children of the same kind.
pub(crate) fn flatten(parts: Vec<Cond>, and: bool) -> Cond {
    let mut out = Vec::with_capacity(parts.len());
    for p in parts {
        match p {
            Cond::And(inner) if and => out.extend(inner),
            Cond::Or(inner) if !and => out.extend(inner),
            other => out.push(other),
        }
    }
    if out.len() == 1 {
        out.pop().unwrap()
    } else if and {
        Cond::And(out)
    } else {
        Cond::Or(out)
    }
}
