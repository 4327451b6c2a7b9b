use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggFunc {
    Max,
    Min,
    Count,
    Sum,
    Avg,
}

impl AggFunc {
    pub fn as_str(self) -> &'static str {
        match self {
            AggFunc::Max => "max",
            AggFunc::Min => "min",
            AggFunc::Count => "count",
            AggFunc::Sum => "sum",
            AggFunc::Avg => "avg",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "max" => AggFunc::Max,
            "min" => AggFunc::Min,
            "count" => AggFunc::Count,
            "sum" => AggFunc::Sum,
            "avg" => AggFunc::Avg,
            _ => return None,
        })
    }

    pub const ALL: [AggFunc; 5] = [AggFunc::Max, AggFunc::Min, AggFunc::Count, AggFunc::Sum, AggFunc::Avg];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn as_str(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            ArithOp::Add | ArithOp::Sub => 1,
            ArithOp::Mul | ArithOp::Div => 2,
        }
    }
}

/// A column reference. After normalization `qualifier` is the real table
/// name, or the alias when the table occurs more than once in FROM.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnRef {
    pub qualifier: Option<String>,
    pub column: String,
}

impl ColumnRef {
    pub fn qualified(table: &str, column: &str) -> Self {
        Self {
            qualifier: Some(table.to_string()),
            column: column.to_string(),
        }
    }

    pub fn parse(text: &str) -> Self {
        match text.rsplit_once('.') {
            Some((q, c)) => Self {
                qualifier: Some(q.to_string()),
                column: c.to_string(),
            },
            None => Self {
                qualifier: None,
                column: text.to_string(),
            },
        }
    }

    pub fn text(&self) -> String {
        match &self.qualifier {
            Some(q) => format!("{q}.{}", self.column),
            None => self.column.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Column(ColumnRef),
    Star,
    /// Numeric literal, text as written.
    Number(String),
    /// String literal including its quotes.
    Str(String),
    Agg {
        func: AggFunc,
        distinct: bool,
        arg: Box<Expr>,
    },
    Arith {
        op: ArithOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Subquery(Box<Query>),
}

impl Expr {
    pub fn col(table: &str, column: &str) -> Self {
        Expr::Column(ColumnRef::qualified(table, column))
    }

    pub fn agg(func: AggFunc, arg: Expr) -> Self {
        Expr::Agg {
            func,
            distinct: false,
            arg: Box::new(arg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Like,
    NotLike,
    In,
    NotIn,
}

impl CmpOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
            CmpOp::Like => "like",
            CmpOp::NotLike => "not like",
            CmpOp::In => "in",
            CmpOp::NotIn => "not in",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Predicate {
    Compare { lhs: Expr, op: CmpOp, rhs: Expr },
    Between { lhs: Expr, low: Expr, high: Expr },
}

/// Boolean condition tree. `And`/`Or` are kept flat: an `And` never
/// directly contains another `And`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cond {
    Pred(Predicate),
    And(Vec<Cond>),
    Or(Vec<Cond>),
}

impl Cond {
    /// Top-level conjuncts of the condition.
    pub fn conjuncts(&self) -> Vec<&Cond> {
        match self {
            Cond::And(parts) => parts.iter().collect(),
            other => vec![other],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TableRef {
    pub name: String,
    pub alias: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JoinCond {
    pub left: ColumnRef,
    pub right: ColumnRef,
}

/// A FROM entry: a table and the join conditions introduced by its `on`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinedTable {
    pub table: TableRef,
    pub on: Vec<JoinCond>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FromClause {
    Tables(Vec<JoinedTable>),
    Subquery(Box<Query>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrderDir {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderItem {
    pub expr: Expr,
    pub dir: OrderDir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetOpKind {
    Intersect,
    Union,
    Except,
}

impl SetOpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SetOpKind::Intersect => "intersect",
            SetOpKind::Union => "union",
            SetOpKind::Except => "except",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetOp {
    pub kind: SetOpKind,
    pub right: Box<Query>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Select {
    pub distinct: bool,
    pub items: Vec<Expr>,
}

/// One query of the Spider SQL subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub select: Select,
    pub from: FromClause,
    pub where_: Option<Cond>,
    pub group_by: Vec<ColumnRef>,
    pub having: Option<Cond>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
    pub set_op: Option<SetOp>,
}

impl Query {
    /// `select <items> from <table>` with no other clauses.
    pub fn simple(items: Vec<Expr>, table: &str) -> Self {
        Query {
            select: Select { distinct: false, items },
            from: FromClause::Tables(vec![JoinedTable {
                table: TableRef {
                    name: table.to_string(),
                    alias: None,
                },
                on: Vec::new(),
            }]),
            where_: None,
            group_by: Vec::new(),
            having: None,
            order_by: Vec::new(),
            limit: None,
            set_op: None,
        }
    }
}
