//! Tokenizing, parsing, normalizing and rendering of the Spider SQL subset.

mod ast;
mod lexer;
mod normalize;
mod parser;
mod render;
mod schema;

pub use ast::*;
pub use lexer::{join_tokens, render_tokens, tokenize, Token, TokenKind, AGGREGATES, KEYWORDS};
pub use normalize::normalize;
pub use parser::{parse, parse_unchecked};
pub use render::render;
pub(crate) use render::Emitter;
pub use schema::{SchemaInfo, SchemaStore, TableInfo};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlError {
    #[error("empty input")]
    EmptyInput,
    #[error("unterminated string literal at byte {offset}")]
    UnterminatedString { offset: usize },
    #[error("illegal character {ch:?} at byte {offset}")]
    IllegalCharacter { ch: char, offset: usize },
    #[error("syntax error at token {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("ambiguous column `{0}`")]
    AmbiguousColumn(String),
    #[error("alias collision on `{0}`")]
    AliasCollision(String),
    #[error("schema error: {0}")]
    Schema(String),
}

/// Tokenizes, parses and normalizes `sql` against `schema`.
pub fn parse_normalized(sql: &str, schema: &SchemaInfo) -> Result<Query, SqlError> {
    let tokens = tokenize(sql)?;
    let ast = parse(&tokens, schema)?;
    normalize(&ast, schema)
}

/// Canonical text of `sql` after normalization.
pub fn canonicalize(sql: &str, schema: &SchemaInfo) -> Result<String, SqlError> {
    parse_normalized(sql, schema).map(|q| render(&q))
}
