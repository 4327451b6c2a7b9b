use super::{placeholder_id, placeholder_index, ClauseKey, ClauseMap, ClauseValue, Composite, PyDictError};
use crate::sql::{join_tokens, tokenize, Token, TokenKind};

type Result<T> = std::result::Result<T, PyDictError>;

/// Clause key opened by the token at `i`, if any.
fn clause_start(tokens: &[Token], i: usize) -> Option<ClauseKey> {
    let t = &tokens[i];
    if t.kind != TokenKind::Keyword {
        return None;
    }
    let followed_by_by = || tokens.get(i + 1).is_some_and(|n| n.is_keyword("by"));
    Some(match t.text.as_str() {
        "select" => ClauseKey::Select,
        "from" => ClauseKey::From,
        "where" => ClauseKey::Where,
        "group" if followed_by_by() => ClauseKey::GroupBy,
        "having" => ClauseKey::Having,
        "order" if followed_by_by() => ClauseKey::OrderBy,
        "limit" => ClauseKey::Limit,
        "intersect" => ClauseKey::Intersect,
        "union" => ClauseKey::Union,
        "except" => ClauseKey::Except,
        _ => return None,
    })
}

/// Splits a token sequence into its top-level clauses, in textual order.
fn split_tokens(tokens: &[Token]) -> Result<Vec<(ClauseKey, ClauseValue)>> {
    let mut starts = Vec::new();
    let mut depth = 0usize;
    for i in 0..tokens.len() {
        match tokens[i].text.as_str() {
            "(" if tokens[i].kind == TokenKind::Punctuation => depth += 1,
            ")" if tokens[i].kind == TokenKind::Punctuation => depth = depth.saturating_sub(1),
            _ if depth == 0 => {
                if let Some(key) = clause_start(tokens, i) {
                    starts.push((i, key));
                    if key.is_set_op() {
                        break;
                    }
                }
            }
            _ => {}
        }
    }
    match starts.first() {
        Some((0, _)) => {}
        _ => return Err(PyDictError::NoClause(render(tokens))),
    }
    let mut out = Vec::with_capacity(starts.len());
    for (n, &(start, key)) in starts.iter().enumerate() {
        let end = starts.get(n + 1).map_or(tokens.len(), |s| s.0);
        let value = if key.is_set_op() {
            ClauseValue::Query(Box::new(query_from_tokens(&tokens[start + 1..])?))
        } else {
            clause_tokens_to_value(&tokens[start..end])?
        };
        out.push((key, value));
    }
    Ok(out)
}

fn render(tokens: &[Token]) -> String {
    join_tokens(tokens.iter().map(|t| t.text.as_str()))
}

fn query_from_tokens(tokens: &[Token]) -> Result<ClauseMap> {
    if tokens.is_empty() {
        return Err(PyDictError::MissingClause("select"));
    }
    let mut map = ClauseMap::new();
    for (key, value) in split_tokens(tokens)? {
        if map.insert(key, value).is_some() {
            return Err(PyDictError::DuplicateKey(key.as_str().to_string()));
        }
    }
    require_core(&map)?;
    Ok(map)
}

fn require_core(map: &ClauseMap) -> Result<()> {
    if !map.contains(ClauseKey::Select) {
        return Err(PyDictError::MissingClause("select"));
    }
    if !map.contains(ClauseKey::From) {
        return Err(PyDictError::MissingClause("from"));
    }
    Ok(())
}

/// Builds the value of one clause from its tokens. Each parenthesized
/// `select` is pulled out into a nested map and replaced by a placeholder.
pub fn clause_tokens_to_value(tokens: &[Token]) -> Result<ClauseValue> {
    let mut texts: Vec<String> = Vec::with_capacity(tokens.len());
    let mut subqueries = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        if t.is_punct("(") && tokens.get(i + 1).is_some_and(|n| n.is_keyword("select")) {
            let close = matching_paren(tokens, i).ok_or_else(|| PyDictError::Malformed {
                offset: t.offset,
                message: "unbalanced parenthesis".into(),
            })?;
            subqueries.push(query_from_tokens(&tokens[i + 1..close])?);
            texts.push("(".into());
            texts.push(placeholder_id(subqueries.len() - 1));
            texts.push(")".into());
            i = close + 1;
            continue;
        }
        texts.push(t.text.clone());
        i += 1;
    }
    let clause = join_tokens(texts.iter().map(String::as_str));
    Ok(if subqueries.is_empty() {
        ClauseValue::Text(clause)
    } else {
        ClauseValue::Composite(Composite { clause, subqueries })
    })
}

fn matching_paren(tokens: &[Token], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (j, t) in tokens.iter().enumerate().skip(open) {
        if t.is_punct("(") {
            depth += 1;
        } else if t.is_punct(")") {
            depth -= 1;
            if depth == 0 {
                return Some(j);
            }
        }
    }
    None
}

/// Splits a full query text into its clause map.
pub fn split_query(text: &str) -> Result<ClauseMap> {
    query_from_tokens(&tokenize(text)?)
}

/// Splits text holding one or more consecutive clauses, e.g.
/// `order by t.a desc limit 1`. The first token must open a clause.
pub fn split_clauses(text: &str) -> Result<Vec<(ClauseKey, ClauseValue)>> {
    split_tokens(&tokenize(text)?)
}

fn starts_with_keyword(tokens: &[Token], key: ClauseKey) -> bool {
    let kw: Vec<&str> = key.keyword().split(' ').collect();
    tokens.len() >= kw.len() && tokens.iter().zip(&kw).all(|(t, k)| t.is_keyword(k))
}

/// Canonical value of clause `key` written as plain SQL text.
pub fn parse_clause_value(key: ClauseKey, text: &str) -> Result<ClauseValue> {
    let tokens = tokenize(text)?;
    if !starts_with_keyword(&tokens, key) {
        return Err(PyDictError::KeywordMismatch {
            key,
            keyword: key.keyword(),
            text: text.to_string(),
        });
    }
    if key.is_set_op() {
        return Ok(ClauseValue::Query(Box::new(query_from_tokens(&tokens[1..])?)));
    }
    clause_tokens_to_value(&tokens)
}

/// Canonical composite clause text: checks the leading keyword and that the
/// placeholders are exactly `subquery0..n` with no repeats.
pub(crate) fn check_composite(key: ClauseKey, c: &Composite) -> Result<()> {
    let tokens = tokenize(&c.clause)?;
    if !starts_with_keyword(&tokens, key) {
        return Err(PyDictError::KeywordMismatch {
            key,
            keyword: key.keyword(),
            text: c.clause.clone(),
        });
    }
    let mut seen = vec![false; c.subqueries.len()];
    for t in &tokens {
        if let Some(n) = placeholder_index(&t.text) {
            match seen.get_mut(n) {
                Some(s) if !*s => *s = true,
                _ => return Err(PyDictError::DanglingPlaceholder(t.text.clone())),
            }
        }
    }
    if let Some(n) = seen.iter().position(|s| !s) {
        return Err(PyDictError::UnreferencedSubquery(n));
    }
    Ok(())
}

/// SQL text of one clause entry with its subqueries inlined.
pub fn entry_sql(key: ClauseKey, value: &ClauseValue) -> Result<String> {
    match value {
        ClauseValue::Text(t) => Ok(t.clone()),
        ClauseValue::Query(q) => Ok(format!("{} {}", key.keyword(), to_sql(q)?)),
        ClauseValue::Composite(c) => {
            let tokens = tokenize(&c.clause)?;
            let mut used = vec![false; c.subqueries.len()];
            let mut parts = Vec::with_capacity(tokens.len());
            for t in tokens {
                match placeholder_index(&t.text) {
                    Some(n) if t.kind == TokenKind::Identifier => {
                        let sub = c
                            .subqueries
                            .get(n)
                            .ok_or_else(|| PyDictError::DanglingPlaceholder(t.text.clone()))?;
                        used[n] = true;
                        parts.push(to_sql(sub)?);
                    }
                    _ => parts.push(t.text),
                }
            }
            if let Some(n) = used.iter().position(|u| !u) {
                return Err(PyDictError::UnreferencedSubquery(n));
            }
            Ok(join_tokens(parts.iter().map(String::as_str)))
        }
    }
}

/// Reassembles SQL text from a clause map.
pub fn to_sql(map: &ClauseMap) -> Result<String> {
    require_core(map)?;
    let parts = map.iter().map(|(k, v)| entry_sql(k, v)).collect::<Result<Vec<_>>>()?;
    Ok(parts.join(" "))
}
