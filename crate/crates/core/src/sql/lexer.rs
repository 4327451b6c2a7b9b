use serde::{Deserialize, Serialize};

use super::SqlError;

/// Lexical category of a [`Token`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Keyword,
    Identifier,
    NumberLiteral,
    StringLiteral,
    Operator,
    Punctuation,
    Star,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    /// Byte offset of the token in the source text.
    #[serde(skip)]
    pub offset: usize,
}

impl Token {
    pub fn new(kind: TokenKind, text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            kind,
            offset: 0,
        }
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text == kw
    }

    pub fn is_punct(&self, p: &str) -> bool {
        matches!(self.kind, TokenKind::Punctuation | TokenKind::Operator) && self.text == p
    }

    /// Whether the token can end an operand, which decides if a following
    /// `-` is binary or the sign of a number.
    fn ends_operand(&self) -> bool {
        matches!(
            self.kind,
            TokenKind::Identifier | TokenKind::NumberLiteral | TokenKind::StringLiteral | TokenKind::Star
        ) || self.text == ")"
    }
}

pub const KEYWORDS: &[&str] = &[
    "select",
    "from",
    "where",
    "group",
    "by",
    "having",
    "order",
    "asc",
    "desc",
    "limit",
    "intersect",
    "union",
    "except",
    "join",
    "on",
    "as",
    "and",
    "or",
    "not",
    "in",
    "like",
    "between",
    "distinct",
];

pub const AGGREGATES: &[&str] = &["max", "min", "count", "sum", "avg"];

/// Splits SQL text into tokens. Keywords and identifiers are lowercased;
/// string literals keep their quotes and case.
pub fn tokenize(sql: &str) -> Result<Vec<Token>, SqlError> {
    if sql.trim().is_empty() {
        return Err(SqlError::EmptyInput);
    }
    let bytes = sql.as_bytes();
    let mut tokens: Vec<Token> = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let push = |tokens: &mut Vec<Token>, kind, text: String| {
            tokens.push(Token {
                text,
                kind,
                offset: start,
            })
        };
        if c == b'\'' || c == b'"' {
            let quote = c;
            i += 1;
            loop {
                if i >= bytes.len() {
                    return Err(SqlError::UnterminatedString { offset: start });
                }
                if bytes[i] == quote {
                    // doubled quote is an escaped quote
                    if i + 1 < bytes.len() && bytes[i + 1] == quote {
                        i += 2;
                        continue;
                    }
                    i += 1;
                    break;
                }
                i += 1;
            }
            push(&mut tokens, TokenKind::StringLiteral, sql[start..i].to_string());
            continue;
        }
        let prev_is_operand = tokens.last().map(Token::ends_operand).unwrap_or(false);
        let signed_number = c == b'-' && !prev_is_operand && bytes.get(i + 1).map(u8::is_ascii_digit).unwrap_or(false);
        if c.is_ascii_digit() || signed_number {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i].is_ascii_alphabetic() || bytes[i] == b'_') {
                return Err(SqlError::IllegalCharacter {
                    ch: bytes[i] as char,
                    offset: i,
                });
            }
            push(&mut tokens, TokenKind::NumberLiteral, sql[start..i].to_string());
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            i += 1;
            while i < bytes.len() {
                let b = bytes[i];
                let dotted = b == b'.' && bytes.get(i + 1).is_some_and(|n| n.is_ascii_alphabetic() || *n == b'_');
                if b.is_ascii_alphanumeric() || b == b'_' || dotted {
                    i += 1;
                } else {
                    break;
                }
            }
            let word = sql[start..i].to_ascii_lowercase();
            let kind = if KEYWORDS.contains(&word.as_str()) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            };
            push(&mut tokens, kind, word);
            continue;
        }
        let two = sql.get(i..i + 2).unwrap_or("");
        if matches!(two, "!=" | "<>" | "<=" | ">=") {
            i += 2;
            push(&mut tokens, TokenKind::Operator, two.to_string());
            continue;
        }
        i += 1;
        match c {
            b'(' | b')' | b',' | b';' => push(&mut tokens, TokenKind::Punctuation, (c as char).to_string()),
            b'=' | b'<' | b'>' | b'+' | b'-' | b'/' => push(&mut tokens, TokenKind::Operator, (c as char).to_string()),
            b'*' => push(&mut tokens, TokenKind::Star, "*".to_string()),
            _ => {
                let ch = sql[start..].chars().next().unwrap_or('?');
                return Err(SqlError::IllegalCharacter { ch, offset: start });
            }
        }
        // keep the loop on a char boundary for multi-byte input
        while i < bytes.len() && !sql.is_char_boundary(i) {
            i += 1;
        }
    }
    Ok(tokens)
}

/// Joins tokens with the canonical spacing: single spaces, no space inside
/// parentheses or before commas, and function names glued to their `(`.
pub fn join_tokens<'a, I>(tokens: I) -> String
where
    I: IntoIterator<Item = &'a str>,
{
    let mut out = String::new();
    let mut prev: Option<&str> = None;
    for tok in tokens {
        if let Some(p) = prev {
            let glue = tok == ")" || tok == "," || p == "(" || (tok == "(" && AGGREGATES.contains(&p));
            if !glue {
                out.push(' ');
            }
        }
        out.push_str(tok);
        prev = Some(tok);
    }
    out
}

/// Re-joins an arbitrary token slice with canonical spacing.
pub fn render_tokens(tokens: &[Token]) -> String {
    join_tokens(tokens.iter().map(|t| t.text.as_str()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(sql: &str) -> Vec<String> {
        tokenize(sql).unwrap().into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn count_star() {
        assert_eq!(
            texts("select count(*) from cars_data"),
            ["select", "count", "(", "*", ")", "from", "cars_data"]
        );
    }

    #[test]
    fn empty_input() {
        assert_eq!(tokenize(""), Err(SqlError::EmptyInput));
        assert_eq!(tokenize("   "), Err(SqlError::EmptyInput));
    }

    #[test]
    fn string_literal_kept_verbatim() {
        let toks = tokenize("where name = 'Alice'").unwrap();
        let lit = toks.last().unwrap();
        assert_eq!(lit.kind, TokenKind::StringLiteral);
        assert_eq!(lit.text, "'Alice'");
        let toks = tokenize("WHERE Name = \"O''Neil\"").unwrap();
        assert_eq!(toks[0].text, "where");
        assert_eq!(toks[1].text, "name");
        assert_eq!(toks[3].text, "\"O''Neil\"");
    }

    #[test]
    fn unterminated_string() {
        assert!(matches!(
            tokenize("where a = 'abc"),
            Err(SqlError::UnterminatedString { offset: 10 })
        ));
    }

    #[test]
    fn illegal_character() {
        assert!(matches!(
            tokenize("select a # b"),
            Err(SqlError::IllegalCharacter { ch: '#', .. })
        ));
    }

    #[test]
    fn qualified_identifier_is_one_token() {
        assert_eq!(texts("T1.Text"), ["t1.text"]);
    }

    #[test]
    fn signed_numbers() {
        assert_eq!(texts("a.x > -1"), ["a.x", ">", "-1"]);
        assert_eq!(texts("a.x - 1"), ["a.x", "-", "1"]);
        assert_eq!(texts("a.x-1"), ["a.x", "-", "1"]);
    }

    #[test]
    fn canonical_spacing() {
        let sql = "select count(*), max(a.b) from a where a.c > (select avg(a.c) from a)";
        assert_eq!(render_tokens(&tokenize(sql).unwrap()), sql);
        assert_eq!(
            render_tokens(&tokenize("SELECT  COUNT ( * ) ,a.b FROM a").unwrap()),
            "select count(*), a.b from a"
        );
    }
}
