use super::sqltext::check_composite;
use super::{
    parse_clause_value, placeholder_id, placeholder_index, ClauseKey, ClauseMap, ClauseValue, Composite, PyDictError,
};

type Result<T> = std::result::Result<T, PyDictError>;

pub(crate) fn quote(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
}

struct Writer {
    out: String,
    pretty: bool,
}

impl Writer {
    fn newline(&mut self, level: usize) {
        if self.pretty {
            self.out.push('\n');
            for _ in 0..level {
                self.out.push_str("  ");
            }
        }
    }

    fn mapping<'a>(&mut self, items: Vec<(String, Item<'a>)>, level: usize) {
        if items.is_empty() {
            self.out.push_str("{}");
            return;
        }
        self.out.push('{');
        for (n, (k, v)) in items.into_iter().enumerate() {
            if n > 0 {
                self.out.push(',');
                if !self.pretty {
                    self.out.push(' ');
                }
            }
            self.newline(level + 1);
            quote(&k, &mut self.out);
            self.out.push_str(": ");
            self.item(v, level + 1);
        }
        self.newline(level);
        self.out.push('}');
    }

    fn item(&mut self, item: Item<'_>, level: usize) {
        match item {
            Item::Str(s) => quote(s, &mut self.out),
            Item::Map(m) => self.mapping(map_items(m), level),
            Item::Composite(c) => {
                let mut items = vec![("clause".to_string(), Item::Str(&c.clause))];
                for (n, sub) in c.subqueries.iter().enumerate() {
                    items.push((placeholder_id(n), Item::Map(sub)));
                }
                self.mapping(items, level)
            }
        }
    }
}

enum Item<'a> {
    Str(&'a str),
    Map(&'a ClauseMap),
    Composite(&'a Composite),
}

fn value_item(v: &ClauseValue) -> Item<'_> {
    match v {
        ClauseValue::Text(t) => Item::Str(t),
        ClauseValue::Composite(c) => Item::Composite(c),
        ClauseValue::Query(q) => Item::Map(q),
    }
}

fn map_items(m: &ClauseMap) -> Vec<(String, Item<'_>)> {
    m.iter().map(|(k, v)| (k.as_str().to_string(), value_item(v))).collect()
}

/// Renders `sql = {...}`, on one line or indented by two spaces per level.
pub fn render_pydict(map: &ClauseMap, pretty: bool) -> String {
    let mut w = Writer {
        out: String::from("sql = "),
        pretty,
    };
    w.mapping(map_items(map), 0);
    w.out
}

/// Compact rendering of one value.
pub fn render_value(value: &ClauseValue) -> String {
    let mut w = Writer {
        out: String::new(),
        pretty: false,
    };
    w.item(value_item(value), 0);
    w.out
}

/// Compact `"key": value` rendering of one entry.
pub fn render_entry(key: ClauseKey, value: &ClauseValue) -> String {
    let mut out = String::new();
    quote(key.as_str(), &mut out);
    out.push_str(": ");
    out.push_str(&render_value(value));
    out
}

#[derive(Debug)]
enum Lit {
    Str(String),
    Map(Vec<(String, usize, Lit)>),
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(PyDictError::Malformed {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn string(&mut self) -> Result<String> {
        self.ws();
        if self.peek() != Some('"') {
            return self.err("expected string");
        }
        self.pos += 1;
        let mut out = String::new();
        let mut chars = self.src[self.pos..].char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.pos += i + 1;
                    return Ok(out);
                }
                '\\' => match chars.next() {
                    Some((_, 'n')) => out.push('\n'),
                    Some((_, 't')) => out.push('\t'),
                    Some((_, e @ ('\\' | '"' | '\''))) => out.push(e),
                    Some((j, _)) => {
                        self.pos += j;
                        return self.err("unknown escape");
                    }
                    None => break,
                },
                c => out.push(c),
            }
        }
        self.pos = self.src.len();
        self.err("unterminated string")
    }

    fn value(&mut self) -> Result<Lit> {
        self.ws();
        match self.peek() {
            Some('"') => self.string().map(Lit::Str),
            Some('{') => self.mapping().map(Lit::Map),
            None => Err(PyDictError::UnterminatedMapping),
            _ => self.err("expected string or mapping"),
        }
    }

    fn mapping(&mut self) -> Result<Vec<(String, usize, Lit)>> {
        if !self.eat('{') {
            return self.err("expected `{`");
        }
        let mut items = Vec::new();
        loop {
            self.ws();
            if self.peek().is_none() {
                return Err(PyDictError::UnterminatedMapping);
            }
            if self.eat('}') {
                return Ok(items);
            }
            if !items.is_empty() {
                if !self.eat(',') {
                    return self.err("expected `,` or `}`");
                }
                self.ws();
                if self.peek().is_none() {
                    return Err(PyDictError::UnterminatedMapping);
                }
                if self.eat('}') {
                    return Ok(items);
                }
            }
            self.entries_into(&mut items)?;
        }
    }

    fn entries_into(&mut self, items: &mut Vec<(String, usize, Lit)>) -> Result<()> {
        self.ws();
        let at = self.pos;
        let key = self.string()?;
        if !self.eat(':') {
            return self.err("expected `:`");
        }
        let value = self.value()?;
        items.push((key, at, value));
        Ok(())
    }
}

fn to_map(items: Vec<(String, usize, Lit)>) -> Result<ClauseMap> {
    let mut map = ClauseMap::new();
    for (key, value) in to_entries(items)? {
        if map.insert(key, value).is_some() {
            return Err(PyDictError::DuplicateKey(key.as_str().to_string()));
        }
    }
    Ok(map)
}

fn to_entries(items: Vec<(String, usize, Lit)>) -> Result<Vec<(ClauseKey, ClauseValue)>> {
    items
        .into_iter()
        .map(|(k, _, v)| {
            let key: ClauseKey = k.parse()?;
            Ok((key, to_value(key, v)?))
        })
        .collect()
}

fn to_value(key: ClauseKey, lit: Lit) -> Result<ClauseValue> {
    match lit {
        Lit::Str(s) => parse_clause_value(key, &s),
        Lit::Map(items) if key.is_set_op() => Ok(ClauseValue::Query(Box::new(to_map(items)?))),
        Lit::Map(items) => {
            let mut clause = None;
            let mut subs: Vec<Option<ClauseMap>> = Vec::new();
            for (k, _, v) in items {
                if k == "clause" {
                    let Lit::Str(s) = v else {
                        return Err(PyDictError::Malformed {
                            offset: 0,
                            message: "`clause` must be a string".into(),
                        });
                    };
                    if clause.replace(s).is_some() {
                        return Err(PyDictError::DuplicateKey(k));
                    }
                    continue;
                }
                let n = placeholder_index(&k).ok_or_else(|| PyDictError::UnknownKey(k.clone()))?;
                let Lit::Map(sub) = v else {
                    return Err(PyDictError::Malformed {
                        offset: 0,
                        message: format!("`{k}` must be a mapping"),
                    });
                };
                if subs.len() <= n {
                    subs.resize(n + 1, None);
                }
                if subs[n].replace(to_map(sub)?).is_some() {
                    return Err(PyDictError::DuplicateKey(k));
                }
            }
            let clause = clause.ok_or_else(|| PyDictError::Malformed {
                offset: 0,
                message: "composite clause without `clause`".into(),
            })?;
            let subqueries = subs
                .into_iter()
                .enumerate()
                .map(|(n, s)| s.ok_or(PyDictError::DanglingPlaceholder(placeholder_id(n))))
                .collect::<Result<Vec<_>>>()?;
            let clause = match parse_clause_value(key, &clause)? {
                ClauseValue::Text(t) => t,
                _ => {
                    return Err(PyDictError::Malformed {
                        offset: 0,
                        message: "composite clause holds an inline subquery".into(),
                    })
                }
            };
            let c = Composite { clause, subqueries };
            check_composite(key, &c)?;
            Ok(ClauseValue::Composite(c))
        }
    }
}

/// Parses `sql = {...}`. Whitespace between tokens is free; string values
/// are canonicalized, so non-canonical SQL spacing is accepted.
pub fn parse_pydict(text: &str) -> Result<ClauseMap> {
    let mut r = Reader { src: text, pos: 0 };
    r.ws();
    if !r.src[r.pos..].starts_with("sql") {
        return r.err("expected `sql =`");
    }
    r.pos += 3;
    if !r.eat('=') {
        return r.err("expected `=`");
    }
    let items = r.mapping()?;
    r.ws();
    if r.pos != text.len() {
        return r.err("trailing input");
    }
    to_map(items)
}

/// Parses a bare entry list `"k": v, "k2": v2` as used in edit contents.
pub fn parse_entries(text: &str) -> Result<Vec<(ClauseKey, ClauseValue)>> {
    let mut r = Reader { src: text, pos: 0 };
    let mut items = Vec::new();
    loop {
        r.entries_into(&mut items)?;
        r.ws();
        if r.pos == text.len() {
            break;
        }
        if !r.eat(',') {
            return r.err("expected `,`");
        }
    }
    to_entries(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pydict::decompose;
    use crate::sql::{parse_unchecked, tokenize};

    fn dec(sql: &str) -> ClauseMap {
        decompose(&parse_unchecked(&tokenize(sql).unwrap()).unwrap())
    }

    #[test]
    fn compact_rendering() {
        let m = dec("select tweets.text from tweets order by tweets.text");
        assert_eq!(
            render_pydict(&m, false),
            r#"sql = {"select": "select tweets.text", "from": "from tweets", "orderBy": "order by tweets.text"}"#
        );
        assert_eq!(render_pydict(&ClauseMap::new(), false), "sql = {}");
        assert_eq!(render_pydict(&ClauseMap::new(), true), "sql = {}");
    }

    #[test]
    fn composite_rendering() {
        let m = dec("select count(*) from cars_data where cars_data.accelerate > (select max(cars_data.horsepower) from cars_data)");
        assert_eq!(
            render_pydict(&m, false),
            r#"sql = {"select": "select count(*)", "from": "from cars_data", "where": {"clause": "where cars_data.accelerate > (subquery0)", "subquery0": {"select": "select max(cars_data.horsepower)", "from": "from cars_data"}}}"#
        );
        let pretty = render_pydict(&m, true);
        assert!(
            pretty.starts_with("sql = {\n  \"select\": \"select count(*)\",\n"),
            "{pretty}"
        );
        assert!(pretty.contains("\n    \"subquery0\": {\n      \"select\""), "{pretty}");
        assert_eq!(parse_pydict(&pretty).unwrap(), m);
    }

    #[test]
    fn round_trip_with_escapes() {
        let m = dec(r#"select a.x from a where a.y = 'say "hi"' union select b.x from b"#);
        for pretty in [false, true] {
            assert_eq!(parse_pydict(&render_pydict(&m, pretty)).unwrap(), m);
        }
    }

    #[test]
    fn inline_subquery_string_becomes_composite() {
        let parsed = parse_pydict(
            r#"sql = {"select": "select count(*)", "from": "from cars_data", "where": "where cars_data.accelerate > (select max(cars_data.horsepower) from cars_data)"}"#,
        )
        .unwrap();
        assert_eq!(
            parsed,
            dec("select count(*) from cars_data where cars_data.accelerate > (select max(cars_data.horsepower) from cars_data)")
        );
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_pydict(r#"sql = {"select": "select a.x""#),
            Err(PyDictError::UnterminatedMapping)
        ));
        assert!(matches!(
            parse_pydict(r#"sql = {"selekt": "select a.x"}"#),
            Err(PyDictError::UnknownKey(_))
        ));
        assert!(matches!(
            parse_pydict(r#"sql = {"select": "select a.x", "select": "select a.y"}"#),
            Err(PyDictError::DuplicateKey(_))
        ));
        assert!(matches!(
            parse_pydict(r#"sql = ["select"]"#),
            Err(PyDictError::Malformed { .. })
        ));
        assert!(matches!(
            parse_pydict(
                r#"sql = {"where": {"clause": "where a.x > (subquery1)", "subquery0": {"select": "select b.x", "from": "from b"}}}"#
            ),
            Err(PyDictError::DanglingPlaceholder(_))
        ));
    }

    #[test]
    fn entry_lists() {
        let e = parse_entries(r#""orderBy": "order by a.x desc", "limit": "limit 1""#).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(render_entry(e[0].0, &e[0].1), r#""orderBy": "order by a.x desc""#);
    }
}
