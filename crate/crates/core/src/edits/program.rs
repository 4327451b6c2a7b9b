use super::{EditProgram, EditStmt, EditsError, PathSeg};
use crate::pydict::quote;

fn render_path(path: &[PathSeg], out: &mut String) {
    out.push_str("sql");
    for seg in path {
        out.push('[');
        quote(&seg.to_string(), out);
        out.push(']');
    }
}

pub fn render_stmt(stmt: &EditStmt) -> String {
    let mut out = String::new();
    match stmt {
        EditStmt::Assign { path, value } => {
            render_path(path, &mut out);
            out.push_str(" = ");
            quote(value, &mut out);
        }
        EditStmt::Pop { path, key } => {
            render_path(path, &mut out);
            out.push_str(".pop(");
            quote(&key.to_string(), &mut out);
            out.push(')');
        }
    }
    out
}

/// One statement per line.
pub fn render_program(p: &EditProgram) -> String {
    p.stmts.iter().map(render_stmt).collect::<Vec<_>>().join("\n")
}

struct Line<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
}

impl Line<'_> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, EditsError> {
        Err(EditsError::Program {
            line: self.line,
            message: message.into(),
        })
    }

    fn ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn eat(&mut self, s: &str) -> bool {
        self.ws();
        if self.src[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn string(&mut self, what: &str) -> Result<String, EditsError> {
        self.ws();
        if !self.src[self.pos..].starts_with('"') {
            return self.err(format!("expected quoted {what}"));
        }
        let mut out = String::new();
        let mut chars = self.src[self.pos + 1..].char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.pos += i + 2;
                    return Ok(out);
                }
                '\\' => match chars.next() {
                    Some((_, 'n')) => out.push('\n'),
                    Some((_, 't')) => out.push('\t'),
                    Some((_, e @ ('\\' | '"' | '\''))) => out.push(e),
                    _ => return self.err("bad escape"),
                },
                c => out.push(c),
            }
        }
        self.err("unterminated string")
    }

    fn seg(&mut self) -> Result<PathSeg, EditsError> {
        let key = self.string("key")?;
        key.parse().or_else(|m: String| self.err(m))
    }

    fn stmt(&mut self) -> Result<EditStmt, EditsError> {
        self.ws();
        if !self.src[self.pos..].starts_with("sql") {
            return self.err("statement must start with `sql`");
        }
        self.pos += 3;
        let mut path = Vec::new();
        loop {
            if self.eat("[") {
                path.push(self.seg()?);
                if !self.eat("]") {
                    return self.err("expected `]`");
                }
            } else if self.eat(".pop(") {
                let key = self.seg()?;
                if !self.eat(")") {
                    return self.err("expected `)`");
                }
                return self.end(EditStmt::Pop { path, key });
            } else if self.eat("=") {
                if path.is_empty() {
                    return self.err("assignment to the whole map");
                }
                let value = self.string("value")?;
                return self.end(EditStmt::Assign { path, value });
            } else {
                return self.err("expected `[`, `.pop(` or `=`");
            }
        }
    }

    fn end(&mut self, stmt: EditStmt) -> Result<EditStmt, EditsError> {
        self.ws();
        if self.pos != self.src.len() {
            return self.err("trailing text");
        }
        Ok(stmt)
    }
}

/// Parses newline-separated statements; blank lines are ignored.
pub fn parse_program(text: &str) -> Result<EditProgram, EditsError> {
    let mut stmts = Vec::new();
    for (n, src) in text.lines().enumerate() {
        if src.trim().is_empty() {
            continue;
        }
        let mut line = Line {
            src,
            pos: 0,
            line: n + 1,
        };
        stmts.push(line.stmt()?);
    }
    Ok(EditProgram { stmts })
}
