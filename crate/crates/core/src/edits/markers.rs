use super::{EditAction, EditKind, EditScript, EditsError, Granularity};

const REPLACE_OLD: &str = "<ReplaceOld>";
const REPLACE_NEW: &str = "<ReplaceNew>";
const REPLACE_END: &str = "<ReplaceEnd>";
const INSERT: &str = "<Insert>";
const INSERT_END: &str = "<InsertEnd>";
const DELETE: &str = "<Delete>";
const DELETE_END: &str = "<DeleteEnd>";

const MARKERS: [&str; 7] = [
    REPLACE_OLD,
    REPLACE_NEW,
    REPLACE_END,
    INSERT,
    INSERT_END,
    DELETE,
    DELETE_END,
];

/// Renders a script with the special marker tokens, actions separated by
/// single spaces.
pub fn render_edits(script: &EditScript) -> String {
    script
        .actions
        .iter()
        .map(|a| match a.kind {
            EditKind::Replace => format!("{REPLACE_OLD} {} {REPLACE_NEW} {} {REPLACE_END}", a.old, a.new),
            EditKind::Insert => format!("{INSERT} {} {INSERT_END}", a.new),
            EditKind::Delete => format!("{DELETE} {} {DELETE_END}", a.old),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Next marker-like `<Word>` at or after `from`: (offset, text).
fn next_marker(text: &str, from: usize) -> Option<(usize, &str)> {
    let bytes = text.as_bytes();
    let mut i = from;
    while let Some(rel) = text[i..].find('<') {
        let start = i + rel;
        let mut j = start + 1;
        if j < bytes.len() && bytes[j].is_ascii_uppercase() {
            while j < bytes.len() && bytes[j].is_ascii_alphabetic() {
                j += 1;
            }
            if j < bytes.len() && bytes[j] == b'>' {
                return Some((start, &text[start..=j]));
            }
        }
        i = start + 1;
    }
    None
}

pub fn parse_edits(text: &str, granularity: Granularity) -> Result<EditScript, EditsError> {
    let mut pieces = Vec::new();
    let mut pos = 0;
    while let Some((at, m)) = next_marker(text, pos) {
        if !MARKERS.contains(&m) {
            return Err(EditsError::UnknownMarker(m.to_string()));
        }
        pieces.push((text[pos..at].trim(), pos, m, at));
        pos = at + m.len();
    }
    let tail = pos;

    let mut actions = Vec::new();
    let mut it = pieces.into_iter();
    let unbalanced = |m: &str, at: usize| EditsError::UnbalancedMarker {
        marker: m.to_string(),
        offset: at,
    };
    while let Some((before, start, m, at)) = it.next() {
        if !before.is_empty() {
            return Err(EditsError::StrayText(start));
        }
        let mut expect = |want: &str| -> Result<&str, EditsError> {
            match it.next() {
                Some((content, _, got, _)) if got == want => Ok(content),
                Some((_, _, got, at)) => Err(unbalanced(got, at)),
                None => Err(unbalanced(m, at)),
            }
        };
        let action = match m {
            REPLACE_OLD => {
                let old = expect(REPLACE_NEW)?;
                let new = expect(REPLACE_END)?;
                if old.is_empty() {
                    return Err(EditsError::EmptySpan("replace-old"));
                }
                if new.is_empty() {
                    return Err(EditsError::EmptySpan("replace-new"));
                }
                EditAction::replace(old, new)
            }
            INSERT => {
                let new = expect(INSERT_END)?;
                if new.is_empty() {
                    return Err(EditsError::EmptySpan("insert"));
                }
                EditAction::insert(new)
            }
            DELETE => {
                let old = expect(DELETE_END)?;
                if old.is_empty() {
                    return Err(EditsError::EmptySpan("delete"));
                }
                EditAction::delete(old)
            }
            _ => return Err(unbalanced(m, at)),
        };
        actions.push(action);
    }
    if !text[tail..].trim().is_empty() {
        return Err(EditsError::StrayText(tail));
    }
    Ok(EditScript { granularity, actions })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn script(actions: Vec<EditAction>) -> EditScript {
        EditScript {
            granularity: Granularity::Token,
            actions,
        }
    }

    #[test]
    fn table_one_token_action() {
        let s = script(vec![EditAction::replace("tweets.text", "tweets.createdate")]);
        let text = render_edits(&s);
        assert_eq!(
            text,
            "<ReplaceOld> tweets.text <ReplaceNew> tweets.createdate <ReplaceEnd>"
        );
        assert_eq!(parse_edits(&text, Granularity::Token).unwrap(), s);
    }

    #[test]
    fn empty_script() {
        let s = script(vec![]);
        assert_eq!(render_edits(&s), "");
        assert_eq!(parse_edits("  ", Granularity::Token).unwrap(), s);
    }

    #[test]
    fn mixed_round_trip() {
        let s = script(vec![
            EditAction::delete("group by evaluation.employee_id"),
            EditAction::delete("sum("),
            EditAction::delete(")"),
            EditAction::insert("limit 1"),
        ]);
        assert_eq!(parse_edits(&render_edits(&s), Granularity::Token).unwrap(), s);
    }

    #[test]
    fn content_with_comparison_operators() {
        let s = script(vec![EditAction::replace("a.x < 3", "a.x <> 4")]);
        assert_eq!(parse_edits(&render_edits(&s), Granularity::Token).unwrap(), s);
    }

    #[test]
    fn rejects_bad_markup() {
        assert!(matches!(
            parse_edits("<Insert> x <ReplaceEnd>", Granularity::Token),
            Err(EditsError::UnbalancedMarker { .. })
        ));
        assert!(matches!(
            parse_edits("<Insert> x", Granularity::Token),
            Err(EditsError::UnbalancedMarker { .. })
        ));
        assert!(matches!(
            parse_edits("<Insert> <Delete> x <DeleteEnd> <InsertEnd>", Granularity::Token),
            Err(EditsError::UnbalancedMarker { .. })
        ));
        assert!(matches!(
            parse_edits("<Swap> x <SwapEnd>", Granularity::Token),
            Err(EditsError::UnknownMarker(_))
        ));
        assert!(matches!(
            parse_edits("<Delete> <DeleteEnd>", Granularity::Token),
            Err(EditsError::EmptySpan(_))
        ));
        assert!(matches!(
            parse_edits("junk <Delete> x <DeleteEnd>", Granularity::Token),
            Err(EditsError::StrayText(_))
        ));
    }
}
