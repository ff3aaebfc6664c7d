use std::collections::BTreeMap;

/// Field name to extracted content. Fields that were not found are absent.
pub type TaggedFields = BTreeMap<String, String>;

#[derive(Debug)]
struct Marker<'a> {
    field: &'a str,
    start: usize,
    end: usize,
}

fn find_markers<'a>(text: &str, fields: &[&'a str]) -> Vec<Marker<'a>> {
    let mut markers = Vec::new();
    for &field in fields {
        let needle = format!("<{field}>");
        for (pos, _) in text.match_indices(&needle) {
            let mut start = pos;
            if text[..start].ends_with("**") {
                start -= 2;
            }
            let mut end = pos + needle.len();
            if text[end..].starts_with("**") {
                end += 2;
            }
            markers.push(Marker { field, start, end });
        }
    }
    markers.sort_by_key(|m| m.start);
    markers
}

/// Extracts `<field>` / `<field>:` sections from a model response.
///
/// A field's content runs from its first marker to the next marker of any
/// requested field (or the end of the text) and is trimmed. Order in the
/// response does not matter; absent fields are simply missing from the map.
pub fn parse_tagged_fields(text: &str, fields: &[&str]) -> TaggedFields {
    let markers = find_markers(text, fields);
    let mut out = TaggedFields::new();
    for (i, marker) in markers.iter().enumerate() {
        if out.contains_key(marker.field) {
            continue;
        }
        let stop = markers[i + 1..]
            .iter()
            .find(|m| m.start >= marker.end)
            .map(|m| m.start)
            .unwrap_or(text.len());
        let mut body = &text[marker.end..stop.max(marker.end)];
        body = body.trim_start_matches([' ', '\t']);
        if let Some(rest) = body.strip_prefix(':') {
            body = rest;
        }
        out.insert(marker.field.to_string(), body.trim().to_string());
    }
    out
}

/// Returns the body of the first fenced code block, or the whole text trimmed
/// when there is no fence.
pub fn extract_code_block(text: &str) -> String {
    let Some(open) = text.find("```") else {
        return text.trim().to_string();
    };
    let after = &text[open + 3..];
    // The rest of the opening line is an info string such as `python`.
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
    let body = &after[body_start..];
    let body = match body.find("```") {
        Some(close) => &body[..close],
        None => body,
    };
    body.trim().to_string()
}
