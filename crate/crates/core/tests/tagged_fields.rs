//! Tagged-field extraction over every ordering of five fields, checked
//! against a line-oriented splitter written independently of the parser.

use std::collections::BTreeMap;

use toolcards::engine::parse_tagged_fields;

const FIELDS: [&str; 5] = [
    "justification",
    "context",
    "sub_goal",
    "tool_name",
    "analysis",
];

/// Bodies deliberately carry colons, angle brackets and blank lines.
fn body(field: &str) -> &'static str {
    match field {
        "justification" => "The captioner sees the whole image: use it.\nIt handles <img> inputs.",
        "context" => "Image path: \"baseball.png\"\n\nPrevious result: four buckets",
        "sub_goal" => "Count the baseballs in each bucket; report a total.",
        "tool_name" => "Object_Detector_Tool",
        _ => "Needs a detector, not a 2 < 3 style comparison.",
    }
}

/// Every ordering of `0..n`, by Heap's algorithm.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, items: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            out.push(items.clone());
            return;
        }
        for i in 0..k - 1 {
            heap(k - 1, items, out);
            let j = if k.is_multiple_of(2) { i } else { 0 };
            items.swap(j, k - 1);
        }
        heap(k - 1, items, out);
    }
    let mut out = Vec::new();
    heap(n, &mut (0..n).collect(), &mut out);
    out
}

/// Oracle: a section starts on any line beginning with `<field>`; the text
/// before the first section is ignored.
fn split_by_lines(text: &str) -> BTreeMap<String, String> {
    let mut out: BTreeMap<String, String> = BTreeMap::new();
    let mut current: Option<(String, Vec<String>)> = None;
    let flush = |current: Option<(String, Vec<String>)>, out: &mut BTreeMap<String, String>| {
        if let Some((field, lines)) = current {
            out.entry(field)
                .or_insert_with(|| lines.join("\n").trim().to_string());
        }
    };
    for line in text.lines() {
        let opening = FIELDS.iter().find(|f| line.starts_with(&format!("<{f}>")));
        match opening {
            Some(field) => {
                flush(current.take(), &mut out);
                let rest = line[field.len() + 2..].trim_start();
                let rest = rest.strip_prefix(':').unwrap_or(rest);
                current = Some((field.to_string(), vec![rest.to_string()]));
            }
            None => {
                if let Some((_, lines)) = current.as_mut() {
                    lines.push(line.to_string());
                }
            }
        }
    }
    flush(current, &mut out);
    out
}

fn render(order: &[usize], colon: bool) -> String {
    let mut text = String::from("Here is my reasoning before the fields.\n\n");
    for &i in order {
        let field = FIELDS[i];
        let sep = if colon { ": " } else { " " };
        text.push_str(&format!("<{field}>{sep}{}\n\n", body(field)));
    }
    text
}

#[test]
fn every_field_order_extracts_the_same_fields() {
    let orders = permutations(FIELDS.len());
    assert_eq!(orders.len(), 120);
    let distinct: std::collections::BTreeSet<_> = orders.iter().collect();
    assert_eq!(distinct.len(), 120);

    let expected: BTreeMap<String, String> = FIELDS
        .iter()
        .map(|f| (f.to_string(), body(f).to_string()))
        .collect();
    for order in &orders {
        for colon in [true, false] {
            let text = render(order, colon);
            let oracle = split_by_lines(&text);
            assert_eq!(
                oracle, expected,
                "oracle disagrees with the corpus:\n{text}"
            );
            assert_eq!(parse_tagged_fields(&text, &FIELDS), oracle, "{text}");
        }
    }
}

#[test]
fn dropped_fields_are_absent_in_every_order() {
    for order in permutations(FIELDS.len()) {
        let kept: Vec<usize> = order
            .into_iter()
            .filter(|i| FIELDS[*i] != "context")
            .collect();
        let text = render(&kept, true);
        let parsed = parse_tagged_fields(&text, &FIELDS);
        assert!(!parsed.contains_key("context"));
        assert_eq!(parsed, split_by_lines(&text));
        assert_eq!(parsed.len(), 4);
    }
}
