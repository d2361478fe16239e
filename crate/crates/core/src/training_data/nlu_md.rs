use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;

use super::{is_label, EntitySpan, FormatError, NluDocument, RegexPatternDef, SynonymTable, TrainingExample};

static ANNOTATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[([^\[\]\n]+)\]\(([A-Za-z0-9_\-]+)\)").unwrap());

enum Section {
    Intent(String),
    Synonym(String),
    Regex(String),
}

/// Parses `nlu.md`.
///
/// Grammar: `## intent:<name>`, `## synonym:<canonical>` and
/// `## regex:<entity>` headers, each followed by `- ` bullets. Inline
/// `[value](entity)` annotations in intent bullets become [`EntitySpan`]s
/// whose offsets refer to the text with the markup removed.
pub fn parse_nlu_markdown(text: &str) -> Result<NluDocument, FormatError> {
    let mut doc = NluDocument::default();
    let mut section: Option<Section> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with('#') {
            section = Some(parse_header(line, line_no)?);
            continue;
        }
        let Some(item) = line.trim_start().strip_prefix("- ") else {
            return Err(FormatError::parse(line_no, format!("unexpected line {line:?}")));
        };
        let item = item.trim();
        match &section {
            None => return Err(FormatError::parse(line_no, "bullet outside of any section")),
            Some(Section::Intent(intent)) => {
                let example = parse_annotated(item, intent);
                example
                    .validate()
                    .map_err(|m| FormatError::validation(Some(line_no), m))?;
                doc.examples.push(example);
            }
            Some(Section::Synonym(canonical)) => {
                doc.synonyms
                    .insert(item, canonical)
                    .map_err(|m| FormatError::validation(Some(line_no), m))?;
            }
            Some(Section::Regex(name)) => {
                if item.is_empty() {
                    return Err(FormatError::validation(Some(line_no), "empty regex pattern"));
                }
                doc.patterns.push(RegexPatternDef::new(name.clone(), item));
            }
        }
    }
    Ok(doc)
}

fn parse_header(line: &str, line_no: usize) -> Result<Section, FormatError> {
    let malformed = || FormatError::parse(line_no, format!("malformed section header {line:?}"));
    let body = line.strip_prefix("## ").ok_or_else(malformed)?;
    let (kind, name) = body.split_once(':').ok_or_else(malformed)?;
    let name = name.trim().to_string();
    if name.is_empty() {
        return Err(malformed());
    }
    match kind.trim() {
        "intent" => {
            if !is_label(&name) {
                return Err(FormatError::parse(
                    line_no,
                    format!("intent name {name:?} must match [a-z0-9_]+"),
                ));
            }
            Ok(Section::Intent(name))
        }
        "synonym" => Ok(Section::Synonym(name)),
        "regex" => Ok(Section::Regex(name)),
        _ => Err(malformed()),
    }
}

fn parse_annotated(item: &str, intent: &str) -> TrainingExample {
    let mut text = String::with_capacity(item.len());
    let mut entities = Vec::new();
    let mut chars = 0usize;
    let mut last = 0usize;
    for caps in ANNOTATION.captures_iter(item) {
        let whole = caps.get(0).unwrap();
        let before = &item[last..whole.start()];
        text.push_str(before);
        chars += before.chars().count();
        let value = &caps[1];
        let start = chars;
        text.push_str(value);
        chars += value.chars().count();
        entities.push(EntitySpan::new(start, chars, value, &caps[2]));
        last = whole.end();
    }
    text.push_str(&item[last..]);
    TrainingExample {
        text,
        intent: intent.to_string(),
        entities,
    }
}

/// Serializes a document back into `nlu.md` form. Intent, synonym and regex
/// sections are emitted in lexicographic name order.
pub fn write_nlu_markdown(
    examples: &[TrainingExample],
    synonyms: &SynonymTable,
    patterns: &[RegexPatternDef],
) -> String {
    let mut out = String::new();

    let mut by_intent: BTreeMap<&str, Vec<&TrainingExample>> = BTreeMap::new();
    for ex in examples {
        by_intent.entry(ex.intent.as_str()).or_default().push(ex);
    }
    for (intent, group) in by_intent {
        push_section_break(&mut out);
        out.push_str(&format!("## intent:{intent}\n"));
        for ex in group {
            out.push_str("- ");
            out.push_str(&inline_annotations(ex));
            out.push('\n');
        }
    }

    let mut by_canonical: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (surface, canonical) in synonyms.iter() {
        by_canonical.entry(canonical).or_default().push(surface);
    }
    for (canonical, surfaces) in by_canonical {
        push_section_break(&mut out);
        out.push_str(&format!("## synonym:{canonical}\n"));
        for s in surfaces {
            out.push_str(&format!("- {s}\n"));
        }
    }

    let mut by_name: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for p in patterns {
        by_name.entry(p.name.as_str()).or_default().push(p.pattern.as_str());
    }
    for (name, pats) in by_name {
        push_section_break(&mut out);
        out.push_str(&format!("## regex:{name}\n"));
        for p in pats {
            out.push_str(&format!("- {p}\n"));
        }
    }
    out
}

fn push_section_break(out: &mut String) {
    if !out.is_empty() {
        out.push('\n');
    }
}

fn inline_annotations(ex: &TrainingExample) -> String {
    let mut spans: Vec<&EntitySpan> = ex.entities.iter().collect();
    spans.sort_by_key(|s| s.start);
    let chars: Vec<char> = ex.text.chars().collect();
    let mut out = String::new();
    let mut pos = 0;
    for span in spans {
        out.extend(&chars[pos..span.start]);
        out.push('[');
        out.extend(&chars[span.start..span.end]);
        out.push_str("](");
        out.push_str(&span.entity);
        out.push(')');
        pos = span.end;
    }
    out.extend(&chars[pos..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greet_section() {
        let doc = parse_nlu_markdown("## intent:greet\n- salam\n- assalam o alaikum\n").unwrap();
        assert_eq!(doc.examples.len(), 2);
        assert!(doc
            .examples
            .iter()
            .all(|e| e.intent == "greet" && e.entities.is_empty()));
        assert_eq!(doc.examples[1].text, "assalam o alaikum");
    }

    #[test]
    fn inline_entity_stripped() {
        let doc = parse_nlu_markdown("## intent:fee\n- [fast](university) ki fees\n").unwrap();
        let ex = &doc.examples[0];
        assert_eq!(ex.text, "fast ki fees");
        assert_eq!(ex.entities, vec![EntitySpan::new(0, 4, "fast", "university")]);
    }

    #[test]
    fn empty_document() {
        let doc = parse_nlu_markdown("").unwrap();
        assert_eq!(doc, NluDocument::default());
        assert_eq!(write_nlu_markdown(&[], &SynonymTable::new(), &[]), "");
    }

    #[test]
    fn synonyms_and_regex_sections() {
        let text = "## synonym:fast\n- fast uni\n- fast university\n\n## regex:university\n- fast|nust\n";
        let doc = parse_nlu_markdown(text).unwrap();
        assert_eq!(doc.synonyms.lookup("FAST UNI"), Some("fast"));
        assert_eq!(doc.patterns, vec![RegexPatternDef::new("university", "fast|nust")]);
        assert_eq!(write_nlu_markdown(&doc.examples, &doc.synonyms, &doc.patterns), text);
    }

    #[test]
    fn malformed_header_reports_line() {
        let err = parse_nlu_markdown("## intent:greet\n- salam\n## lookup:x\n").unwrap_err();
        assert_eq!(err.line(), Some(3));
        let err = parse_nlu_markdown("\n\n# intent:greet\n").unwrap_err();
        assert_eq!(err.line(), Some(3));
        let err = parse_nlu_markdown("## intent:Greet\n").unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 1, .. }));
    }

    #[test]
    fn bullet_outside_section() {
        let err = parse_nlu_markdown("- salam\n").unwrap_err();
        assert_eq!(err.line(), Some(1));
        let err = parse_nlu_markdown("## intent:greet\nsalam\n").unwrap_err();
        assert_eq!(err.line(), Some(2));
    }

    #[test]
    fn annotation_reinlined() {
        let ex = TrainingExample::new("fast ki fees", "fee").with_entity(EntitySpan::new(0, 4, "fast", "university"));
        let out = write_nlu_markdown(std::slice::from_ref(&ex), &SynonymTable::new(), &[]);
        assert_eq!(out, "## intent:fee\n- [fast](university) ki fees\n");
        assert_eq!(parse_nlu_markdown(&out).unwrap().examples, vec![ex]);
    }

    #[test]
    fn sections_sorted_by_intent() {
        let exs = vec![
            TrainingExample::new("fees kitni hai", "fee"),
            TrainingExample::new("salam", "greet"),
            TrainingExample::new("admission kab", "admission"),
        ];
        let out = write_nlu_markdown(&exs, &SynonymTable::new(), &[]);
        let headers: Vec<&str> = out.lines().filter(|l| l.starts_with("##")).collect();
        assert_eq!(headers, ["## intent:admission", "## intent:fee", "## intent:greet"]);
    }

    #[test]
    fn multiple_annotations_with_non_ascii() {
        let doc = parse_nlu_markdown("## intent:fee\n- kyā [fast](uni) aur [nust](uni) ki fees\n").unwrap();
        let ex = &doc.examples[0];
        assert_eq!(ex.text, "kyā fast aur nust ki fees");
        assert_eq!(ex.entities[0], EntitySpan::new(4, 8, "fast", "uni"));
        assert_eq!(ex.entities[1], EntitySpan::new(13, 17, "nust", "uni"));
    }
}
