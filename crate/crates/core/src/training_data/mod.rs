//! Corpus artifacts: `nlu.md`, `stories.md`, `conversationtest.md`,
//! `config.yml` and `responses.json`, plus the trained-model archive.
//!
//! All parsers are total over their grammar: any malformed input comes back
//! as a [`FormatError`] carrying the offending line number.

mod archive;
mod config;
mod nlu_md;
mod responses;
mod stories;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use archive::{
    artifact_members, fingerprint_members, load_model, package_model, read_archive, write_archive, ArchiveError,
    ArchiveMetadata, FORMAT_VERSION, METADATA_MEMBER,
};
pub use config::{ComponentSpec, ProjectConfig};
pub use nlu_md::{parse_nlu_markdown, write_nlu_markdown};
pub use responses::{parse_responses, write_responses};
pub use stories::{parse_stories_markdown, write_stories_markdown};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{}", match .line { Some(l) => format!("line {l}: {message}"), None => message.clone() })]
    Validation { line: Option<usize>, message: String },
}

impl FormatError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Self::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn validation(line: Option<usize>, message: impl Into<String>) -> Self {
        Self::Validation {
            line,
            message: message.into(),
        }
    }

    /// Line number the diagnostic points at, when one is known.
    pub fn line(&self) -> Option<usize> {
        match self {
            Self::Parse { line, .. } => Some(*line),
            Self::Validation { line, .. } => *line,
        }
    }
}

/// A typed span inside an utterance. Offsets count Unicode scalar values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub value: String,
    pub entity: String,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, value: impl Into<String>, entity: impl Into<String>) -> Self {
        Self {
            start,
            end,
            value: value.into(),
            entity: entity.into(),
        }
    }

    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub text: String,
    pub intent: String,
    #[serde(default)]
    pub entities: Vec<EntitySpan>,
}

impl TrainingExample {
    pub fn new(text: impl Into<String>, intent: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            intent: intent.into(),
            entities: Vec::new(),
        }
    }

    pub fn with_entity(mut self, span: EntitySpan) -> Self {
        self.entities.push(span);
        self
    }

    /// Checks the text, label and span invariants.
    pub fn validate(&self) -> Result<(), String> {
        if self.text.trim().is_empty() {
            return Err("example text is empty".into());
        }
        if !is_label(&self.intent) {
            return Err(format!("invalid intent name {:?}", self.intent));
        }
        let len = self.text.chars().count();
        for span in &self.entities {
            if span.start >= span.end || span.end > len {
                return Err(format!(
                    "entity span {}..{} out of bounds for {:?}",
                    span.start, span.end, self.text
                ));
            }
            if slice_chars(&self.text, span.start, span.end) != span.value {
                return Err(format!(
                    "entity value {:?} does not match text slice {}..{}",
                    span.value, span.start, span.end
                ));
            }
        }
        let mut sorted: Vec<&EntitySpan> = self.entities.iter().collect();
        sorted.sort_by_key(|s| (s.start, s.end));
        for pair in sorted.windows(2) {
            if pair[0].overlaps(pair[1]) {
                return Err(format!(
                    "overlapping entity annotations {:?} and {:?}",
                    pair[0].value, pair[1].value
                ));
            }
        }
        Ok(())
    }
}

/// `## regex:<name>` bullet: a pattern contributing one featurizer flag and
/// extracting entities of type `name`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegexPatternDef {
    pub name: String,
    pub pattern: String,
}

impl RegexPatternDef {
    pub fn new(name: impl Into<String>, pattern: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pattern: pattern.into(),
        }
    }
}

/// Surface form to canonical value. Keys are trimmed and lowercased, and
/// every canonical value maps to itself.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymTable {
    entries: BTreeMap<String, String>,
}

pub(crate) fn normalize_key(s: &str) -> String {
    s.trim().to_lowercase()
}

impl SynonymTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `surface` as a synonym of `canonical`.
    ///
    /// Rejects chains: a canonical value may not itself be a surface form of
    /// some other value, and a surface may not already be someone's canonical.
    pub fn insert(&mut self, surface: &str, canonical: &str) -> Result<(), String> {
        let key = normalize_key(surface);
        let canonical = canonical.trim().to_string();
        if key.is_empty() || canonical.is_empty() {
            return Err("empty synonym".into());
        }
        let canon_key = normalize_key(&canonical);
        if key == canon_key {
            return Ok(());
        }
        if let Some(existing) = self.entries.get(&canon_key) {
            return Err(format!(
                "canonical value {canonical:?} is itself a synonym of {existing:?}"
            ));
        }
        if self.entries.values().any(|c| normalize_key(c) == key) {
            return Err(format!("{surface:?} is already a canonical value"));
        }
        if let Some(prev) = self.entries.get(&key) {
            if prev != &canonical {
                return Err(format!("{surface:?} maps to both {prev:?} and {canonical:?}"));
            }
        }
        self.entries.insert(key, canonical);
        Ok(())
    }

    /// Canonical form of `value`, if the table knows it.
    pub fn lookup(&self, value: &str) -> Option<&str> {
        let key = normalize_key(value);
        if let Some(c) = self.entries.get(&key) {
            return Some(c.as_str());
        }
        self.entries
            .values()
            .find(|c| normalize_key(c) == key)
            .map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// `(surface, canonical)` pairs in key order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// Everything `nlu.md` carries.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NluDocument {
    pub examples: Vec<TrainingExample>,
    pub synonyms: SynonymTable,
    pub patterns: Vec<RegexPatternDef>,
}

impl NluDocument {
    /// Reorders the document the way the writer emits it: examples grouped by
    /// intent in lexicographic order, patterns by name. Order inside a group
    /// is preserved.
    pub fn canonicalized(mut self) -> Self {
        self.examples.sort_by(|a, b| a.intent.cmp(&b.intent));
        self.patterns.sort_by(|a, b| a.name.cmp(&b.name));
        self
    }

    /// Sorted, deduplicated intent labels.
    pub fn intents(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.examples.iter().map(|e| e.intent.clone()).collect();
        labels.sort();
        labels.dedup();
        labels
    }
}

/// One user turn of a story.
///
/// `utterance` is only used by conversation tests (`* intent: text`), where
/// the text is run through the NLU pipeline instead of trusting the label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryStep {
    pub intent: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance: Option<String>,
    pub actions: Vec<String>,
}

impl StoryStep {
    pub fn new(intent: impl Into<String>, actions: &[&str]) -> Self {
        Self {
            intent: intent.into(),
            utterance: None,
            actions: actions.iter().map(|a| a.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Story {
    pub name: String,
    pub steps: Vec<StoryStep>,
}

impl Story {
    pub fn new(name: impl Into<String>, steps: Vec<StoryStep>) -> Self {
        Self {
            name: name.into(),
            steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseTemplate {
    pub action: String,
    pub variants: Vec<String>,
}

/// Labels (intents, actions, entity types) are restricted to `[a-z0-9_]+`.
pub fn is_label(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

pub(crate) fn slice_chars(s: &str, start: usize, end: usize) -> String {
    s.chars().skip(start).take(end.saturating_sub(start)).collect()
}
