use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::featurizer::PatternSet;
use super::tokenizer::tokenize;
use crate::training_data::{slice_chars, EntitySpan, SynonymTable, TrainingExample};

/// Entity type to known surface forms (stored lowercase). Matching is done
/// over whole tokens, case-insensitively.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gazetteer {
    entries: BTreeMap<String, BTreeSet<String>>,
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entity: &str, surface: &str) {
        let surface = surface.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        if !surface.is_empty() {
            self.entries.entry(entity.to_string()).or_default().insert(surface);
        }
    }

    /// Annotated values from the corpus, plus every synonym surface whose
    /// canonical value was seen under some entity type.
    pub fn from_training(examples: &[TrainingExample], synonyms: &SynonymTable) -> Self {
        let mut g = Self::new();
        for ex in examples {
            for span in &ex.entities {
                g.insert(&span.entity, &span.value);
            }
        }
        let mut by_canonical: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (entity, surfaces) in &g.entries {
            for s in surfaces {
                if let Some(c) = synonyms.lookup(s) {
                    by_canonical.entry(c.to_lowercase()).or_default().insert(entity.clone());
                }
            }
        }
        for (surface, canonical) in synonyms.iter() {
            if let Some(entities) = by_canonical.get(&canonical.to_lowercase()) {
                for e in entities.clone() {
                    g.insert(&e, surface);
                }
            }
        }
        g
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries
            .iter()
            .flat_map(|(e, set)| set.iter().map(move |s| (e.as_str(), s.as_str())))
    }
}

/// Regex matches plus gazetteer hits, resolved to a non-overlapping set:
/// longer spans win, ties go to the leftmost, then to the entity name.
pub fn extract_entities(utterance: &str, patterns: &PatternSet, gazetteer: &Gazetteer) -> Vec<EntitySpan> {
    let mut candidates: Vec<(usize, usize, String)> = Vec::new();

    for (def, re) in patterns.iter() {
        for m in re.find_iter(utterance) {
            if m.start() == m.end() {
                continue;
            }
            let start = utterance[..m.start()].chars().count();
            let end = start + m.as_str().chars().count();
            candidates.push((start, end, def.name.clone()));
        }
    }

    let tokens = tokenize(utterance);
    let lowered: Vec<String> = tokens.iter().map(|t| t.text.to_lowercase()).collect();
    for (entity, surface) in gazetteer.iter() {
        let parts: Vec<&str> = surface.split(' ').collect();
        if parts.len() > lowered.len() {
            continue;
        }
        for i in 0..=lowered.len() - parts.len() {
            if lowered[i..i + parts.len()].iter().zip(&parts).all(|(a, b)| a == b) {
                candidates.push((tokens[i].start, tokens[i + parts.len() - 1].end, entity.to_string()));
            }
        }
    }

    candidates.sort_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.0.cmp(&b.0)).then(a.2.cmp(&b.2)));
    let mut accepted: Vec<EntitySpan> = Vec::new();
    for (start, end, entity) in candidates {
        let span = EntitySpan::new(start, end, slice_chars(utterance, start, end), entity);
        if accepted.iter().all(|a| !a.overlaps(&span)) {
            accepted.push(span);
        }
    }
    accepted.sort_by_key(|s| s.start);
    accepted
}

/// Replaces each value with its canonical form; offsets are left alone.
pub fn apply_synonyms(spans: &[EntitySpan], table: &SynonymTable) -> Vec<EntitySpan> {
    spans
        .iter()
        .map(|s| {
            let mut s = s.clone();
            if let Some(c) = table.lookup(&s.value) {
                s.value = c.to_string();
            }
            s
        })
        .collect()
}
