//! Triple store with alias-based entity linking and per-conversation turn
//! history. Facts are immutable once loaded; the turn log is append-only and
//! locked per conversation.
//!
//! File formats (tab separated, `#` comments and blank lines ignored):
//!
//! ```text
//! fast_uni    located_in    islamabad
//! fast_uni    fee_bs        "9500 per credit hour"
//! @alias      fast_uni      fast uni
//! ```
//!
//! A quoted object is a literal; anything else names an entity. The
//! predicate file has two columns, `predicate<TAB>phrase`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nlu::Token;

/// How many recent turns an entity-free query may borrow entities from.
pub const CONTEXT_LOOKBACK: usize = 5;

/// Minimum shared prefix for a hint word to match a predicate word.
const STEM_PREFIX: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn parse_err(line: usize, message: impl Into<String>) -> GraphError {
    GraphError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum TripleObject {
    Entity(String),
    Literal(String),
}

impl TripleObject {
    pub fn label(&self) -> &str {
        match self {
            TripleObject::Entity(s) | TripleObject::Literal(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: TripleObject,
}

impl Triple {
    pub fn new(subject: &str, predicate: &str, object: TripleObject) -> Self {
        Self {
            subject: subject.to_string(),
            predicate: predicate.to_string(),
            object,
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject, self.predicate, self.object.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityNode {
    pub id: String,
    /// Lowercase, unique; always contains the lowercased id.
    pub aliases: Vec<String>,
}

impl EntityNode {
    fn new(id: &str) -> Self {
        Self {
            id: id.to_string(),
            aliases: vec![normalize_alias(id)],
        }
    }

    fn add_alias(&mut self, surface: &str) {
        let a = normalize_alias(surface);
        if !a.is_empty() && !self.aliases.contains(&a) {
            self.aliases.push(a);
        }
    }
}

fn normalize_alias(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn normalize_token(s: &str) -> String {
    s.to_lowercase()
        .trim_matches(|c: char| c.is_ascii_punctuation() || c == '؟')
        .to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogTurnNode {
    pub conversation_id: String,
    pub turn_index: usize,
    pub utterance: String,
    pub intent: String,
    pub entity_ids: Vec<String>,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgAnswer {
    pub text: String,
    pub triple: Triple,
}

#[derive(Default)]
struct TurnLog {
    conversations: RwLock<HashMap<String, Arc<Mutex<Vec<DialogTurnNode>>>>>,
}

impl TurnLog {
    fn conversation(&self, id: &str) -> Arc<Mutex<Vec<DialogTurnNode>>> {
        if let Some(c) = self.conversations.read().unwrap().get(id) {
            return Arc::clone(c);
        }
        let mut map = self.conversations.write().unwrap();
        Arc::clone(map.entry(id.to_string()).or_default())
    }

    fn existing(&self, id: &str) -> Option<Arc<Mutex<Vec<DialogTurnNode>>>> {
        self.conversations.read().unwrap().get(id).cloned()
    }
}

#[derive(Default)]
pub struct GraphStore {
    triples: BTreeSet<Triple>,
    entities: BTreeMap<String, EntityNode>,
    predicates: BTreeMap<String, String>,
    /// `(alias tokens, entity id)`, longest alias first.
    alias_index: Vec<(Vec<String>, String)>,
    turns: TurnLog,
}

impl fmt::Debug for GraphStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GraphStore")
            .field("triples", &self.triples.len())
            .field("entities", &self.entities.len())
            .field("predicates", &self.predicates.len())
            .finish()
    }
}

fn parse_object(raw: &str) -> TripleObject {
    let raw = raw.trim();
    if raw.len() >= 2 && raw.starts_with('"') && raw.ends_with('"') {
        TripleObject::Literal(raw[1..raw.len() - 1].to_string())
    } else {
        TripleObject::Entity(raw.to_string())
    }
}

fn content_lines(document: &str) -> impl Iterator<Item = (usize, &str)> {
    document
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

/// Parses the triple file into a fresh store.
pub fn load_triples(document: &str) -> Result<GraphStore, GraphError> {
    let mut store = GraphStore::default();
    for (line_no, line) in content_lines(document) {
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(parse_err(
                line_no,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        if fields[0] == "@alias" {
            store.entity_mut(fields[1]).add_alias(fields[2]);
            continue;
        }
        let object = parse_object(fields[2]);
        store.entity_mut(fields[0]);
        if let TripleObject::Entity(id) = &object {
            store.entity_mut(id);
        }
        store.triples.insert(Triple::new(fields[0], fields[1], object));
    }
    store.rebuild_alias_index();
    Ok(store)
}

impl GraphStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn entity_mut(&mut self, id: &str) -> &mut EntityNode {
        self.entities
            .entry(id.to_string())
            .or_insert_with(|| EntityNode::new(id))
    }

    fn rebuild_alias_index(&mut self) {
        let mut index: Vec<(Vec<String>, String)> = self
            .entities
            .values()
            .flat_map(|n| {
                n.aliases
                    .iter()
                    .map(move |a| (a.split(' ').map(str::to_string).collect(), n.id.clone()))
            })
            .collect();
        index.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.1.cmp(&b.1)));
        self.alias_index = index;
    }

    /// Reads `predicate<TAB>phrase` lines.
    pub fn load_predicates(&mut self, document: &str) -> Result<(), GraphError> {
        for (line_no, line) in content_lines(document) {
            let Some((pred, phrase)) = line.split_once('\t') else {
                return Err(parse_err(line_no, "expected predicate<TAB>phrase"));
            };
            let (pred, phrase) = (pred.trim(), phrase.trim());
            if pred.is_empty() || phrase.is_empty() || phrase.contains('\t') {
                return Err(parse_err(line_no, "expected predicate<TAB>phrase"));
            }
            self.predicates.insert(pred.to_string(), phrase.to_string());
        }
        Ok(())
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.contains(triple)
    }

    pub fn entity(&self, id: &str) -> Option<&EntityNode> {
        self.entities.get(id)
    }

    /// Verbalization of a predicate; falls back to the id with `_` as spaces.
    pub fn predicate_phrase(&self, predicate: &str) -> String {
        self.predicates
            .get(predicate)
            .cloned()
            .unwrap_or_else(|| predicate.replace('_', " "))
    }

    /// Greedy left-to-right longest alias match. Each token is consumed at
    /// most once; ids come back in position order without repeats.
    pub fn link_entities(&self, tokens: &[Token]) -> Vec<String> {
        let words: Vec<String> = tokens.iter().map(|t| normalize_token(&t.text)).collect();
        let mut out: Vec<String> = Vec::new();
        let mut i = 0;
        while i < words.len() {
            let hit = self.alias_index.iter().find(|(alias, _)| {
                alias.len() <= words.len() - i && alias.iter().zip(&words[i..]).all(|(a, w)| a == w)
            });
            match hit {
                Some((alias, id)) => {
                    if !out.contains(id) {
                        out.push(id.clone());
                    }
                    i += alias.len();
                }
                None => i += 1,
            }
        }
        out
    }

    fn hint_matches(&self, predicate: &str, hint: &[String]) -> bool {
        let phrase = self.predicate_phrase(predicate).to_lowercase();
        phrase.split_whitespace().any(|word| {
            hint.iter().any(|h| {
                h == word
                    || (h.chars().count() >= STEM_PREFIX
                        && word.chars().count() >= STEM_PREFIX
                        && h.chars().take(STEM_PREFIX).eq(word.chars().take(STEM_PREFIX)))
            })
        })
    }

    /// Triples about `entities` ordered by answer priority.
    ///
    /// Hop 1 takes triples whose subject is one of the entities; hop 2 adds
    /// triples about entities reached through a hop-1 object. When hint
    /// words match a predicate phrase only those predicates are kept, unless
    /// that leaves nothing.
    pub fn retrieve(&self, entities: &[String], predicate_hint: Option<&[String]>, hops: u8) -> Vec<Triple> {
        let seeds: BTreeSet<&str> = entities.iter().map(String::as_str).collect();
        let mut found: Vec<(u8, &Triple)> = self
            .triples
            .iter()
            .filter(|t| seeds.contains(t.subject.as_str()))
            .map(|t| (1, t))
            .collect();
        if hops >= 2 {
            let bridge: BTreeSet<&str> = found
                .iter()
                .filter_map(|(_, t)| match &t.object {
                    TripleObject::Entity(e) if !seeds.contains(e.as_str()) => Some(e.as_str()),
                    _ => None,
                })
                .collect();
            found.extend(
                self.triples
                    .iter()
                    .filter(|t| bridge.contains(t.subject.as_str()))
                    .map(|t| (2, t)),
            );
        }
        if let Some(hint) = predicate_hint {
            let hint: Vec<String> = hint.iter().map(|h| normalize_token(h)).collect();
            let filtered: Vec<(u8, &Triple)> = found
                .iter()
                .copied()
                .filter(|(_, t)| self.hint_matches(&t.predicate, &hint))
                .collect();
            if !filtered.is_empty() {
                found = filtered;
            }
        }
        found.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(b.1)));
        found.into_iter().map(|(_, t)| t.clone()).collect()
    }

    /// `"<subject> <predicate phrase> <object>"`.
    pub fn verbalize(&self, triple: &Triple) -> String {
        format!(
            "{} {} {}",
            triple.subject,
            self.predicate_phrase(&triple.predicate),
            triple.object.label()
        )
    }

    /// Appends a turn and returns its 0-based index within the conversation.
    pub fn record_turn(&self, conversation_id: &str, utterance: &str, intent: &str, entity_ids: &[String]) -> usize {
        let conv = self.turns.conversation(conversation_id);
        let mut log = conv.lock().unwrap();
        let turn_index = log.len();
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        log.push(DialogTurnNode {
            conversation_id: conversation_id.to_string(),
            turn_index,
            utterance: utterance.to_string(),
            intent: intent.to_string(),
            entity_ids: entity_ids.to_vec(),
            timestamp,
        });
        turn_index
    }

    pub fn turns(&self, conversation_id: &str) -> Vec<DialogTurnNode> {
        self.turns
            .existing(conversation_id)
            .map(|c| c.lock().unwrap().clone())
            .unwrap_or_default()
    }

    /// Entities of the most recent of the last few turns that linked any.
    pub fn context_entities(&self, conversation_id: &str) -> Vec<String> {
        let Some(conv) = self.turns.existing(conversation_id) else {
            return Vec::new();
        };
        let log = conv.lock().unwrap();
        log.iter()
            .rev()
            .take(CONTEXT_LOOKBACK)
            .find(|t| !t.entity_ids.is_empty())
            .map(|t| t.entity_ids.clone())
            .unwrap_or_default()
    }

    /// Links the query, borrowing entities from this conversation's recent
    /// turns when the query names none, and verbalizes the best triple.
    /// A borrowed entity alone is not enough: the follow-up must also name
    /// a predicate, so unrelated input does not get an answer about the
    /// previous topic.
    pub fn answer(&self, conversation_id: &str, tokens: &[Token]) -> Option<KgAnswer> {
        let mut entities = self.link_entities(tokens);
        let borrowed = entities.is_empty();
        if borrowed {
            entities = self.context_entities(conversation_id);
        }
        if entities.is_empty() {
            return None;
        }
        let hint: Vec<String> = tokens.iter().map(|t| normalize_token(&t.text)).collect();
        let triple = self.retrieve(&entities, Some(&hint), 2).into_iter().next()?;
        if borrowed && !self.hint_matches(&triple.predicate, &hint) {
            return None;
        }
        Some(KgAnswer {
            text: self.verbalize(&triple),
            triple,
        })
    }
}
