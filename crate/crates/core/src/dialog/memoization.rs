use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::tracker::{story_transitions, DialogTracker, StateKey};
use super::{PolicyDecision, PolicySource};
use crate::training_data::Story;

/// Exact lookup table from windowed dialog state to the next action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoIndex {
    pub max_history: usize,
    entries: BTreeMap<StateKey, String>,
}

impl MemoIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &StateKey) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

/// Keys that see two different next actions are dropped, so the policy
/// abstains instead of guessing.
pub fn train_memoization(stories: &[Story], max_history: usize) -> MemoIndex {
    let mut entries: BTreeMap<StateKey, String> = BTreeMap::new();
    let mut conflicted: BTreeSet<StateKey> = BTreeSet::new();
    for story in stories {
        for (turns, next) in story_transitions(story) {
            let key = StateKey::from_turns(&turns, max_history);
            if conflicted.contains(&key) {
                continue;
            }
            match entries.get(&key) {
                Some(existing) if existing != &next => {
                    entries.remove(&key);
                    conflicted.insert(key);
                }
                Some(_) => {}
                None => {
                    entries.insert(key, next);
                }
            }
        }
    }
    MemoIndex { max_history, entries }
}

pub fn predict_memoization(index: &MemoIndex, tracker: &DialogTracker) -> Option<PolicyDecision> {
    let key = StateKey::from_turns(&tracker.turns(), index.max_history);
    index
        .get(&key)
        .map(|action| PolicyDecision::new(action, 1.0, PolicySource::Memoization))
}
