//! TED-lite: a linear next-action ranker over windowed dialog state.
//!
//! State features are a bag of intents and a bag of previous actions drawn
//! from the last `max_history` turns. Items are flattened in order
//! (intent, its actions, next intent, ...) and each contributes
//! `1 / (age + 1)`, where age 0 is the most recent item.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::tracker::{story_transitions, DialogTracker, TurnState};
use super::{DialogError, PolicyConfig, PolicyDecision, PolicySource, ACTION_LISTEN};
use crate::nlu::softmax::softmax_in_place;
use crate::nlu::{train_softmax, SoftmaxRegression, SparseVector, TrainParams};
use crate::training_data::Story;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TedModel {
    pub intents: Vec<String>,
    /// Sorted; includes `action_listen`.
    pub actions: Vec<String>,
    pub max_history: usize,
    pub ranker: SoftmaxRegression,
    pub params: TrainParams,
    pub final_loss: f64,
}

/// Recency-weighted state features over `intents ++ actions`.
pub fn state_features(turns: &[TurnState], max_history: usize, intents: &[String], actions: &[String]) -> SparseVector {
    let intent_ix: BTreeMap<&str, usize> = intents.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let action_ix: BTreeMap<&str, usize> = actions.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let start = turns.len().saturating_sub(max_history);
    let mut items: Vec<Option<usize>> = Vec::new();
    for t in &turns[start..] {
        items.push(intent_ix.get(t.intent.as_str()).copied());
        for a in &t.actions {
            items.push(action_ix.get(a.as_str()).map(|i| intents.len() + i));
        }
    }
    let n = items.len();
    SparseVector::from_pairs(
        intents.len() + actions.len(),
        items
            .into_iter()
            .enumerate()
            .filter_map(|(pos, ix)| ix.map(|i| (i, 1.0 / (n - pos) as f64))),
    )
}

/// Labels and `(features, next action)` pairs from every story prefix.
pub fn ted_training_set(
    stories: &[Story],
    max_history: usize,
) -> (Vec<String>, Vec<String>, Vec<(SparseVector, usize)>) {
    let mut intents = BTreeSet::new();
    let mut actions = BTreeSet::new();
    actions.insert(ACTION_LISTEN.to_string());
    for s in stories {
        for step in &s.steps {
            intents.insert(step.intent.clone());
            actions.extend(step.actions.iter().cloned());
        }
    }
    let intents: Vec<String> = intents.into_iter().collect();
    let actions: Vec<String> = actions.into_iter().collect();
    let mut data = Vec::new();
    for s in stories {
        for (turns, next) in story_transitions(s) {
            let x = state_features(&turns, max_history, &intents, &actions);
            let y = actions.binary_search(&next).expect("action collected above");
            data.push((x, y));
        }
    }
    (intents, actions, data)
}

pub fn train_ted(stories: &[Story], max_history: usize, params: &TrainParams) -> Result<TedModel, DialogError> {
    let (intents, actions, data) = ted_training_set(stories, max_history);
    let distinct = actions.iter().filter(|a| a.as_str() != ACTION_LISTEN).count();
    if distinct < 2 {
        return Err(DialogError::TooFewActions(distinct));
    }
    let (ranker, final_loss) = train_softmax(&data, actions.len(), intents.len() + actions.len(), params)
        .map_err(|e| DialogError::Training(e.to_string()))?;
    Ok(TedModel {
        intents,
        actions,
        max_history,
        ranker,
        params: *params,
        final_loss,
    })
}

impl TedModel {
    /// Action probabilities for the tracker state. Right after a user
    /// message `action_listen` is masked out, since the bot must respond.
    pub fn action_probabilities(&self, tracker: &DialogTracker) -> Result<Vec<f64>, DialogError> {
        if tracker.is_empty() {
            return Err(DialogError::NoUserEvent);
        }
        let turns = tracker.turns();
        let x = state_features(&turns, self.max_history, &self.intents, &self.actions);
        let mut scores = self.ranker.scores(&x);
        let fresh_turn = turns.last().is_some_and(|t| t.actions.is_empty());
        if fresh_turn {
            if let Ok(i) = self.actions.binary_search_by(|a| a.as_str().cmp(ACTION_LISTEN)) {
                scores[i] = f64::NEG_INFINITY;
            }
        }
        softmax_in_place(&mut scores);
        Ok(scores)
    }
}

pub fn predict_ted(
    model: &TedModel,
    tracker: &DialogTracker,
    config: &PolicyConfig,
) -> Result<Option<PolicyDecision>, DialogError> {
    let probs = model.action_probabilities(tracker)?;
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    let confidence = probs[best];
    Ok((confidence >= config.ted_threshold)
        .then(|| PolicyDecision::new(&model.actions[best], confidence, PolicySource::Ted)))
}
