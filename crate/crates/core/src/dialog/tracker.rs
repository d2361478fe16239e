use serde::{Deserialize, Serialize};

use super::{DialogError, ACTION_LISTEN};
use crate::nlu::ParseResult;
use crate::training_data::Story;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    User { text: String, parse: ParseResult },
    Action { name: String },
    Bot { text: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedEvent {
    /// Index of the user turn this event belongs to.
    pub turn: usize,
    #[serde(flatten)]
    pub event: Event,
}

/// One user turn as the policies see it: the recognized intent and the
/// actions taken so far in response.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TurnState {
    pub intent: String,
    pub actions: Vec<String>,
}

impl TurnState {
    pub fn new(intent: &str, actions: &[&str]) -> Self {
        Self {
            intent: intent.to_string(),
            actions: actions.iter().map(|a| a.to_string()).collect(),
        }
    }
}

/// Per-conversation event log. The first event is always a user message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogTracker {
    pub conversation_id: String,
    events: Vec<TrackedEvent>,
}

impl DialogTracker {
    pub fn new(conversation_id: impl Into<String>) -> Self {
        Self {
            conversation_id: conversation_id.into(),
            events: Vec::new(),
        }
    }

    /// Rebuilds tracker state from explicit turns, each user event carrying
    /// a full-confidence parse of its intent.
    pub fn from_turns(conversation_id: &str, turns: &[TurnState]) -> Self {
        let mut t = Self::new(conversation_id);
        for turn in turns {
            t.push_user("", ParseResult::from_intent(&turn.intent, ""))
                .expect("ranking is non-empty");
            for a in &turn.actions {
                t.push_action(a).expect("user event exists");
            }
        }
        t
    }

    pub fn events(&self) -> &[TrackedEvent] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn turn_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.event, Event::User { .. }))
            .count()
    }

    fn current_turn(&self) -> Option<usize> {
        self.turn_count().checked_sub(1)
    }

    pub fn push_user(&mut self, text: &str, parse: ParseResult) -> Result<usize, DialogError> {
        if parse.ranking.is_empty() {
            return Err(DialogError::EmptyRanking);
        }
        let turn = self.turn_count();
        self.events.push(TrackedEvent {
            turn,
            event: Event::User {
                text: text.to_string(),
                parse,
            },
        });
        Ok(turn)
    }

    pub fn push_action(&mut self, name: &str) -> Result<(), DialogError> {
        let turn = self.current_turn().ok_or(DialogError::NoUserEvent)?;
        self.events.push(TrackedEvent {
            turn,
            event: Event::Action { name: name.to_string() },
        });
        Ok(())
    }

    pub fn push_bot(&mut self, text: &str) -> Result<(), DialogError> {
        let turn = self.current_turn().ok_or(DialogError::NoUserEvent)?;
        self.events.push(TrackedEvent {
            turn,
            event: Event::Bot { text: text.to_string() },
        });
        Ok(())
    }

    pub fn latest_parse(&self) -> Option<&ParseResult> {
        self.events.iter().rev().find_map(|e| match &e.event {
            Event::User { parse, .. } => Some(parse),
            _ => None,
        })
    }

    pub fn latest_user_text(&self) -> Option<&str> {
        self.events.iter().rev().find_map(|e| match &e.event {
            Event::User { text, .. } => Some(text.as_str()),
            _ => None,
        })
    }

    /// Turns with their actions; `action_listen` markers are left out.
    pub fn turns(&self) -> Vec<TurnState> {
        let mut out: Vec<TurnState> = Vec::new();
        for e in &self.events {
            match &e.event {
                Event::User { parse, .. } => out.push(TurnState {
                    intent: parse.intent().to_string(),
                    actions: Vec::new(),
                }),
                Event::Action { name } if name != ACTION_LISTEN => {
                    if let Some(last) = out.last_mut() {
                        last.actions.push(name.clone());
                    }
                }
                _ => {}
            }
        }
        out
    }
}

/// Canonical encoding of the last `max_history` turns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateKey(pub String);

impl StateKey {
    pub fn from_turns(turns: &[TurnState], max_history: usize) -> Self {
        let start = turns.len().saturating_sub(max_history);
        let key = turns[start..]
            .iter()
            .map(|t| format!("{}>{}", t.intent, t.actions.join(",")))
            .collect::<Vec<_>>()
            .join("|");
        StateKey(key)
    }
}

/// Every `(state, next action)` pair a story implies: after each intent and
/// each action, with `action_listen` closing every step.
pub fn story_transitions(story: &Story) -> Vec<(Vec<TurnState>, String)> {
    let mut out = Vec::new();
    let mut turns: Vec<TurnState> = Vec::new();
    for step in &story.steps {
        turns.push(TurnState {
            intent: step.intent.clone(),
            actions: Vec::new(),
        });
        for action in step.actions.iter().map(String::as_str).chain([ACTION_LISTEN]) {
            out.push((turns.clone(), action.to_string()));
            if action != ACTION_LISTEN {
                turns.last_mut().unwrap().actions.push(action.to_string());
            }
        }
    }
    out
}
