//! Next-action selection.
//!
//! Policies run as a strict cascade: memoization, then the NLU-confidence
//! fallback, then TED-lite, then the knowledge graph, and finally a fixed
//! default utterance. The first stage that produces a decision wins and no
//! later stage is consulted. Memoization only looks up states whose latest
//! intent cleared the NLU threshold.

mod memoization;
mod ted;
mod tracker;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use memoization::{predict_memoization, train_memoization, MemoIndex};
pub use ted::{predict_ted, state_features, ted_training_set, train_ted, TedModel};
pub use tracker::{story_transitions, DialogTracker, Event, StateKey, TrackedEvent, TurnState};

use crate::knowledge_graph::{GraphStore, Triple};
use crate::nlu::{tokenize, ParseResult, TrainParams};
use crate::training_data::{ProjectConfig, ResponseTemplate, Story};

pub const ACTION_LISTEN: &str = "action_listen";
pub const ACTION_KNOWLEDGE_GRAPH: &str = "action_knowledge_graph";
pub const ACTION_DEFAULT_FALLBACK: &str = "action_default_fallback";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DialogError {
    #[error("tracker has no user event")]
    NoUserEvent,
    #[error("user event carries an empty intent ranking")]
    EmptyRanking,
    #[error("TED needs at least two distinct actions, found {0}")]
    TooFewActions(usize),
    #[error("TED training failed: {0}")]
    Training(String),
    #[error("no response template for action {0:?}")]
    UnknownAction(String),
    #[error("invalid policy configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySource {
    Memoization,
    Fallback,
    Ted,
    KnowledgeGraph,
    DefaultFallback,
}

impl PolicySource {
    pub const CASCADE: [PolicySource; 5] = [
        PolicySource::Memoization,
        PolicySource::Fallback,
        PolicySource::Ted,
        PolicySource::KnowledgeGraph,
        PolicySource::DefaultFallback,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicySource::Memoization => "memoization",
            PolicySource::Fallback => "fallback",
            PolicySource::Ted => "ted",
            PolicySource::KnowledgeGraph => "knowledge_graph",
            PolicySource::DefaultFallback => "default_fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub action: String,
    pub confidence: f64,
    pub source: PolicySource,
    /// Ready-made reply text (knowledge-graph and default decisions).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triple: Option<Triple>,
}

impl PolicyDecision {
    pub fn new(action: &str, confidence: f64, source: PolicySource) -> Self {
        Self {
            action: action.to_string(),
            confidence,
            source,
            text: None,
            triple: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub nlu_threshold: f64,
    pub ted_threshold: f64,
    pub max_history: usize,
    pub fallback_action: String,
    pub default_utterance: String,
    pub ted: TrainParams,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            nlu_threshold: 0.4,
            ted_threshold: 0.35,
            max_history: 3,
            fallback_action: "utter_fallback".to_string(),
            default_utterance: "Maaf kijiye, mujhe is sawal ka jawab maloom nahi.".to_string(),
            ted: TrainParams::default(),
        }
    }
}

impl PolicyConfig {
    /// Reads the `policies:` section of `config.yml`.
    pub fn from_project(config: &ProjectConfig, seed: u64) -> Result<Self, DialogError> {
        let mut c = Self::default();
        if let Some(p) = config.policy("MemoizationPolicy") {
            c.max_history = p.usize_param("max_history").unwrap_or(c.max_history);
        }
        if let Some(p) = config.policy("FallbackPolicy") {
            c.nlu_threshold = p.f64_param("nlu_threshold").unwrap_or(c.nlu_threshold);
            if let Some(a) = p.str_param("fallback_action_name") {
                c.fallback_action = a.to_string();
            }
            if let Some(u) = p.str_param("default_utterance") {
                c.default_utterance = u.to_string();
            }
        }
        if let Some(p) = config.policy("TEDPolicy") {
            c.ted_threshold = p.f64_param("threshold").unwrap_or(c.ted_threshold);
            c.ted.epochs = p.usize_param("epochs").unwrap_or(c.ted.epochs);
            c.ted.learning_rate = p.f64_param("learning_rate").unwrap_or(c.ted.learning_rate);
            c.ted.l2 = p.f64_param("l2").unwrap_or(c.ted.l2);
        }
        c.ted.seed = seed;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), DialogError> {
        for (name, t) in [
            ("nlu_threshold", self.nlu_threshold),
            ("ted_threshold", self.ted_threshold),
        ] {
            if !(t > 0.0 && t < 1.0) {
                return Err(DialogError::InvalidConfig(format!("{name} = {t} is outside (0, 1)")));
            }
        }
        if self.max_history == 0 {
            return Err(DialogError::InvalidConfig("max_history must be at least 1".into()));
        }
        Ok(())
    }
}

/// Fires when the top intent confidence is strictly below the threshold.
pub fn predict_fallback(parse: &ParseResult, config: &PolicyConfig) -> Option<PolicyDecision> {
    let top = parse.confidence();
    (top < config.nlu_threshold)
        .then(|| PolicyDecision::new(&config.fallback_action, 1.0 - top, PolicySource::Fallback))
}

/// Trained dialogue policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEnsemble {
    pub config: PolicyConfig,
    pub memo: MemoIndex,
    pub ted: TedModel,
}

impl PolicyEnsemble {
    pub fn train(stories: &[Story], config: PolicyConfig) -> Result<Self, DialogError> {
        config.validate()?;
        let memo = train_memoization(stories, config.max_history);
        let ted = train_ted(stories, config.max_history, &config.ted)?;
        Ok(Self { config, memo, ted })
    }

    pub fn decide(&self, tracker: &DialogTracker, kg: Option<&GraphStore>) -> Result<PolicyDecision, DialogError> {
        self.decide_traced(tracker, kg, &mut Vec::new())
    }

    /// Like [`decide`](Self::decide), recording every stage consulted.
    pub fn decide_traced(
        &self,
        tracker: &DialogTracker,
        kg: Option<&GraphStore>,
        consulted: &mut Vec<PolicySource>,
    ) -> Result<PolicyDecision, DialogError> {
        let parse = tracker.latest_parse().ok_or(DialogError::NoUserEvent)?;

        // An intent below the NLU threshold is not recognized, so there is
        // no state for memoization to look up.
        consulted.push(PolicySource::Memoization);
        if parse.confidence() >= self.config.nlu_threshold {
            if let Some(d) = predict_memoization(&self.memo, tracker) {
                return Ok(d);
            }
        }
        consulted.push(PolicySource::Fallback);
        if let Some(d) = predict_fallback(parse, &self.config) {
            return Ok(d);
        }
        consulted.push(PolicySource::Ted);
        if let Some(d) = predict_ted(&self.ted, tracker, &self.config)? {
            return Ok(d);
        }
        consulted.push(PolicySource::KnowledgeGraph);
        if let Some(kg) = kg {
            let tokens = tokenize(tracker.latest_user_text().unwrap_or(""));
            if let Some(answer) = kg.answer(&tracker.conversation_id, &tokens) {
                return Ok(PolicyDecision {
                    action: ACTION_KNOWLEDGE_GRAPH.to_string(),
                    confidence: 1.0,
                    source: PolicySource::KnowledgeGraph,
                    text: Some(answer.text),
                    triple: Some(answer.triple),
                });
            }
        }
        consulted.push(PolicySource::DefaultFallback);
        Ok(PolicyDecision {
            action: ACTION_DEFAULT_FALLBACK.to_string(),
            confidence: 0.0,
            source: PolicySource::DefaultFallback,
            text: Some(self.config.default_utterance.clone()),
            triple: None,
        })
    }
}

/// Uniform choice among the action's variants.
pub fn select_response<R: Rng + ?Sized>(
    action: &str,
    templates: &BTreeMap<String, ResponseTemplate>,
    rng: &mut R,
) -> Result<String, DialogError> {
    let t = templates
        .get(action)
        .ok_or_else(|| DialogError::UnknownAction(action.to_string()))?;
    let i = rng.random_range(0..t.variants.len());
    Ok(t.variants[i].clone())
}
