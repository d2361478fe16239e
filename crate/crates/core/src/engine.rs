//! Training pipeline and the per-message turn loop.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialog::{
    select_response, DialogError, DialogTracker, PolicyConfig, PolicyDecision, PolicyEnsemble, PolicySource,
    ACTION_LISTEN,
};
use crate::knowledge_graph::{load_triples, GraphError, GraphStore, Triple};
use crate::nlu::{tokenize, NluConfig, NluError, NluModel, ParseResult};
use crate::training_data::{
    artifact_members, fingerprint_members, parse_nlu_markdown, parse_responses, parse_stories_markdown, ArchiveError,
    FormatError, NluDocument, ProjectConfig, ResponseTemplate, Story,
};

/// Upper bound on bot actions after a single user message.
pub const MAX_ACTIONS_PER_TURN: usize = 5;

pub const NLU_FILE: &str = "nlu.md";
pub const STORIES_FILE: &str = "stories.md";
pub const RESPONSES_FILE: &str = "responses.json";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Graph {
        path: PathBuf,
        #[source]
        source: GraphError,
    },
    #[error(transparent)]
    Nlu(#[from] NluError),
    #[error(transparent)]
    Dialog(#[from] DialogError),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error("stories use action {0:?}, which has no response template")]
    MissingTemplate(String),
    #[error("message is empty")]
    EmptyMessage,
}

impl EngineError {
    /// Source line of a corpus format error, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            EngineError::Format { source, .. } => source.line(),
            EngineError::Graph {
                source: GraphError::Parse { line, .. },
                ..
            } => Some(*line),
            _ => None,
        }
    }
}

/// Parsed corpus files from a data directory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    pub nlu: NluDocument,
    pub stories: Vec<Story>,
    pub responses: BTreeMap<String, ResponseTemplate>,
}

fn read(path: PathBuf) -> Result<(String, PathBuf), EngineError> {
    match fs::read_to_string(&path) {
        Ok(s) => Ok((s, path)),
        Err(source) => Err(EngineError::Io { path, source }),
    }
}

impl TrainingData {
    pub fn load_dir(dir: &Path) -> Result<Self, EngineError> {
        let (text, path) = read(dir.join(NLU_FILE))?;
        let nlu = parse_nlu_markdown(&text).map_err(|source| EngineError::Format { path, source })?;
        let (text, path) = read(dir.join(STORIES_FILE))?;
        let stories = parse_stories_markdown(&text).map_err(|source| EngineError::Format { path, source })?;
        let (text, path) = read(dir.join(RESPONSES_FILE))?;
        let responses = parse_responses(&text).map_err(|source| EngineError::Format { path, source })?;
        Ok(Self {
            nlu,
            stories,
            responses,
        })
    }
}

pub fn load_config(path: &Path) -> Result<ProjectConfig, EngineError> {
    let (text, path) = read(path.to_path_buf())?;
    ProjectConfig::parse(&text).map_err(|source| EngineError::Format { path, source })
}

/// Sibling file of a triple file that holds predicate phrases.
pub const PREDICATES_FILE: &str = "predicates.tsv";

/// Loads a triple file, plus `predicates.tsv` from the same directory when
/// one exists.
pub fn load_knowledge_graph(path: &Path) -> Result<GraphStore, EngineError> {
    let (text, path) = read(path.to_path_buf())?;
    let mut store = load_triples(&text).map_err(|source| EngineError::Graph {
        path: path.clone(),
        source,
    })?;
    let predicates = path.with_file_name(PREDICATES_FILE);
    if predicates.is_file() {
        let (text, path) = read(predicates)?;
        store
            .load_predicates(&text)
            .map_err(|source| EngineError::Graph { path, source })?;
    }
    Ok(store)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub intents: Vec<String>,
    pub responses: BTreeMap<String, ResponseTemplate>,
    pub seed: u64,
}

/// Everything a model archive stores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifacts {
    pub nlu: NluModel,
    pub policies: PolicyEnsemble,
    pub domain: Domain,
}

impl ModelArtifacts {
    pub fn fingerprint(&self) -> String {
        fingerprint_members(&artifact_members(self))
    }
}

/// Runs the full training pipeline.
pub fn train(config: &ProjectConfig, data: &TrainingData, seed: u64) -> Result<ModelArtifacts, EngineError> {
    let policy_config = PolicyConfig::from_project(config, seed)?;
    let mut required: Vec<&str> = data
        .stories
        .iter()
        .flat_map(|s| s.steps.iter().flat_map(|st| st.actions.iter().map(String::as_str)))
        .collect();
    required.push(&policy_config.fallback_action);
    if let Some(missing) = required.into_iter().find(|a| !data.responses.contains_key(*a)) {
        return Err(EngineError::MissingTemplate(missing.to_string()));
    }
    let nlu = NluModel::train(&data.nlu, &NluConfig::from_project(config, seed))?;
    let policies = PolicyEnsemble::train(&data.stories, policy_config)?;
    Ok(ModelArtifacts {
        domain: Domain {
            intents: nlu.labels().to_vec(),
            responses: data.responses.clone(),
            seed,
        },
        nlu,
        policies,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BotReply {
    pub action: String,
    pub text: String,
    pub source: PolicySource,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triple: Option<Triple>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnOutcome {
    pub turn_index: usize,
    pub parse: ParseResult,
    pub replies: Vec<BotReply>,
}

impl TurnOutcome {
    pub fn actions(&self) -> Vec<&str> {
        self.replies.iter().map(|r| r.action.as_str()).collect()
    }
}

/// FNV-1a over the parts, for per-reply RNG seeds.
fn reply_seed(seed: u64, conversation: &str, turn: usize, position: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    feed(&seed.to_le_bytes());
    feed(conversation.as_bytes());
    feed(&[0]);
    feed(&(turn as u64).to_le_bytes());
    feed(&(position as u64).to_le_bytes());
    h
}

/// A loaded model plus the knowledge graph. Immutable and shareable.
#[derive(Debug)]
pub struct Engine {
    pub artifacts: ModelArtifacts,
    pub fingerprint: String,
    pub kg: Arc<GraphStore>,
}

impl Engine {
    pub fn new(artifacts: ModelArtifacts, fingerprint: String, kg: Option<Arc<GraphStore>>) -> Self {
        Self {
            artifacts,
            fingerprint,
            kg: kg.unwrap_or_default(),
        }
    }

    /// An engine for freshly trained artifacts, fingerprinted as the archive
    /// would be.
    pub fn from_artifacts(artifacts: ModelArtifacts, kg: Option<Arc<GraphStore>>) -> Self {
        let fingerprint = artifacts.fingerprint();
        Self::new(artifacts, fingerprint, kg)
    }

    pub fn parse(&self, text: &str) -> ParseResult {
        self.artifacts.nlu.parse(text)
    }

    pub fn handle_message(&self, tracker: &mut DialogTracker, text: &str) -> Result<TurnOutcome, EngineError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(EngineError::EmptyMessage);
        }
        let parse = self.parse(text);
        self.handle_parsed(tracker, text, parse)
    }

    /// Records the user turn, then lets the policies act until they
    /// listen. After the first decision only memoization and TED may
    /// continue the turn; any other stage ends it.
    pub fn handle_parsed(
        &self,
        tracker: &mut DialogTracker,
        text: &str,
        parse: ParseResult,
    ) -> Result<TurnOutcome, EngineError> {
        let intent = parse.intent().to_string();
        let turn_index = tracker.push_user(text, parse.clone())?;
        let entities = self.kg.link_entities(&tokenize(text));
        self.kg.record_turn(&tracker.conversation_id, text, &intent, &entities);

        let policies = &self.artifacts.policies;
        let mut replies = Vec::new();
        for position in 0..MAX_ACTIONS_PER_TURN {
            let decision = policies.decide(tracker, Some(&self.kg))?;
            let continues = matches!(decision.source, PolicySource::Memoization | PolicySource::Ted);
            if decision.action == ACTION_LISTEN || (position > 0 && !continues) {
                break;
            }
            let reply = self.render(&decision, &tracker.conversation_id, turn_index, position)?;
            tracker.push_action(&reply.action)?;
            tracker.push_bot(&reply.text)?;
            replies.push(reply);
            if !continues {
                break;
            }
        }
        tracker.push_action(ACTION_LISTEN)?;
        Ok(TurnOutcome {
            turn_index,
            parse,
            replies,
        })
    }

    fn render(
        &self,
        d: &PolicyDecision,
        conversation: &str,
        turn: usize,
        position: usize,
    ) -> Result<BotReply, EngineError> {
        let text = match &d.text {
            Some(t) => t.clone(),
            None => {
                let seed = reply_seed(self.artifacts.domain.seed, conversation, turn, position);
                select_response(
                    &d.action,
                    &self.artifacts.domain.responses,
                    &mut ChaCha8Rng::seed_from_u64(seed),
                )?
            }
        };
        Ok(BotReply {
            action: d.action.clone(),
            text,
            source: d.source,
            confidence: d.confidence,
            triple: d.triple.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training_data::{StoryStep, TrainingExample};

    pub(crate) fn toy_data() -> TrainingData {
        let mut nlu = NluDocument::default();
        for t in ["salam", "assalam o alaikum", "aoa", "salam bhai", "hello"] {
            nlu.examples.push(TrainingExample::new(t, "greet"));
        }
        for t in [
            "fee kitni hai",
            "fees kya hai",
            "semester fee batao",
            "fee structure",
            "kitni fees",
        ] {
            nlu.examples.push(TrainingExample::new(t, "ask_fee"));
        }
        for t in ["allah hafiz", "khuda hafiz", "bye", "phir milenge", "chalta hoon"] {
            nlu.examples.push(TrainingExample::new(t, "goodbye"));
        }
        let stories = vec![
            Story::new("greet", vec![StoryStep::new("greet", &["utter_greet"])]),
            Story::new(
                "fee",
                vec![
                    StoryStep::new("greet", &["utter_greet"]),
                    StoryStep::new("ask_fee", &["utter_fee"]),
                ],
            ),
            Story::new("bye", vec![StoryStep::new("goodbye", &["utter_goodbye"])]),
        ];
        let mut responses = BTreeMap::new();
        for (a, v) in [
            ("utter_greet", vec!["Salam!"]),
            ("utter_fee", vec!["Fee 9500 hai.", "Semester fee 9500 rupay hai."]),
            ("utter_goodbye", vec!["Allah hafiz!"]),
            ("utter_fallback", vec!["Maaf kijiye, samajh nahi aaya."]),
        ] {
            responses.insert(
                a.to_string(),
                ResponseTemplate {
                    action: a.into(),
                    variants: v.into_iter().map(String::from).collect(),
                },
            );
        }
        TrainingData {
            nlu,
            stories,
            responses,
        }
    }

    fn config() -> ProjectConfig {
        ProjectConfig::parse(
            "language: ur\npipeline:\n  - name: WhitespaceTokenizer\n  - name: CountVectorsFeaturizer\n  - name: LogisticRegressionClassifier\npolicies:\n  - name: MemoizationPolicy\n  - name: FallbackPolicy\n  - name: TEDPolicy\n",
        )
        .unwrap()
    }

    #[test]
    fn greeting_turn() {
        let engine = Engine::from_artifacts(train(&config(), &toy_data(), 42).unwrap(), None);
        let mut t = DialogTracker::new("u1");
        let out = engine.handle_message(&mut t, "salam").unwrap();
        assert_eq!(out.turn_index, 0);
        assert_eq!(out.actions(), ["utter_greet"]);
        assert_eq!(out.replies[0].text, "Salam!");
        assert_eq!(out.replies[0].source, PolicySource::Memoization);
        let again = engine.handle_message(&mut t, "fee kitni hai").unwrap();
        assert_eq!(again.turn_index, 1);
        assert_eq!(again.actions(), ["utter_fee"]);
    }

    #[test]
    fn training_is_deterministic() {
        let a = train(&config(), &toy_data(), 42).unwrap();
        let b = train(&config(), &toy_data(), 42).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = train(&config(), &toy_data(), 7).unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn missing_template_rejected() {
        let mut data = toy_data();
        data.responses.remove("utter_fee");
        assert!(matches!(
            train(&config(), &data, 42),
            Err(EngineError::MissingTemplate(a)) if a == "utter_fee"
        ));
    }

    #[test]
    fn empty_message_rejected() {
        let engine = Engine::from_artifacts(train(&config(), &toy_data(), 42).unwrap(), None);
        let mut t = DialogTracker::new("u1");
        assert!(matches!(
            engine.handle_message(&mut t, "  "),
            Err(EngineError::EmptyMessage)
        ));
        assert!(t.is_empty());
    }

    #[test]
    fn reply_seed_varies() {
        assert_ne!(reply_seed(42, "a", 0, 0), reply_seed(42, "b", 0, 0));
        assert_ne!(reply_seed(42, "a", 0, 0), reply_seed(42, "a", 1, 0));
        assert_eq!(reply_seed(42, "a", 3, 1), reply_seed(42, "a", 3, 1));
    }
}
