use serde::{Deserialize, Serialize};

use crate::dialog::DialogTracker;
use crate::engine::{Engine, EngineError};
use crate::nlu::ParseResult;
use crate::training_data::Story;

/// First point where the engine's actions differ from the expected ones.
/// `None` on either side means that sequence had already ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    pub step: usize,
    pub position: usize,
    pub expected: Option<String>,
    pub actual: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationTestResult {
    pub name: String,
    pub passed: bool,
    pub divergence: Option<Divergence>,
}

/// Replays each test in a fresh conversation. Steps with an utterance go
/// through NLU; bare intents are injected with full confidence.
pub fn run_conversation_tests(tests: &[Story], engine: &Engine) -> Result<Vec<ConversationTestResult>, EngineError> {
    let mut results = Vec::with_capacity(tests.len());
    for (i, test) in tests.iter().enumerate() {
        let mut tracker = DialogTracker::new(format!("test-{i}-{}", test.name));
        let mut divergence = None;
        for (step_ix, step) in test.steps.iter().enumerate() {
            let outcome = match &step.utterance {
                Some(u) => engine.handle_message(&mut tracker, u)?,
                None => engine.handle_parsed(&mut tracker, "", ParseResult::from_intent(&step.intent, ""))?,
            };
            let actual = outcome.actions();
            let n = step.actions.len().max(actual.len());
            divergence = (0..n).find_map(|p| {
                let e = step.actions.get(p).map(String::as_str);
                let a = actual.get(p).copied();
                (e != a).then(|| Divergence {
                    step: step_ix,
                    position: p,
                    expected: e.map(String::from),
                    actual: a.map(String::from),
                })
            });
            if divergence.is_some() {
                break;
            }
        }
        results.push(ConversationTestResult {
            name: test.name.clone(),
            passed: divergence.is_none(),
            divergence,
        });
    }
    Ok(results)
}
