//! Utterance understanding: tokenization, sparse featurization, intent
//! classification and entity extraction with synonym normalization.

mod entities;
mod featurizer;
pub mod softmax;
mod tokenizer;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use entities::{apply_synonyms, extract_entities, Gazetteer};
pub use featurizer::{
    featurize, lexical_features, Featurizer, LexicalConfig, PatternSet, SparseVector, Vocabulary, LEXICAL_FEATURES,
};
pub use softmax::{train_softmax, SoftmaxError, SoftmaxRegression, TrainParams};
pub use tokenizer::{tokenize, Token};

use crate::training_data::{EntitySpan, NluDocument, ProjectConfig, SynonymTable, TrainingExample};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NluError {
    #[error("no training data")]
    NoTrainingData,
    #[error("n-gram range {n_min}..={n_max} must satisfy 1 <= n_min <= n_max <= 8")]
    InvalidNgramRange { n_min: usize, n_max: usize },
    #[error("at least two intents are required, found {0}")]
    TooFewIntents(usize),
    #[error("invalid regex pattern {name:?}: {message}")]
    InvalidPattern { name: String, message: String },
    #[error("training diverged: loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
}

impl From<SoftmaxError> for NluError {
    fn from(e: SoftmaxError) -> Self {
        match e {
            SoftmaxError::NonFiniteLoss { epoch } => NluError::NonFiniteLoss { epoch },
            SoftmaxError::Empty => NluError::NoTrainingData,
            SoftmaxError::LabelOutOfRange { .. } => unreachable!("labels are indexed internally"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentConfidence {
    pub name: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseResult {
    pub text: String,
    /// Descending by confidence; ties broken by label.
    pub ranking: Vec<IntentConfidence>,
    pub entities: Vec<EntitySpan>,
}

impl ParseResult {
    /// A result asserting `intent` with full confidence, used when a test
    /// story names the intent instead of giving an utterance.
    pub fn from_intent(intent: &str, text: &str) -> Self {
        Self {
            text: text.to_string(),
            ranking: vec![IntentConfidence {
                name: intent.to_string(),
                confidence: 1.0,
            }],
            entities: Vec::new(),
        }
    }

    pub fn top(&self) -> Option<&IntentConfidence> {
        self.ranking.first()
    }

    pub fn intent(&self) -> &str {
        self.top().map(|t| t.name.as_str()).unwrap_or("")
    }

    pub fn confidence(&self) -> f64 {
        self.top().map(|t| t.confidence).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
    pub final_loss: f64,
}

/// Classifier hyperparameters and featurizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NluConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub lexical: LexicalConfig,
    pub train: TrainParams,
}

impl Default for NluConfig {
    fn default() -> Self {
        Self {
            n_min: 1,
            n_max: 4,
            lexical: LexicalConfig::default(),
            train: TrainParams::default(),
        }
    }
}

impl NluConfig {
    /// Reads `CountVectorsFeaturizer`, `LexicalSyntacticFeaturizer` and the
    /// classifier entry of `config.yml`; missing values keep their defaults.
    pub fn from_project(config: &ProjectConfig, seed: u64) -> Self {
        let mut out = Self::default();
        if let Some(cv) = config.component("CountVectorsFeaturizer") {
            out.n_min = cv.usize_param("min_ngram").unwrap_or(out.n_min);
            out.n_max = cv.usize_param("max_ngram").unwrap_or(out.n_max);
        }
        out.lexical.enabled = config.component("LexicalSyntacticFeaturizer").is_some();
        let c = config.classifier();
        out.train.learning_rate = c.f64_param("learning_rate").unwrap_or(out.train.learning_rate);
        out.train.epochs = c.usize_param("epochs").unwrap_or(out.train.epochs);
        out.train.l2 = c.f64_param("l2").unwrap_or(out.train.l2);
        out.train.seed = seed;
        out
    }
}

/// Ranked-intent classifier: softmax regression over the featurizer output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentModel {
    pub labels: Vec<String>,
    pub featurizer: Featurizer,
    pub classifier: SoftmaxRegression,
    pub metadata: TrainingMetadata,
}

/// Trains on already featurized examples. Labels are sorted so the
/// label order is fixed by the corpus, not by example order.
pub fn train_classifier(
    featurized: &[(SparseVector, String)],
    dimension: usize,
    params: &TrainParams,
) -> Result<(Vec<String>, SoftmaxRegression, f64), NluError> {
    if featurized.is_empty() {
        return Err(NluError::NoTrainingData);
    }
    let mut labels: Vec<String> = featurized.iter().map(|(_, l)| l.clone()).collect();
    labels.sort();
    labels.dedup();
    if labels.len() < 2 {
        return Err(NluError::TooFewIntents(labels.len()));
    }
    let index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let data: Vec<(SparseVector, usize)> = featurized.iter().map(|(x, l)| (x.clone(), index[l.as_str()])).collect();
    let (model, loss) = train_softmax(&data, labels.len(), dimension, params)?;
    Ok((labels, model, loss))
}

impl IntentModel {
    pub fn train(examples: &[TrainingExample], patterns: PatternSet, config: &NluConfig) -> Result<Self, NluError> {
        let vocabulary = Vocabulary::build(examples, config.n_min, config.n_max)?;
        let featurizer = Featurizer::new(vocabulary, patterns, config.lexical);
        let featurized: Vec<(SparseVector, String)> = examples
            .iter()
            .map(|e| (featurizer.featurize(&e.text), e.intent.clone()))
            .collect();
        let (labels, classifier, final_loss) = train_classifier(&featurized, featurizer.dimension(), &config.train)?;
        Ok(Self {
            labels,
            featurizer,
            classifier,
            metadata: TrainingMetadata {
                learning_rate: config.train.learning_rate,
                epochs: config.train.epochs,
                l2: config.train.l2,
                seed: config.train.seed,
                final_loss,
            },
        })
    }

    /// Intents by descending confidence. An utterance sharing no n-gram
    /// or pattern with the training data carries no evidence and gets a
    /// uniform distribution.
    pub fn rank(&self, utterance: &str) -> Vec<IntentConfidence> {
        let x = self.featurizer.featurize(utterance);
        let evidence = self.featurizer.vocabulary.dimension() + self.featurizer.patterns.len();
        let probs = if x.entries().iter().any(|&(i, _)| i < evidence) {
            self.classifier.probabilities(&x)
        } else {
            vec![1.0 / self.labels.len() as f64; self.labels.len()]
        };
        let mut ranking: Vec<IntentConfidence> = self
            .labels
            .iter()
            .zip(probs)
            .map(|(name, confidence)| IntentConfidence {
                name: name.clone(),
                confidence,
            })
            .collect();
        ranking.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then_with(|| a.name.cmp(&b.name)));
        ranking
    }
}

/// Ranks intents, then extracts and normalizes entities.
pub fn parse(
    model: &IntentModel,
    utterance: &str,
    patterns: &PatternSet,
    gazetteer: &Gazetteer,
    synonyms: &SynonymTable,
) -> ParseResult {
    let spans = extract_entities(utterance, patterns, gazetteer);
    ParseResult {
        text: utterance.to_string(),
        ranking: model.rank(utterance),
        entities: apply_synonyms(&spans, synonyms),
    }
}

/// The trained NLU half of the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NluModel {
    pub intent: IntentModel,
    pub gazetteer: Gazetteer,
    pub synonyms: SynonymTable,
}

impl NluModel {
    pub fn train(doc: &NluDocument, config: &NluConfig) -> Result<Self, NluError> {
        let patterns = PatternSet::compile(&doc.patterns)?;
        let intent = IntentModel::train(&doc.examples, patterns, config)?;
        Ok(Self {
            intent,
            gazetteer: Gazetteer::from_training(&doc.examples, &doc.synonyms),
            synonyms: doc.synonyms.clone(),
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.intent.labels
    }

    pub fn parse(&self, utterance: &str) -> ParseResult {
        parse(
            &self.intent,
            utterance,
            &self.intent.featurizer.patterns,
            &self.gazetteer,
            &self.synonyms,
        )
    }
}
