//! A Roman Urdu conversational engine: corpus formats, intent
//! classification, topic-model intent mining, a triple-store knowledge
//! graph, a cascaded dialogue policy and evaluation tooling.

pub mod dialog;
pub mod engine;
pub mod evaluation;
pub mod intent_miner;
pub mod knowledge_graph;
pub mod nlu;
pub mod training_data;

pub use engine::{Engine, EngineError, ModelArtifacts, TrainingData};
