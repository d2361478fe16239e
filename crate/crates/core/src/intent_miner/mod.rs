//! Draft intent generation from unlabeled questions with LDA.

mod analysis;
mod draft;
mod lda;
mod preprocess;

use thiserror::Error;

pub use analysis::{
    js_divergence, mean_pairwise_distance, summarize, sweep_k, token_share, top_terms, topic_distance_matrix,
    AlphaRule, KSweepEntry, KSweepReport, SweepSettings, TopicSummary,
};
pub use draft::{dominant_topics, export_intent_draft};
pub use lda::{fit_lda, GibbsSampler, LdaParams, RebuiltCounts, TopicModel};
pub use preprocess::{default_stopwords, parse_stopwords, preprocess_corpus, Corpus, PreprocessOptions, TokenizedDoc};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MinerError {
    #[error("empty corpus after preprocessing")]
    EmptyCorpus,
    #[error("topic count must be at least 2, got {0}")]
    InvalidTopicCount(usize),
    #[error("K = {k} exceeds the corpus token count {tokens}")]
    TooManyTopics { k: usize, tokens: usize },
    #[error("topic {topic} out of range for K = {k}")]
    TopicOutOfRange { topic: usize, k: usize },
    #[error("{0}")]
    InvalidParameter(String),
}
