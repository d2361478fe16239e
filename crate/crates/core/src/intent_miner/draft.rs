use super::analysis::top_terms;
use super::lda::TopicModel;
use super::preprocess::Corpus;
use super::MinerError;
use crate::training_data::{is_label, write_nlu_markdown, SynonymTable, TrainingExample};

fn label_part(term: &str) -> String {
    let s: String = term
        .to_lowercase()
        .chars()
        .map(|c| {
            if c.is_ascii_lowercase() || c.is_ascii_digit() {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.trim_matches('_').is_empty() {
        "topic".to_string()
    } else {
        s
    }
}

/// Index of the most probable topic for each document (ties to the lowest id).
pub fn dominant_topics(model: &TopicModel) -> Vec<usize> {
    model
        .doc_topic_counts
        .iter()
        .map(|row| {
            let mut best = 0;
            for (t, &c) in row.iter().enumerate() {
                if c > row[best] {
                    best = t;
                }
            }
            best
        })
        .collect()
}

/// Draft `nlu.md` with one intent per non-empty topic, named
/// `<prefix>_<topic>_<top term>`, holding the documents whose dominant topic
/// it is. Meant for human review before training.
pub fn export_intent_draft(model: &TopicModel, corpus: &Corpus, label_prefix: &str) -> Result<String, MinerError> {
    if !is_label(label_prefix) {
        return Err(MinerError::InvalidParameter(format!(
            "label prefix {label_prefix:?} must match [a-z0-9_]+"
        )));
    }
    if corpus.docs.len() != model.doc_topic_counts.len() {
        return Err(MinerError::InvalidParameter(
            "model was not fitted on this corpus".into(),
        ));
    }
    let names: Vec<String> = (0..model.k)
        .map(|t| {
            let term = top_terms(model, t, 1)?.into_iter().next().unwrap_or_default();
            Ok(format!("{label_prefix}_{t}_{}", label_part(&term)))
        })
        .collect::<Result<_, MinerError>>()?;
    let examples: Vec<TrainingExample> = dominant_topics(model)
        .into_iter()
        .zip(&corpus.docs)
        .map(|(t, doc)| TrainingExample::new(doc.text.clone(), names[t].clone()))
        .collect();
    Ok(write_nlu_markdown(&examples, &SynonymTable::new(), &[]))
}
