//! Intent metrics, confidence histograms and conversation tests.

mod conversation;
mod render;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use conversation::{run_conversation_tests, ConversationTestResult, Divergence};
pub use render::{render_json, render_report, render_text};

use crate::nlu::NluModel;
use crate::training_data::TrainingExample;

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("gold label {0:?} is not known to the model")]
    UnknownLabel(String),
    #[error("confidence {0} is outside [0, 1]")]
    ConfidenceOutOfRange(f64),
    #[error("histogram needs at least one bin")]
    NoBins,
}

/// Rows are gold labels, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_counts(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Self {
        assert_eq!(counts.len(), labels.len(), "row count must match labels");
        assert!(counts.iter().all(|r| r.len() == labels.len()), "matrix must be square");
        Self { labels, counts }
    }

    fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn record(&mut self, gold: &str, predicted: &str) -> Result<(), EvalError> {
        let g = self
            .index(gold)
            .ok_or_else(|| EvalError::UnknownLabel(gold.to_string()))?;
        let p = self
            .index(predicted)
            .ok_or_else(|| EvalError::UnknownLabel(predicted.to_string()))?;
        self.counts[g][p] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn column_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.trace(), self.total())
    }

    pub fn class_metrics(&self) -> Vec<ClassMetrics> {
        (0..self.labels.len())
            .map(|i| {
                let tp = self.counts[i][i];
                let precision = ratio(tp, self.column_sum(i));
                let recall = ratio(tp, self.row_sum(i));
                ClassMetrics {
                    label: self.labels[i].clone(),
                    precision,
                    recall,
                    f1: f1(precision, recall),
                    support: self.row_sum(i),
                }
            })
            .collect()
    }

    /// Pooled precision; equals pooled recall and accuracy for single-label data.
    pub fn micro_precision(&self) -> f64 {
        let predicted: u64 = (0..self.labels.len()).map(|j| self.column_sum(j)).sum();
        ratio(self.trace(), predicted)
    }

    pub fn micro_recall(&self) -> f64 {
        let gold: u64 = (0..self.labels.len()).map(|i| self.row_sum(i)).sum();
        ratio(self.trace(), gold)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Unweighted mean over classes with non-zero support.
pub fn macro_average(metrics: &[ClassMetrics]) -> Averages {
    let present: Vec<&ClassMetrics> = metrics.iter().filter(|m| m.support > 0).collect();
    if present.is_empty() {
        return Averages {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        };
    }
    let n = present.len() as f64;
    Averages {
        precision: present.iter().map(|m| m.precision).sum::<f64>() / n,
        recall: present.iter().map(|m| m.recall).sum::<f64>() / n,
        f1: present.iter().map(|m| m.f1).sum::<f64>() / n,
    }
}

pub fn weighted_average(metrics: &[ClassMetrics]) -> Averages {
    let total: u64 = metrics.iter().map(|m| m.support).sum();
    if total == 0 {
        return Averages {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        };
    }
    let w = |f: fn(&ClassMetrics) -> f64| metrics.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64;
    Averages {
        precision: w(|m| m.precision),
        recall: w(|m| m.recall),
        f1: w(|m| m.f1),
    }
}

/// Equal-width bins over `[0, 1]`; 1.0 falls in the last bin.
pub fn histogram(confidences: &[f64], bins: usize) -> Result<Vec<u64>, EvalError> {
    if bins == 0 {
        return Err(EvalError::NoBins);
    }
    let mut counts = vec![0; bins];
    for &c in confidences {
        if !(0.0..=1.0).contains(&c) {
            return Err(EvalError::ConfidenceOutOfRange(c));
        }
        let i = ((c * bins as f64).floor() as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub matrix: ConfusionMatrix,
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub histogram: Vec<u64>,
    pub mean_confidence: f64,
    pub examples: u64,
}

impl EvaluationReport {
    /// Builds a report from `(gold, predicted, top-1 confidence)` outcomes.
    pub fn from_outcomes(labels: Vec<String>, outcomes: &[(String, String, f64)]) -> Result<Self, EvalError> {
        let mut matrix = ConfusionMatrix::new(labels);
        let mut confidences = Vec::with_capacity(outcomes.len());
        for (gold, predicted, confidence) in outcomes {
            matrix.record(gold, predicted)?;
            confidences.push(*confidence);
        }
        let classes = matrix.class_metrics();
        let mean_confidence = if confidences.is_empty() {
            0.0
        } else {
            confidences.iter().sum::<f64>() / confidences.len() as f64
        };
        Ok(Self {
            accuracy: matrix.accuracy(),
            macro_avg: macro_average(&classes),
            weighted_avg: weighted_average(&classes),
            histogram: histogram(&confidences, HISTOGRAM_BINS)?,
            mean_confidence,
            examples: matrix.total(),
            matrix,
            classes,
        })
    }
}

/// Parses every example once and scores the top-1 intent.
pub fn evaluate_intents(model: &NluModel, examples: &[TrainingExample]) -> Result<EvaluationReport, EvalError> {
    let labels = model.labels().to_vec();
    if let Some(unknown) = examples.iter().find(|e| !labels.contains(&e.intent)) {
        return Err(EvalError::UnknownLabel(unknown.intent.clone()));
    }
    let outcomes: Vec<(String, String, f64)> = examples
        .iter()
        .map(|e| {
            let parse = model.parse(&e.text);
            (e.intent.clone(), parse.intent().to_string(), parse.confidence())
        })
        .collect();
    EvaluationReport::from_outcomes(labels, &outcomes)
}
