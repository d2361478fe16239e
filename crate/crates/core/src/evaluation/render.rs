use serde_json::{json, Value};

use super::{Averages, EvaluationReport};

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

fn averages(a: &Averages) -> Value {
    json!({
        "precision": round4(a.precision),
        "recall": round4(a.recall),
        "f1": round4(a.f1),
    })
}

/// Structured form; every real number is rounded to 4 decimal places.
pub fn render_json(report: &EvaluationReport) -> String {
    let classes: Vec<Value> = report
        .classes
        .iter()
        .map(|c| {
            json!({
                "label": c.label,
                "precision": round4(c.precision),
                "recall": round4(c.recall),
                "f1": round4(c.f1),
                "support": c.support,
            })
        })
        .collect();
    let value = json!({
        "examples": report.examples,
        "accuracy": round4(report.accuracy),
        "macro_avg": averages(&report.macro_avg),
        "weighted_avg": averages(&report.weighted_avg),
        "macro_f1": round4(report.macro_avg.f1),
        "mean_confidence": round4(report.mean_confidence),
        "classes": classes,
        "confusion_matrix": {
            "labels": report.matrix.labels,
            "counts": report.matrix.counts,
        },
        "confidence_histogram": report.histogram,
    });
    let mut out = serde_json::to_string_pretty(&value).expect("report serializes");
    out.push('\n');
    out
}

/// Plain-text confusion matrix with right-aligned columns, then the
/// per-class table.
pub fn render_text(report: &EvaluationReport) -> String {
    let m = &report.matrix;
    let label_w = m
        .labels
        .iter()
        .map(|l| l.len())
        .max()
        .unwrap_or(0)
        .max("gold\\pred".len());
    let col_w: Vec<usize> = m
        .labels
        .iter()
        .enumerate()
        .map(|(j, l)| {
            let widest = m.counts.iter().map(|r| r[j].to_string().len()).max().unwrap_or(1);
            l.len().max(widest)
        })
        .collect();

    let mut out = String::new();
    out.push_str(&format!("{:<label_w$}", "gold\\pred"));
    for (l, w) in m.labels.iter().zip(&col_w) {
        out.push_str(&format!("  {l:>w$}"));
    }
    out.push('\n');
    for (i, l) in m.labels.iter().enumerate() {
        out.push_str(&format!("{l:<label_w$}"));
        for (j, w) in col_w.iter().enumerate() {
            out.push_str(&format!("  {:>w$}", m.counts[i][j]));
        }
        out.push('\n');
    }

    out.push('\n');
    out.push_str(&format!(
        "{:<label_w$}  {:>9}  {:>9}  {:>9}  {:>7}\n",
        "intent", "precision", "recall", "f1", "support"
    ));
    for c in &report.classes {
        out.push_str(&format!(
            "{:<label_w$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>7}\n",
            c.label, c.precision, c.recall, c.f1, c.support
        ));
    }
    for (name, a) in [("macro avg", &report.macro_avg), ("weighted avg", &report.weighted_avg)] {
        out.push_str(&format!(
            "{:<label_w$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>7}\n",
            name, a.precision, a.recall, a.f1, report.examples
        ));
    }
    out.push_str(&format!(
        "\naccuracy {:.4}\nmean confidence {:.4}\n",
        report.accuracy, report.mean_confidence
    ));
    out
}

/// `(json, text)`.
pub fn render_report(report: &EvaluationReport) -> (String, String) {
    (render_json(report), render_text(report))
}
