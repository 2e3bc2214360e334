//! Multi-label scores for an extractor backend over a labelled dataset.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CorpusError, LabeledExample, Sentinel};
use crate::extraction::ExtractorBackend;
use crate::model::IntentType;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub intent_type: IntentType,
    /// Gold positives.
    pub support: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// An example the backend did not get exactly right.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub id: String,
    pub text: String,
    pub expected_labels: BTreeSet<IntentType>,
    pub expected_sentinel: Option<Sentinel>,
    pub predicted_labels: BTreeSet<IntentType>,
    pub predicted_sentinel: Option<Sentinel>,
    /// Set when the backend returned an error instead of an outcome.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub backend: String,
    pub examples: usize,
    /// One row per intent type, in canonical order.
    pub per_class: Vec<ClassMetrics>,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    /// Mean F1 over classes with non-zero support.
    pub macro_f1: f64,
    pub exact_match: f64,
    pub hamming_loss: f64,
    /// Share of negative examples answered with the right sentinel;
    /// `None` when the dataset has no negatives.
    pub sentinel_accuracy: Option<f64>,
    pub backend_errors: usize,
    pub failures: Vec<Failure>,
}

/// A prediction reduced to what the metrics look at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub labels: BTreeSet<IntentType>,
    pub sentinel: Option<Sentinel>,
    pub error: Option<String>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    ratio(2 * tp, 2 * tp + fp + fn_)
}

/// Scores precomputed predictions, paired with `dataset` by position.
pub fn score(backend: &str, dataset: &[LabeledExample], predictions: &[Prediction]) -> Result<EvalReport, CorpusError> {
    assert_eq!(dataset.len(), predictions.len(), "one prediction per example");
    if dataset.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    let n = dataset.len();
    let mut counts = [(0usize, 0usize, 0usize); 6];
    let mut exact = 0usize;
    let mut label_errors = 0usize;
    let (mut negatives, mut sentinel_hits) = (0usize, 0usize);
    let mut failures = Vec::new();
    for (ex, p) in dataset.iter().zip(predictions) {
        for t in IntentType::ALL {
            let (gold, pred) = (ex.labels.contains(&t), p.labels.contains(&t));
            let c = &mut counts[t.index()];
            match (gold, pred) {
                (true, true) => c.0 += 1,
                (false, true) => c.1 += 1,
                (true, false) => c.2 += 1,
                (false, false) => {}
            }
        }
        label_errors += ex.labels.symmetric_difference(&p.labels).count();
        if let Some(s) = ex.marker {
            negatives += 1;
            if p.sentinel == Some(s) {
                sentinel_hits += 1;
            }
        }
        if ex.labels == p.labels && ex.marker == p.sentinel && p.error.is_none() {
            exact += 1;
        } else {
            failures.push(Failure {
                id: ex.id.clone(),
                text: ex.text.clone(),
                expected_labels: ex.labels.clone(),
                expected_sentinel: ex.marker,
                predicted_labels: p.labels.clone(),
                predicted_sentinel: p.sentinel,
                error: p.error.clone(),
            });
        }
    }
    let per_class: Vec<ClassMetrics> = IntentType::ALL
        .iter()
        .map(|&t| {
            let (tp, fp, fn_) = counts[t.index()];
            ClassMetrics {
                intent_type: t,
                support: tp + fn_,
                true_positives: tp,
                false_positives: fp,
                false_negatives: fn_,
                precision: ratio(tp, tp + fp),
                recall: ratio(tp, tp + fn_),
                f1: f1(tp, fp, fn_),
            }
        })
        .collect();
    let (tp, fp, fn_) = counts.iter().fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    let supported: Vec<f64> = per_class.iter().filter(|c| c.support > 0).map(|c| c.f1).collect();
    Ok(EvalReport {
        backend: backend.to_string(),
        examples: n,
        micro_precision: ratio(tp, tp + fp),
        micro_recall: ratio(tp, tp + fn_),
        micro_f1: f1(tp, fp, fn_),
        macro_f1: if supported.is_empty() { 0.0 } else { supported.iter().sum::<f64>() / supported.len() as f64 },
        exact_match: ratio(exact, n),
        hamming_loss: label_errors as f64 / (n * IntentType::ALL.len()) as f64,
        sentinel_accuracy: (negatives > 0).then(|| ratio(sentinel_hits, negatives)),
        backend_errors: predictions.iter().filter(|p| p.error.is_some()).count(),
        per_class,
        failures,
    })
}

/// Classifies every example in parallel and scores the results. A backend
/// error counts as an empty prediction.
pub fn evaluate<B: ExtractorBackend + ?Sized>(backend: &B, dataset: &[LabeledExample]) -> Result<EvalReport, CorpusError> {
    if dataset.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    let predictions: Vec<Prediction> = dataset
        .par_iter()
        .map(|ex| match backend.classify(&ex.text) {
            Ok(outcome) => Prediction {
                labels: outcome.types().into_iter().collect(),
                sentinel: Sentinel::of(&outcome),
                error: None,
            },
            Err(e) => Prediction { labels: BTreeSet::new(), sentinel: None, error: Some(e.to_string()) },
        })
        .collect();
    score(backend.name(), dataset, &predictions)
}

impl EvalReport {
    pub fn render_text(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = writeln!(s, "backend {} on {} examples", self.backend, self.examples);
        let _ = writeln!(s, "{:<30} {:>7} {:>9} {:>7} {:>7}", "class", "support", "precision", "recall", "f1");
        for c in &self.per_class {
            let _ = writeln!(
                s,
                "{:<30} {:>7} {:>9.4} {:>7.4} {:>7.4}",
                c.intent_type.canonical_name(),
                c.support,
                c.precision,
                c.recall,
                c.f1
            );
        }
        let _ = writeln!(s, "micro P/R/F1  {:.4} / {:.4} / {:.4}", self.micro_precision, self.micro_recall, self.micro_f1);
        let _ = writeln!(s, "macro F1      {:.4}", self.macro_f1);
        let _ = writeln!(s, "exact match   {:.4}", self.exact_match);
        let _ = writeln!(s, "hamming loss  {:.4}", self.hamming_loss);
        match self.sentinel_accuracy {
            Some(a) => {
                let _ = writeln!(s, "sentinel acc  {a:.4}");
            }
            None => s.push_str("sentinel acc  n/a\n"),
        }
        let _ = writeln!(s, "failures      {} ({} backend errors)", self.failures.len(), self.backend_errors);
        s
    }
}
