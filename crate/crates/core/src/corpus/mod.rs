//! Labelled request corpora: hand-written seeds, label-preserving
//! augmentation and multi-label evaluation of extractor backends.

pub mod augment;
pub mod eval;
pub mod seeds;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::model::{ExtractionOutcome, IntentType};

pub use augment::{generate_corpus, AugmentationConfig, Augmenter, Technique};
pub use eval::{evaluate, score, ClassMetrics, EvalReport, Failure, Prediction};
pub use seeds::seed_examples;

pub const CORPUS_FORMAT: &str = "intent-gate-corpus";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid augmentation config: {0}")]
    Config(String),
    #[error("example {id}: {reason}")]
    InvalidExample { id: String, reason: String },
    #[error("corpus line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("cannot evaluate an empty dataset")]
    EmptyDataset,
}

/// Gold answer for requests that carry no supported intent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sentinel {
    #[serde(rename = "none")]
    NoIntentPresent,
    #[serde(rename = "unknown")]
    UnknownIntent,
}

impl Sentinel {
    pub fn of(outcome: &ExtractionOutcome) -> Option<Sentinel> {
        match outcome {
            ExtractionOutcome::Intents { .. } => None,
            ExtractionOutcome::NoIntentPresent => Some(Sentinel::NoIntentPresent),
            ExtractionOutcome::UnknownIntent => Some(Sentinel::UnknownIntent),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Seed,
    Paraphrase,
    Erasure,
    ToneShift,
}

/// One request with its gold labels. Exactly one of `labels` and
/// `marker` is populated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub text: String,
    pub labels: BTreeSet<IntentType>,
    pub marker: Option<Sentinel>,
    pub provenance: Provenance,
    /// Seed this example was derived from.
    pub parent: Option<String>,
}

impl LabeledExample {
    pub fn seed(id: &str, text: &str, labels: &[IntentType]) -> Self {
        LabeledExample {
            id: id.to_string(),
            text: text.to_string(),
            labels: labels.iter().copied().collect(),
            marker: None,
            provenance: Provenance::Seed,
            parent: None,
        }
    }

    pub fn negative(id: &str, text: &str, sentinel: Sentinel) -> Self {
        LabeledExample {
            id: id.to_string(),
            text: text.to_string(),
            labels: BTreeSet::new(),
            marker: Some(sentinel),
            provenance: Provenance::Seed,
            parent: None,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |reason: &str| CorpusError::InvalidExample { id: self.id.clone(), reason: reason.into() };
        if self.text.trim().is_empty() {
            return Err(bad("empty text"));
        }
        match (self.labels.is_empty(), self.marker) {
            (true, None) => Err(bad("no labels and no marker")),
            (false, Some(_)) => Err(bad("labels and a marker together")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusHeader {
    pub format: String,
    /// Identifies seeds, augmentation config and lexicon together.
    pub corpus_version: String,
    pub seed: u64,
    pub rounds: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub header: CorpusHeader,
    pub examples: Vec<LabeledExample>,
}

impl Corpus {
    /// JSONL: the header, then one canonical example per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = canonical::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for ex in &self.examples {
            out.push_str(&canonical::to_string(ex).expect("examples serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Corpus, CorpusError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(CorpusError::Parse { line: 1, reason: "missing header".into() })?;
        let header: CorpusHeader =
            serde_json::from_str(first).map_err(|e| CorpusError::Parse { line: 1, reason: e.to_string() })?;
        if header.format != CORPUS_FORMAT {
            return Err(CorpusError::Parse { line: 1, reason: format!("unexpected format `{}`", header.format) });
        }
        let mut examples = Vec::new();
        for (i, line) in lines {
            let ex: LabeledExample =
                serde_json::from_str(line).map_err(|e| CorpusError::Parse { line: i + 1, reason: e.to_string() })?;
            ex.validate()?;
            examples.push(ex);
        }
        Ok(Corpus { header, examples })
    }
}

/// Reads a bare JSONL dataset of examples, with or without a corpus header.
pub fn read_examples(text: &str) -> Result<Vec<LabeledExample>, CorpusError> {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.contains(CORPUS_FORMAT) {
        return Corpus::from_jsonl(text).map(|c| c.examples);
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let ex: LabeledExample =
                serde_json::from_str(l).map_err(|e| CorpusError::Parse { line: i + 1, reason: e.to_string() })?;
            ex.validate()?;
            Ok(ex)
        })
        .collect()
}
