//! Versioned pattern tables for the rule-based extractor.
//!
//! A pattern is one or more alternatives separated by `|`. Each alternative
//! is a sequence of words matched case-insensitively against whole tokens;
//! a trailing `*` turns a word into a prefix match. Phrases never match
//! across clause boundaries.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExtractionError;
use crate::model::IntentType;

const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.json");

/// Weights a lexicon entry may carry.
pub const ALLOWED_WEIGHTS: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub intent_type: IntentType,
    pub pattern: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueEntry {
    pub pattern: String,
    pub weight: f64,
}

/// Cue tables that decide between report and notification requests.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportNotificationCues {
    /// "status", "report", "update on": ambiguous on their own.
    pub status: Vec<CueEntry>,
    /// "every", "periodically": something should happen repeatedly.
    pub recurrence: Vec<CueEntry>,
    /// "summarize", "previous request": looks back at something already done.
    pub retrospective: Vec<CueEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconFile {
    pub version: String,
    pub threshold: f64,
    pub entries: Vec<LexiconEntry>,
    #[serde(default)]
    pub report_notification: ReportNotificationCues,
    /// Imperative verbs that signal a concrete request outside the 5G core.
    #[serde(default)]
    pub unknown_actions: Vec<String>,
    /// Leading words skipped before looking for an imperative verb.
    #[serde(default)]
    pub politeness_prefixes: Vec<String>,
    /// Phrases ("feasible to") after which an action verb names what is
    /// being checked rather than something to do.
    #[serde(default)]
    pub hypothetical_frames: Vec<String>,
}

/// A compiled lexicon, ready for matching.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub version: String,
    pub threshold: f64,
    pub entries: Vec<(LexiconEntry, Pattern)>,
    pub status: Vec<(CueEntry, Pattern)>,
    pub recurrence: Vec<(CueEntry, Pattern)>,
    pub retrospective: Vec<(CueEntry, Pattern)>,
    pub unknown_actions: Vec<Pattern>,
    pub politeness_prefixes: Vec<Pattern>,
    pub hypothetical_frames: Vec<Pattern>,
}

impl Lexicon {
    /// The lexicon bundled with the crate.
    pub fn bundled() -> Lexicon {
        Lexicon::from_json(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn load(path: &Path) -> Result<Lexicon, ExtractionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExtractionError::Lexicon(format!("{}: {e}", path.display())))?;
        Lexicon::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Lexicon, ExtractionError> {
        let file: LexiconFile =
            serde_json::from_str(text).map_err(|e| ExtractionError::Lexicon(e.to_string()))?;
        Lexicon::compile(file)
    }

    pub fn compile(file: LexiconFile) -> Result<Lexicon, ExtractionError> {
        if !(file.threshold.is_finite() && file.threshold > 0.0) {
            return Err(ExtractionError::Lexicon(format!(
                "threshold must be positive, got {}",
                file.threshold
            )));
        }
        let check = |pattern: &str, weight: f64| -> Result<Pattern, ExtractionError> {
            if !ALLOWED_WEIGHTS.contains(&weight) {
                return Err(ExtractionError::Lexicon(format!(
                    "pattern `{pattern}` has weight {weight}; allowed weights are 0.5, 1.0 and 2.0"
                )));
            }
            Pattern::parse(pattern)
        };
        let entries = file
            .entries
            .into_iter()
            .map(|e| check(&e.pattern, e.weight).map(|p| (e, p)))
            .collect::<Result<_, _>>()?;
        let cues = |list: Vec<CueEntry>| -> Result<Vec<(CueEntry, Pattern)>, ExtractionError> {
            list.into_iter()
                .map(|c| check(&c.pattern, c.weight).map(|p| (c, p)))
                .collect()
        };
        let rn = file.report_notification;
        Ok(Lexicon {
            version: file.version,
            threshold: file.threshold,
            entries,
            status: cues(rn.status)?,
            recurrence: cues(rn.recurrence)?,
            retrospective: cues(rn.retrospective)?,
            unknown_actions: file
                .unknown_actions
                .iter()
                .map(|p| Pattern::parse(p))
                .collect::<Result<_, _>>()?,
            politeness_prefixes: file
                .politeness_prefixes
                .iter()
                .map(|p| Pattern::parse(p))
                .collect::<Result<_, _>>()?,
            hypothetical_frames: file
                .hypothetical_frames
                .iter()
                .map(|p| Pattern::parse(p))
                .collect::<Result<_, _>>()?,
        })
    }

    /// Every pattern in the lexicon, used to find protected cue tokens.
    pub fn all_patterns(&self) -> impl Iterator<Item = &Pattern> {
        self.entries
            .iter()
            .map(|(_, p)| p)
            .chain(self.status.iter().map(|(_, p)| p))
            .chain(self.recurrence.iter().map(|(_, p)| p))
            .chain(self.retrospective.iter().map(|(_, p)| p))
            .chain(&self.hypothetical_frames)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum WordMatcher {
    Exact(String),
    Prefix(String),
}

impl WordMatcher {
    fn matches(&self, token: &str) -> bool {
        match self {
            WordMatcher::Exact(w) => token == w,
            WordMatcher::Prefix(p) => token.starts_with(p.as_str()),
        }
    }
}

/// A compiled lexicon pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    source: String,
    alternatives: Vec<Vec<WordMatcher>>,
}

impl Pattern {
    pub fn parse(source: &str) -> Result<Pattern, ExtractionError> {
        let mut alternatives = Vec::new();
        for alt in source.split('|') {
            let mut words = Vec::new();
            for word in alt.split_whitespace() {
                let word = word.to_lowercase();
                let (stem, prefix) = match word.strip_suffix('*') {
                    Some(stem) => (stem.to_string(), true),
                    None => (word, false),
                };
                if stem.is_empty() || !tokenize(&stem).iter().map(|t| &t.text).eq([&stem]) {
                    return Err(ExtractionError::Lexicon(format!(
                        "pattern `{source}` contains an unusable word `{stem}`"
                    )));
                }
                words.push(if prefix { WordMatcher::Prefix(stem) } else { WordMatcher::Exact(stem) });
            }
            if words.is_empty() {
                return Err(ExtractionError::Lexicon(format!(
                    "pattern `{source}` has an empty alternative"
                )));
            }
            alternatives.push(words);
        }
        Ok(Pattern { source: source.to_string(), alternatives })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// All matches as inclusive-exclusive token index ranges.
    pub fn find_all(&self, tokens: &[Token]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for start in 0..tokens.len() {
            for alt in &self.alternatives {
                if self.matches_at(alt, tokens, start) {
                    out.push((start, start + alt.len()));
                    break;
                }
            }
        }
        out
    }

    /// Whether the pattern matches starting exactly at token `start`.
    pub fn match_len_at(&self, tokens: &[Token], start: usize) -> Option<usize> {
        self.alternatives
            .iter()
            .find(|alt| self.matches_at(alt, tokens, start))
            .map(Vec::len)
    }

    fn matches_at(&self, alt: &[WordMatcher], tokens: &[Token], start: usize) -> bool {
        let Some(window) = tokens.get(start..start + alt.len()) else {
            return false;
        };
        let clause = window[0].clause;
        window
            .iter()
            .zip(alt)
            .all(|(tok, m)| tok.clause == clause && m.matches(&tok.text))
    }
}

/// A lowercase word with its character offsets and clause number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub clause: usize,
}

const CLAUSE_BREAKS: &[char] = &['.', '!', '?', ';', ':', '\n'];

/// Splits text into word tokens and numbers the clauses they belong to.
///
/// Words are runs of letters and digits, joined across single inner `-`
/// or apostrophes ("net-7", "don't"). A clause ends at `. ! ? ; :` or a
/// newline, and the word "also" opens a new one.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut clause = 0usize;
    let mut pending_break = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_alphanumeric() {
            let start = i;
            while i < chars.len() {
                // inner hyphens and apostrophes stay inside the word
                let joiner = matches!(chars[i], '-' | '\'' | '’')
                    && i + 1 < chars.len()
                    && chars[i + 1].is_alphanumeric()
                    && i > start;
                if chars[i].is_alphanumeric() || joiner {
                    i += 1;
                } else {
                    break;
                }
            }
            let word: String = chars[start..i].iter().collect::<String>().to_lowercase().replace('’', "'");
            if pending_break || (word == "also" && !tokens.is_empty()) {
                if !tokens.is_empty() {
                    clause += 1;
                }
                pending_break = false;
            }
            tokens.push(Token { text: word, start, end: i, clause });
            continue;
        }
        if CLAUSE_BREAKS.contains(&c) {
            let decimal_point = c == '.'
                && i > 0
                && chars[i - 1].is_ascii_digit()
                && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
            if !decimal_point {
                pending_break = true;
            }
        }
        i += 1;
    }
    tokens
}
