//! Chat-model backend and the parser for its free-text answers.

use std::sync::Arc;
use std::time::Duration;

use regex::Regex;
use std::sync::OnceLock;

use super::chat::{ChatRequest, ChatTransport};
use super::prompt::{build_prompt, PromptSpec};
use super::{ExtractionError, ExtractorBackend};
use crate::model::{DetectedIntent, ExtractionOutcome, IntentType};

/// Exponential backoff between transport attempts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 2,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based): initial * 2^retry, capped.
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry).unwrap_or(u32::MAX);
        self.initial_backoff.saturating_mul(factor).min(self.max_backoff)
    }
}

pub type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

#[derive(Clone)]
pub struct LlmOptions {
    pub model: String,
    pub temperature: f64,
    pub retry: RetryPolicy,
    pub sleep: Sleeper,
}

impl Default for LlmOptions {
    fn default() -> Self {
        LlmOptions {
            model: "gpt-3.5-turbo".into(),
            temperature: 0.0,
            retry: RetryPolicy::default(),
            sleep: Arc::new(std::thread::sleep),
        }
    }
}

impl std::fmt::Debug for LlmOptions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmOptions")
            .field("model", &self.model)
            .field("temperature", &self.temperature)
            .field("retry", &self.retry)
            .finish_non_exhaustive()
    }
}

/// Sends one exchange (system prompt + request text) and parses the reply.
pub fn extract_llm(
    transport: &dyn ChatTransport,
    spec: &PromptSpec,
    text: &str,
    options: &LlmOptions,
) -> Result<ExtractionOutcome, ExtractionError> {
    if text.trim().is_empty() {
        return Err(ExtractionError::EmptyRequest);
    }
    let request = ChatRequest::new(options.model.clone(), options.temperature, build_prompt(spec), text.to_string());
    let mut attempts = 0;
    let response = loop {
        attempts += 1;
        match transport.complete(&request) {
            Ok(r) => break r,
            Err(e) if e.is_retryable() && attempts <= options.retry.max_retries => {
                (options.sleep)(options.retry.backoff(attempts - 1));
            }
            Err(source) => return Err(ExtractionError::Transport { attempts, source }),
        }
    };
    parse_llm_response(&response.content)
}

/// LLM-backed classifier.
pub struct LlmBackend {
    name: String,
    transport: Arc<dyn ChatTransport>,
    spec: PromptSpec,
    options: LlmOptions,
}

impl LlmBackend {
    pub fn new(name: impl Into<String>, transport: Arc<dyn ChatTransport>, spec: PromptSpec, options: LlmOptions) -> Self {
        LlmBackend { name: name.into(), transport, spec, options }
    }

    pub fn spec(&self) -> &PromptSpec {
        &self.spec
    }
}

impl ExtractorBackend for LlmBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn deterministic(&self) -> bool {
        self.transport.deterministic()
    }

    fn classify(&self, request_text: &str) -> Result<ExtractionOutcome, ExtractionError> {
        extract_llm(self.transport.as_ref(), &self.spec, request_text, &self.options)
    }
}

const NEGATIONS: &[&str] = &["not", "no", "never", "neither", "nor", "without", "isn't", "aren't", "doesn't", "don't"];
const HEDGES: &[&str] = &["might", "could", "may", "possibly", "perhaps"];

fn name_regex(phrase: &str) -> Regex {
    let words: Vec<String> = phrase.split_whitespace().map(regex::escape).collect();
    Regex::new(&format!(r"(?i)\b{}\b", words.join(r"\s+"))).expect("valid name regex")
}

type Matchers = Vec<(IntentType, Regex)>;

/// Canonical-name matchers, then alias matchers used only as a fallback.
fn matchers() -> &'static (Matchers, Matchers) {
    static M: OnceLock<(Matchers, Matchers)> = OnceLock::new();
    M.get_or_init(|| {
        let canonical = IntentType::ALL
            .iter()
            .map(|t| (*t, name_regex(t.canonical_name())))
            .collect();
        let aliases = [
            (IntentType::Deployment, "deployment"),
            (IntentType::Modification, "modification"),
            (IntentType::PerformanceAssurance, "performance assurance"),
            (IntentType::IntentReportRequest, "report request"),
            (IntentType::IntentReportRequest, "intent report"),
            (IntentType::IntentFeasibilityCheck, "feasibility check"),
            (IntentType::IntentFeasibilityCheck, "feasibility"),
            (IntentType::RegularNotificationRequest, "notification request"),
            (IntentType::RegularNotificationRequest, "regular notification"),
            (IntentType::RegularNotificationRequest, "notification"),
        ]
        .into_iter()
        .map(|(t, a)| (t, name_regex(a)))
        .collect();
        (canonical, aliases)
    })
}

#[derive(Debug, Clone)]
struct Mention {
    intent_type: IntentType,
    start: usize,
    end: usize,
}

/// Finds non-overlapping mentions, preferring earlier then longer matches.
fn find_mentions(raw: &str, table: &[(IntentType, Regex)]) -> Vec<Mention> {
    let mut all: Vec<Mention> = table
        .iter()
        .flat_map(|(t, re)| {
            re.find_iter(raw).map(move |m| Mention { intent_type: *t, start: m.start(), end: m.end() })
        })
        .collect();
    all.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
    let mut out: Vec<Mention> = Vec::new();
    for m in all {
        if out.last().is_none_or(|last| m.start >= last.end) {
            out.push(m);
        }
    }
    out
}

fn sentence_start(raw: &str, at: usize) -> usize {
    raw[..at]
        .rfind(['.', '!', '?', '\n'])
        .map_or(0, |i| i + 1)
}

fn sentence_end(raw: &str, at: usize) -> usize {
    raw[at..]
        .find(['.', '!', '?', '\n'])
        .map_or(raw.len(), |i| at + i + 1)
}

fn words_lower(s: &str) -> impl Iterator<Item = String> + '_ {
    s.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
}

fn is_affirmative(raw: &str, m: &Mention) -> bool {
    let lead = &raw[sentence_start(raw, m.start)..m.start];
    !words_lower(lead).any(|w| NEGATIONS.contains(&w.as_str()) || w.ends_with("n't"))
}

fn trailing_enumerator() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    R.get_or_init(|| Regex::new(r"(?:^|\n)[ \t]*(?:\d+[.)]|[-*•#]+)?[ \t*_#]*$").unwrap())
}

fn clean(s: &str) -> String {
    let s = s.trim_start_matches(|c: char| c.is_whitespace() || ":.-–—)*_\"'#".contains(c));
    let s = trailing_enumerator().replace(s, "");
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses a chat model's answer into an outcome.
///
/// Sentinel phrases win over everything else. Otherwise each affirmative
/// mention of an intent name opens a segment that runs to the next mention;
/// the segment text is that intent's explanation. Canonical names are
/// searched first and short aliases only if no canonical name appears.
pub fn parse_llm_response(raw: &str) -> Result<ExtractionOutcome, ExtractionError> {
    if raw.trim().is_empty() {
        return Err(ExtractionError::UnparseableResponse);
    }
    let lower = raw.to_lowercase();
    let squashed = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    if squashed.contains("no intent present") {
        return Ok(ExtractionOutcome::NoIntentPresent);
    }
    if squashed.contains("unknown intent") {
        return Ok(ExtractionOutcome::UnknownIntent);
    }

    let (canonical, aliases) = matchers();
    let mut mentions: Vec<Mention> = find_mentions(raw, canonical)
        .into_iter()
        .filter(|m| is_affirmative(raw, m))
        .collect();
    if mentions.is_empty() {
        mentions = find_mentions(raw, aliases)
            .into_iter()
            .filter(|m| is_affirmative(raw, m))
            .collect();
    }
    if mentions.is_empty() {
        return Err(ExtractionError::UnparseableResponse);
    }

    // (explanation, came straight after the name, context used for hedging)
    let mut best: Vec<(IntentType, String, bool, String)> = Vec::new();
    for (i, m) in mentions.iter().enumerate() {
        let seg_end = mentions.get(i + 1).map_or(raw.len(), |n| n.start);
        let after = clean(&raw[m.end..seg_end]);
        let direct = after.chars().next().is_some_and(|c| c.is_uppercase() || c.is_ascii_digit());
        let explanation = if direct {
            after
        } else {
            let e = sentence_end(raw, m.end).min(seg_end).max(m.end);
            clean(&raw[sentence_start(raw, m.start)..e])
        };
        let context = raw[sentence_start(raw, m.start)..seg_end].to_string();
        match best.iter_mut().find(|b| b.0 == m.intent_type) {
            Some(slot) if !slot.2 && direct => *slot = (m.intent_type, explanation, direct, context),
            Some(_) => {}
            None => best.push((m.intent_type, explanation, direct, context)),
        }
    }

    let detected = best
        .into_iter()
        .map(|(t, explanation, _, context)| {
            let hedged = words_lower(&context).any(|w| HEDGES.contains(&w.as_str()));
            let explanation = if explanation.is_empty() { t.canonical_name().to_string() } else { explanation };
            DetectedIntent::new(t, explanation, Vec::new(), if hedged { 0.5 } else { 1.0 })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExtractionOutcome::intents(detected)?)
}
