//! Deterministic, lexicon-scored multi-label classifier.
//!
//! Each lexicon entry that matches adds its weight once to its intent type.
//! Report and notification requests share vocabulary ("status", "report"),
//! so those cues are routed clause by clause:
//!
//! | clause has                         | status cues count toward |
//! |------------------------------------|--------------------------|
//! | recurrence cue only                | notification             |
//! | retrospective cue only             | report                   |
//! | both                               | both                     |
//! | neither, but a notify verb         | notification             |
//! | neither                            | report                   |
//!
//! A deployment or modification cue right after a hypothetical frame
//! ("is it feasible to deploy") is the object of a feasibility check and
//! does not count on its own.
//!
//! Retrospective cues always count toward report; recurrence cues count
//! toward notification whenever the clause asks for information at all.
//! Routing is local to a clause, so joining two requests never removes an
//! intent either of them had on its own.

use super::lexicon::{CueEntry, Lexicon, Pattern, Token};
use super::{lexicon::tokenize, ExtractionError, ExtractorBackend};
use crate::model::{DetectedIntent, ExtractionOutcome, IntentType, Span};

const REPORT: IntentType = IntentType::IntentReportRequest;
const NOTIFY: IntentType = IntentType::RegularNotificationRequest;

/// Classifier backed by a [`Lexicon`].
#[derive(Debug, Clone)]
pub struct RuleBackend {
    lexicon: Lexicon,
}

impl RuleBackend {
    pub fn new(lexicon: Lexicon) -> Self {
        RuleBackend { lexicon }
    }

    pub fn bundled() -> Self {
        RuleBackend::new(Lexicon::bundled())
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }
}

impl ExtractorBackend for RuleBackend {
    fn name(&self) -> &str {
        "rule"
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn classify(&self, request_text: &str) -> Result<ExtractionOutcome, ExtractionError> {
        extract_rule_based(request_text, &self.lexicon)
    }
}

#[derive(Debug)]
struct Contribution {
    label: String,
    weight: f64,
    spans: Vec<Span>,
}

fn surface(tokens: &[Token], (a, b): (usize, usize)) -> String {
    tokens[a..b].iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ")
}

fn span_of(tokens: &[Token], (a, b): (usize, usize)) -> Span {
    Span::new(tokens[a].start, tokens[b - 1].end)
}

/// Cue hits inside one clause: (entry, matches).
fn clause_hits<'a>(
    cues: &'a [(CueEntry, Pattern)],
    tokens: &[Token],
    clause: usize,
) -> Vec<(&'a CueEntry, Vec<(usize, usize)>)> {
    cues.iter()
        .filter_map(|(entry, pattern)| {
            let hits: Vec<_> = pattern
                .find_all(tokens)
                .into_iter()
                .filter(|&(a, _)| tokens[a].clause == clause)
                .collect();
            (!hits.is_empty()).then_some((entry, hits))
        })
        .collect()
}

fn cue_contributions(
    kind: &str,
    hits: &[(&CueEntry, Vec<(usize, usize)>)],
    tokens: &[Token],
) -> Vec<Contribution> {
    hits.iter()
        .map(|(entry, ranges)| Contribution {
            label: format!("{kind} cue \"{}\"", surface(tokens, ranges[0])),
            weight: entry.weight,
            spans: ranges.iter().map(|&r| span_of(tokens, r)).collect(),
        })
        .collect()
}

/// Classifies `text` against `lexicon`.
pub fn extract_rule_based(text: &str, lexicon: &Lexicon) -> Result<ExtractionOutcome, ExtractionError> {
    if text.trim().is_empty() {
        return Err(ExtractionError::EmptyRequest);
    }
    let tokens = tokenize(text);
    let mut acc: [Vec<Contribution>; 6] = Default::default();

    // token indices that directly follow a hypothetical frame
    let framed: Vec<usize> = lexicon
        .hypothetical_frames
        .iter()
        .flat_map(|p| p.find_all(&tokens))
        .map(|(_, end)| end)
        .collect();

    // direct entries, each counted once
    let mut notify_clauses = Vec::new();
    for (entry, pattern) in &lexicon.entries {
        let mut hits = pattern.find_all(&tokens);
        if matches!(entry.intent_type, IntentType::Deployment | IntentType::Modification) {
            hits.retain(|&(a, _)| !(framed.contains(&a) && tokens[a - 1].clause == tokens[a].clause));
        }
        if hits.is_empty() {
            continue;
        }
        if entry.intent_type == NOTIFY {
            notify_clauses.extend(hits.iter().map(|&(a, _)| tokens[a].clause));
        }
        acc[entry.intent_type.index()].push(Contribution {
            label: format!("\"{}\"", surface(&tokens, hits[0])),
            weight: entry.weight,
            spans: hits.iter().map(|&r| span_of(&tokens, r)).collect(),
        });
    }

    // report / notification routing, clause by clause
    let clause_count = tokens.last().map_or(0, |t| t.clause + 1);
    for clause in 0..clause_count {
        let status = clause_hits(&lexicon.status, &tokens, clause);
        let recurrence = clause_hits(&lexicon.recurrence, &tokens, clause);
        let retro = clause_hits(&lexicon.retrospective, &tokens, clause);
        let notify = notify_clauses.contains(&clause);

        let has_status = !status.is_empty();
        let has_rec = !recurrence.is_empty();
        let has_retro = !retro.is_empty();

        let mut status_targets = Vec::new();
        if has_retro {
            acc[REPORT.index()].extend(cue_contributions("retrospective", &retro, &tokens));
            status_targets.push(REPORT);
        }
        if has_rec && (has_status || notify || has_retro) {
            acc[NOTIFY.index()].extend(cue_contributions("recurrence", &recurrence, &tokens));
            status_targets.push(NOTIFY);
        }
        if has_status {
            if status_targets.is_empty() {
                status_targets.push(if notify { NOTIFY } else { REPORT });
            }
            for t in status_targets {
                acc[t.index()].extend(cue_contributions("status", &status, &tokens));
            }
        }
    }

    let mut detected = Vec::new();
    for t in IntentType::ALL {
        let contributions = &acc[t.index()];
        let score: f64 = contributions.iter().map(|c| c.weight).sum();
        if contributions.is_empty() || score < lexicon.threshold {
            continue;
        }
        let cues = contributions
            .iter()
            .map(|c| format!("{} ({})", c.label, c.weight))
            .collect::<Vec<_>>()
            .join(", ");
        let explanation = format!(
            "{t} detected from {cues}; score {score} meets threshold {}.",
            lexicon.threshold
        );
        let spans = contributions.iter().flat_map(|c| c.spans.iter().copied()).collect();
        let confidence = (1.0 - 0.5f64.powf(score / lexicon.threshold)).clamp(0.0, 1.0);
        detected.push(DetectedIntent::new(t, explanation, spans, confidence)?);
    }

    if !detected.is_empty() {
        return Ok(ExtractionOutcome::intents(detected)?);
    }
    if has_unknown_action(&tokens, lexicon) {
        Ok(ExtractionOutcome::UnknownIntent)
    } else {
        Ok(ExtractionOutcome::NoIntentPresent)
    }
}

/// True when some clause opens (after politeness words) with a known
/// action verb that the intent lexicon does not cover.
fn has_unknown_action(tokens: &[Token], lexicon: &Lexicon) -> bool {
    let mut i = 0;
    while i < tokens.len() {
        let clause = tokens[i].clause;
        let clause_end = tokens[i..]
            .iter()
            .position(|t| t.clause != clause)
            .map_or(tokens.len(), |p| i + p);
        let mut head = i;
        // "also" only marks a clause break
        if tokens[head].text == "also" {
            head += 1;
        }
        'skip: while head < clause_end {
            for p in &lexicon.politeness_prefixes {
                if let Some(n) = p.match_len_at(tokens, head) {
                    head += n;
                    continue 'skip;
                }
            }
            break;
        }
        if head < clause_end
            && lexicon
                .unknown_actions
                .iter()
                .any(|p| p.match_len_at(tokens, head).is_some())
        {
            return true;
        }
        i = clause_end;
    }
    false
}
