//! Conversation history, reference resolution and assumed defaults.

pub mod events;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{IntentId, RequestId, SessionId};
use crate::model::{AssumedDefault, AttrValue, Attribute, ExtractionOutcome, IntentType, StructuredIntent};
use crate::time::{IsoDuration, LogicalTime};

pub use events::{Event, EventKind, EventLog, EventLogError};

/// Inactivity window after which a session is dropped.
pub const DEFAULT_SESSION_TTL: IsoDuration = IsoDuration::from_hours(24);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContextError {
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("session {0} expired")]
    Expired(SessionId),
    #[error("session {0} already exists")]
    DuplicateSession(SessionId),
    #[error("request at {at} is not after the previous request at {last}")]
    OutOfOrder { at: LogicalTime, last: LogicalTime },
    #[error("malformed {kind:?} event: {reason}")]
    BadEvent { kind: EventKind, reason: String },
}

/// A structured intent as remembered by the session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentRef {
    pub id: IntentId,
    pub intent_type: IntentType,
}

impl From<&StructuredIntent> for IntentRef {
    fn from(i: &StructuredIntent) -> Self {
        IntentRef { id: i.id, intent_type: i.intent_type }
    }
}

/// One user request and what came of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub request_id: RequestId,
    pub text: String,
    pub timestamp: LogicalTime,
    pub outcome: ExtractionOutcome,
    pub intents: Vec<IntentRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: SessionId,
    pub created_at: LogicalTime,
    requests: Vec<SessionEntry>,
}

impl Session {
    pub fn new(id: SessionId, created_at: LogicalTime) -> Self {
        Session { id, created_at, requests: Vec::new() }
    }

    pub fn requests(&self) -> &[SessionEntry] {
        &self.requests
    }

    pub fn last_active(&self) -> LogicalTime {
        self.requests.last().map_or(self.created_at, |r| r.timestamp)
    }

    /// Appends a request; timestamps must strictly increase.
    pub fn record(&mut self, entry: SessionEntry) -> Result<(), ContextError> {
        if let Some(last) = self.requests.last() {
            if entry.timestamp <= last.timestamp {
                return Err(ContextError::OutOfOrder { at: entry.timestamp, last: last.timestamp });
            }
        }
        self.requests.push(entry);
        Ok(())
    }

    /// Every structured intent so far, oldest first.
    pub fn intent_history(&self) -> Vec<IntentRef> {
        self.requests.iter().flat_map(|r| r.intents.iter().copied()).collect()
    }

    pub fn contains_intent(&self, id: IntentId) -> bool {
        self.requests.iter().any(|r| r.intents.iter().any(|i| i.id == id))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "resolution", content = "value", rename_all = "snake_case")]
pub enum ReferenceResolution {
    Resolved(IntentId),
    Unresolved(String),
}

impl ReferenceResolution {
    pub fn resolved(&self) -> Option<IntentId> {
        match self {
            ReferenceResolution::Resolved(id) => Some(*id),
            ReferenceResolution::Unresolved(_) => None,
        }
    }
}

struct ReferenceGrammar {
    typed: Vec<(IntentType, Regex)>,
    explicit_request: Regex,
}

fn reference_grammar() -> &'static ReferenceGrammar {
    static G: OnceLock<ReferenceGrammar> = OnceLock::new();
    G.get_or_init(|| {
        let det = r"(?i)\b(?:the|that|this|my|our|previous|last|earlier|prior|recent)\s+(?:[a-z0-9-]+\s+)?";
        let typed = [
            (IntentType::Deployment, r"(?:deployment|network\s+creation|new\s+network|rollout)"),
            (IntentType::Modification, r"(?:modification|reconfiguration|change|changes)"),
            (IntentType::PerformanceAssurance, r"(?:performance\s+assurance|assurance|performance\s+target|guarantee)"),
            (IntentType::IntentFeasibilityCheck, r"(?:feasibility\s+check|feasibility)"),
            (IntentType::RegularNotificationRequest, r"(?:notification|subscription)s?"),
            (IntentType::IntentReportRequest, r"(?:report)"),
        ]
        .into_iter()
        .map(|(t, noun)| (t, Regex::new(&format!(r"{det}{noun}\b")).unwrap()))
        .collect();
        ReferenceGrammar {
            typed,
            explicit_request: Regex::new(r"(?i)\b(?:previous|last|earlier|prior)\s+(?:request|intent|one)\b").unwrap(),
        }
    })
}

/// The intent type a phrase refers to, if it names one ("the deployment").
pub fn referenced_type(phrase: &str) -> Option<IntentType> {
    reference_grammar()
        .typed
        .iter()
        .filter_map(|(t, re)| re.find(phrase).map(|m| (m.start(), *t)))
        .min_by_key(|(start, _)| *start)
        .map(|(_, t)| t)
}

/// True when the phrase points explicitly at an earlier request rather than
/// at something in the current one.
pub fn names_previous_request(phrase: &str) -> bool {
    reference_grammar().explicit_request.is_match(phrase)
}

/// Resolves `phrase` against `candidates`, which are ordered oldest first.
pub fn resolve_among(candidates: &[IntentRef], phrase: &str) -> ReferenceResolution {
    if candidates.is_empty() {
        return ReferenceResolution::Unresolved("no prior request in session".into());
    }
    match referenced_type(phrase) {
        Some(t) => candidates
            .iter()
            .rev()
            .find(|c| c.intent_type == t)
            .map(|c| ReferenceResolution::Resolved(c.id))
            .unwrap_or_else(|| ReferenceResolution::Unresolved(format!("no prior {t} in session"))),
        None => ReferenceResolution::Resolved(candidates[candidates.len() - 1].id),
    }
}

/// Resolves "the previous request", "the deployment" and similar phrases to
/// an intent recorded earlier in `session`.
pub fn resolve_reference(session: &Session, phrase: &str) -> ReferenceResolution {
    resolve_among(&session.intent_history(), phrase)
}

/// Attributes that may be filled with a default, per intent type.
pub const DEFAULTS: &[(IntentType, Attribute, IsoDuration)] = &[
    (IntentType::RegularNotificationRequest, Attribute::Frequency, IsoDuration::from_mins(15)),
    (IntentType::PerformanceAssurance, Attribute::EvaluationWindow, IsoDuration::from_mins(5)),
];

/// Fills missing defaultable attributes and records a notice for each.
pub fn apply_defaults(mut intent: StructuredIntent) -> StructuredIntent {
    for &(t, attribute, value) in DEFAULTS {
        if t != intent.intent_type || intent.attributes.contains_key(&attribute) {
            continue;
        }
        let notice = match attribute {
            Attribute::Frequency => format!(
                "No notification frequency was given, so updates will be sent every {} ({value}).",
                value.describe()
            ),
            _ => format!(
                "No {} was given, so {} ({value}) is assumed.",
                attribute.name().replace('_', " "),
                value.describe()
            ),
        };
        intent.attributes.insert(attribute, AttrValue::Duration(value));
        intent.assumed_defaults.push(AssumedDefault { attribute, value: AttrValue::Duration(value), notice });
    }
    intent
}

/// All live sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionStore {
    sessions: BTreeMap<SessionId, Session>,
    ttl: IsoDuration,
}

impl Default for SessionStore {
    fn default() -> Self {
        SessionStore::new(DEFAULT_SESSION_TTL)
    }
}

impl SessionStore {
    pub fn new(ttl: IsoDuration) -> Self {
        SessionStore { sessions: BTreeMap::new(), ttl }
    }

    pub fn ttl(&self) -> IsoDuration {
        self.ttl
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn create(&mut self, id: SessionId, now: LogicalTime) -> Result<&Session, ContextError> {
        if self.sessions.contains_key(&id) {
            return Err(ContextError::DuplicateSession(id));
        }
        Ok(self.sessions.entry(id).or_insert_with(|| Session::new(id, now)))
    }

    fn is_expired(&self, session: &Session, now: LogicalTime) -> bool {
        now.secs().saturating_sub(session.last_active().secs()) > self.ttl.secs()
    }

    /// The session, provided it has been active within the TTL.
    pub fn get(&self, id: SessionId, now: LogicalTime) -> Result<&Session, ContextError> {
        let session = self.sessions.get(&id).ok_or(ContextError::UnknownSession(id))?;
        if self.is_expired(session, now) {
            return Err(ContextError::Expired(id));
        }
        Ok(session)
    }

    /// The session regardless of expiry; for audit reads.
    pub fn peek(&self, id: SessionId) -> Option<&Session> {
        self.sessions.get(&id)
    }

    pub fn record(&mut self, id: SessionId, entry: SessionEntry) -> Result<(), ContextError> {
        self.get(id, entry.timestamp)?;
        self.sessions
            .get_mut(&id)
            .expect("checked above")
            .record(entry)
    }

    /// Drops sessions idle for longer than the TTL and returns their ids.
    pub fn expire(&mut self, now: LogicalTime) -> Vec<SessionId> {
        let dead: Vec<SessionId> = self
            .sessions
            .values()
            .filter(|s| self.is_expired(s, now))
            .map(|s| s.id)
            .collect();
        for id in &dead {
            self.sessions.remove(id);
        }
        dead
    }

    pub fn iter(&self) -> impl Iterator<Item = &Session> {
        self.sessions.values()
    }

    /// Re-applies a logged session event; other kinds are ignored.
    pub fn apply_event(&mut self, event: &Event) -> Result<(), ContextError> {
        let bad = |reason: &str| ContextError::BadEvent { kind: event.event_kind, reason: reason.to_string() };
        match event.event_kind {
            EventKind::SessionCreated => {
                let id = event.session_id.ok_or_else(|| bad("missing session_id"))?;
                self.create(id, event.ts)?;
            }
            EventKind::RequestRecorded => {
                let id = event.session_id.ok_or_else(|| bad("missing session_id"))?;
                let entry: SessionEntry =
                    serde_json::from_value(event.payload.clone()).map_err(|e| bad(&e.to_string()))?;
                // replay keeps history even for sessions that have since gone idle
                self.sessions
                    .get_mut(&id)
                    .ok_or(ContextError::UnknownSession(id))?
                    .record(entry)?;
            }
            _ => {}
        }
        Ok(())
    }
}
