//! Intent taxonomy, extraction results and the structured-intent schema.
//!
//! These are plain values shared by every other module. Their serde encoding
//! is the wire contract for the gateway API, the fixtures and the corpus files.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{IntentId, RequestId};
use crate::time::IsoDuration;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("unknown intent type name `{0}`")]
    UnknownName(String),
    #[error("detected intent has an empty explanation")]
    EmptyExplanation,
    #[error("confidence {0} is outside [0, 1]")]
    ConfidenceOutOfRange(f64),
    #[error("span {start}..{end} is inverted")]
    InvertedSpan { start: usize, end: usize },
    #[error("span {start}..{end} exceeds text length {len}")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },
    #[error("an Intents outcome needs at least one detected intent")]
    EmptyIntentSet,
    #[error("intent type `{0}` detected more than once")]
    DuplicateIntent(IntentType),
    #[error("entity {kind:?} cannot hold {value:?}")]
    EntityShape { kind: EntityKind, value: EntityValue },
    #[error("attribute `{attribute}` is not legal for {intent_type}")]
    IllegalAttribute {
        intent_type: IntentType,
        attribute: Attribute,
    },
    #[error("attribute `{attribute}` cannot hold {value:?}")]
    AttributeShape { attribute: Attribute, value: AttrValue },
    #[error("assumed default `{0}` is missing from the attributes")]
    DanglingDefault(Attribute),
}

/// The six 5G-core intent categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IntentType {
    Deployment,
    Modification,
    PerformanceAssurance,
    IntentReportRequest,
    IntentFeasibilityCheck,
    RegularNotificationRequest,
}

impl IntentType {
    pub const ALL: [IntentType; 6] = [
        IntentType::Deployment,
        IntentType::Modification,
        IntentType::PerformanceAssurance,
        IntentType::IntentReportRequest,
        IntentType::IntentFeasibilityCheck,
        IntentType::RegularNotificationRequest,
    ];

    pub fn canonical_name(self) -> &'static str {
        match self {
            IntentType::Deployment => "Deployment Intent",
            IntentType::Modification => "Modification Intent",
            IntentType::PerformanceAssurance => "Performance Assurance Intent",
            IntentType::IntentReportRequest => "Intent Report Request",
            IntentType::IntentFeasibilityCheck => "Intent Feasibility Check",
            IntentType::RegularNotificationRequest => "Regular Notification Request",
        }
    }

    /// Short lowercase alias accepted by [`parse_intent_type`].
    pub fn alias(self) -> &'static str {
        match self {
            IntentType::Deployment => "deployment",
            IntentType::Modification => "modification",
            IntentType::PerformanceAssurance => "performance assurance",
            IntentType::IntentReportRequest => "report",
            IntentType::IntentFeasibilityCheck => "feasibility",
            IntentType::RegularNotificationRequest => "notification",
        }
    }

    /// Position in [`IntentType::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for IntentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Case-insensitive, whitespace-tolerant lookup by canonical name or alias.
pub fn parse_intent_type(name: &str) -> Result<IntentType, ModelError> {
    let wanted = normalize_name(name);
    IntentType::ALL
        .into_iter()
        .find(|t| normalize_name(t.canonical_name()) == wanted || t.alias() == wanted)
        .ok_or_else(|| ModelError::UnknownName(name.to_string()))
}

impl FromStr for IntentType {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_intent_type(s)
    }
}

impl Serialize for IntentType {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.canonical_name())
    }
}

impl<'de> Deserialize<'de> for IntentType {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_intent_type(&s).map_err(serde::de::Error::custom)
    }
}

/// Half-open range of character (not byte) offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(self, other: Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Slices `text` by character offsets.
    pub fn slice(self, text: &str) -> String {
        text.chars().skip(self.start).take(self.len()).collect()
    }
}

/// Sorts spans, drops empty ones and merges overlapping or touching ones.
pub fn normalize_spans(mut spans: Vec<Span>) -> Vec<Span> {
    spans.retain(|s| !s.is_empty());
    spans.sort();
    let mut out: Vec<Span> = Vec::with_capacity(spans.len());
    for s in spans {
        match out.last_mut() {
            Some(last) if s.start <= last.end => last.end = last.end.max(s.end),
            _ => out.push(s),
        }
    }
    out
}

/// One intent found in a request, with the reason it was selected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDetectedIntent")]
pub struct DetectedIntent {
    intent_type: IntentType,
    explanation: String,
    evidence_spans: Vec<Span>,
    confidence: f64,
}

#[derive(Deserialize)]
struct RawDetectedIntent {
    intent_type: IntentType,
    explanation: String,
    #[serde(default)]
    evidence_spans: Vec<Span>,
    confidence: f64,
}

impl TryFrom<RawDetectedIntent> for DetectedIntent {
    type Error = ModelError;

    fn try_from(raw: RawDetectedIntent) -> Result<Self, Self::Error> {
        DetectedIntent::new(raw.intent_type, raw.explanation, raw.evidence_spans, raw.confidence)
    }
}

impl DetectedIntent {
    pub fn new(
        intent_type: IntentType,
        explanation: impl Into<String>,
        evidence_spans: Vec<Span>,
        confidence: f64,
    ) -> Result<Self, ModelError> {
        let explanation = explanation.into();
        if explanation.trim().is_empty() {
            return Err(ModelError::EmptyExplanation);
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(ModelError::ConfidenceOutOfRange(confidence));
        }
        if let Some(s) = evidence_spans.iter().find(|s| s.end < s.start) {
            return Err(ModelError::InvertedSpan { start: s.start, end: s.end });
        }
        Ok(DetectedIntent {
            intent_type,
            explanation,
            evidence_spans: normalize_spans(evidence_spans),
            confidence,
        })
    }

    pub fn intent_type(&self) -> IntentType {
        self.intent_type
    }

    pub fn explanation(&self) -> &str {
        &self.explanation
    }

    pub fn evidence_spans(&self) -> &[Span] {
        &self.evidence_spans
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    /// Checks that every evidence span lies inside `text`.
    pub fn check_spans(&self, text: &str) -> Result<(), ModelError> {
        let len = text.chars().count();
        match self.evidence_spans.iter().find(|s| s.end > len) {
            Some(s) => Err(ModelError::SpanOutOfBounds { start: s.start, end: s.end, len }),
            None => Ok(()),
        }
    }
}

/// Non-empty set of detections, at most one per intent type, ordered by type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<DetectedIntent>", into = "Vec<DetectedIntent>")]
pub struct IntentSet(Vec<DetectedIntent>);

impl IntentSet {
    pub fn new(mut intents: Vec<DetectedIntent>) -> Result<Self, ModelError> {
        if intents.is_empty() {
            return Err(ModelError::EmptyIntentSet);
        }
        intents.sort_by_key(|d| d.intent_type);
        if let Some(w) = intents.windows(2).find(|w| w[0].intent_type == w[1].intent_type) {
            return Err(ModelError::DuplicateIntent(w[0].intent_type));
        }
        Ok(IntentSet(intents))
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DetectedIntent> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn types(&self) -> Vec<IntentType> {
        self.0.iter().map(|d| d.intent_type).collect()
    }

    pub fn get(&self, t: IntentType) -> Option<&DetectedIntent> {
        self.0.iter().find(|d| d.intent_type == t)
    }
}

impl TryFrom<Vec<DetectedIntent>> for IntentSet {
    type Error = ModelError;

    fn try_from(v: Vec<DetectedIntent>) -> Result<Self, Self::Error> {
        IntentSet::new(v)
    }
}

impl From<IntentSet> for Vec<DetectedIntent> {
    fn from(s: IntentSet) -> Self {
        s.0
    }
}

impl<'a> IntoIterator for &'a IntentSet {
    type Item = &'a DetectedIntent;
    type IntoIter = std::slice::Iter<'a, DetectedIntent>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Result of classifying one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ExtractionOutcome {
    Intents { intents: IntentSet },
    NoIntentPresent,
    UnknownIntent,
}

impl ExtractionOutcome {
    pub fn intents(detected: Vec<DetectedIntent>) -> Result<Self, ModelError> {
        Ok(ExtractionOutcome::Intents { intents: IntentSet::new(detected)? })
    }

    /// Detected types in canonical order; empty for the two sentinels.
    pub fn types(&self) -> Vec<IntentType> {
        match self {
            ExtractionOutcome::Intents { intents } => intents.types(),
            _ => Vec::new(),
        }
    }

    pub fn detected(&self) -> &[DetectedIntent] {
        match self {
            ExtractionOutcome::Intents { intents } => &intents.0,
            _ => &[],
        }
    }

    /// The phrase echoed back for sentinel outcomes.
    pub fn sentinel_text(&self) -> Option<&'static str> {
        match self {
            ExtractionOutcome::Intents { .. } => None,
            ExtractionOutcome::NoIntentPresent => Some("no intent present"),
            ExtractionOutcome::UnknownIntent => Some("unknown intent"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Region,
    NetworkId,
    PlmnId,
    QosLevel,
    Frequency,
    CapacityTarget,
    RegisteredUsersTarget,
    PduSessionsTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = "==")]
    Exactly,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::AtLeast => ">=",
            Comparator::AtMost => "<=",
            Comparator::Exactly => "==",
        }
    }

    pub fn holds(self, observed: u64, target: u64) -> bool {
        match self {
            Comparator::AtLeast => observed >= target,
            Comparator::AtMost => observed <= target,
            Comparator::Exactly => observed == target,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A numeric target such as "at least 5000".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Bound {
    pub comparator: Comparator,
    pub value: u64,
}

impl Bound {
    pub fn at_least(value: u64) -> Self {
        Bound { comparator: Comparator::AtLeast, value }
    }

    pub fn at_most(value: u64) -> Self {
        Bound { comparator: Comparator::AtMost, value }
    }

    pub fn holds(self, observed: u64) -> bool {
        self.comparator.holds(observed, self.value)
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.comparator, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityValue {
    Text(String),
    Identifier(String),
    Duration(IsoDuration),
    Target(Bound),
}

/// A typed parameter found in the request text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub kind: EntityKind,
    pub raw_span: Span,
    pub normalized: EntityValue,
}

impl Entity {
    pub fn new(kind: EntityKind, raw_span: Span, normalized: EntityValue) -> Result<Self, ModelError> {
        let ok = match (&kind, &normalized) {
            (EntityKind::Region | EntityKind::QosLevel, EntityValue::Text(s)) => !s.is_empty(),
            (EntityKind::NetworkId | EntityKind::PlmnId, EntityValue::Identifier(s)) => !s.is_empty(),
            (EntityKind::Frequency, EntityValue::Duration(d)) => !d.is_zero(),
            (
                EntityKind::CapacityTarget
                | EntityKind::RegisteredUsersTarget
                | EntityKind::PduSessionsTarget,
                EntityValue::Target(_),
            ) => true,
            _ => false,
        };
        if !ok {
            return Err(ModelError::EntityShape { kind, value: normalized });
        }
        Ok(Entity { kind, raw_span, normalized })
    }
}

/// Attribute slots of a structured intent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Region,
    NetworkType,
    PlmnId,
    CapacityTarget,
    NetworkId,
    RegisteredUsersTarget,
    PduSessionsTarget,
    QosLevel,
    EvaluationWindow,
    SubjectIntent,
    Frequency,
}

impl Attribute {
    pub fn name(self) -> &'static str {
        match self {
            Attribute::Region => "region",
            Attribute::NetworkType => "network_type",
            Attribute::PlmnId => "plmn_id",
            Attribute::CapacityTarget => "capacity_target",
            Attribute::NetworkId => "network_id",
            Attribute::RegisteredUsersTarget => "registered_users_target",
            Attribute::PduSessionsTarget => "pdu_sessions_target",
            Attribute::QosLevel => "qos_level",
            Attribute::EvaluationWindow => "evaluation_window",
            Attribute::SubjectIntent => "subject_intent",
            Attribute::Frequency => "frequency",
        }
    }

    fn accepts(self, value: &AttrValue) -> bool {
        use Attribute::*;
        match (self, value) {
            (Region | NetworkType | PlmnId | NetworkId | QosLevel, AttrValue::Text(s)) => !s.is_empty(),
            (CapacityTarget | RegisteredUsersTarget | PduSessionsTarget, AttrValue::Target(_)) => true,
            (EvaluationWindow | Frequency, AttrValue::Duration(d)) => !d.is_zero(),
            (SubjectIntent, AttrValue::Intent(_)) => true,
            _ => false,
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Attribute keys allowed on each intent type.
pub fn legal_attributes(t: IntentType) -> &'static [Attribute] {
    use Attribute::*;
    match t {
        IntentType::Deployment => &[Region, NetworkType, PlmnId, CapacityTarget],
        IntentType::Modification => &[NetworkId, Region, NetworkType, PlmnId, CapacityTarget],
        IntentType::PerformanceAssurance => &[
            NetworkId,
            RegisteredUsersTarget,
            PduSessionsTarget,
            QosLevel,
            EvaluationWindow,
        ],
        IntentType::IntentReportRequest => &[SubjectIntent],
        IntentType::IntentFeasibilityCheck => &[Region, CapacityTarget, SubjectIntent],
        IntentType::RegularNotificationRequest => &[NetworkId, SubjectIntent, Frequency],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrValue {
    Text(String),
    Target(Bound),
    Duration(IsoDuration),
    Intent(IntentId),
}

impl AttrValue {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            AttrValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_target(&self) -> Option<Bound> {
        match self {
            AttrValue::Target(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_duration(&self) -> Option<IsoDuration> {
        match self {
            AttrValue::Duration(d) => Some(*d),
            _ => None,
        }
    }

    pub fn as_intent(&self) -> Option<IntentId> {
        match self {
            AttrValue::Intent(id) => Some(*id),
            _ => None,
        }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Text(s) => f.write_str(s),
            AttrValue::Target(b) => write!(f, "{b}"),
            AttrValue::Duration(d) => write!(f, "{d}"),
            AttrValue::Intent(id) => write!(f, "{id}"),
        }
    }
}

/// A value filled in on the user's behalf, with the notice shown to them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumedDefault {
    pub attribute: Attribute,
    pub value: AttrValue,
    pub notice: String,
}

/// A typed intent instance, ready for policy compilation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredIntent {
    pub id: IntentId,
    pub intent_type: IntentType,
    pub attributes: BTreeMap<Attribute, AttrValue>,
    pub source_request_id: RequestId,
    #[serde(default)]
    pub assumed_defaults: Vec<AssumedDefault>,
}

impl StructuredIntent {
    pub fn new(id: IntentId, intent_type: IntentType, source_request_id: RequestId) -> Self {
        StructuredIntent {
            id,
            intent_type,
            attributes: BTreeMap::new(),
            source_request_id,
            assumed_defaults: Vec::new(),
        }
    }

    pub fn with(mut self, attribute: Attribute, value: AttrValue) -> Self {
        self.attributes.insert(attribute, value);
        self
    }

    pub fn get(&self, attribute: Attribute) -> Option<&AttrValue> {
        self.attributes.get(&attribute)
    }

    pub fn text(&self, attribute: Attribute) -> Option<&str> {
        self.get(attribute).and_then(AttrValue::as_text)
    }

    pub fn target(&self, attribute: Attribute) -> Option<Bound> {
        self.get(attribute).and_then(AttrValue::as_target)
    }

    pub fn subject_intent(&self) -> Option<IntentId> {
        self.get(Attribute::SubjectIntent).and_then(AttrValue::as_intent)
    }

    /// Checks key legality, value shapes and that every assumed default is present.
    pub fn validate(&self) -> Result<(), ModelError> {
        let legal = legal_attributes(self.intent_type);
        for (attribute, value) in &self.attributes {
            if !legal.contains(attribute) {
                return Err(ModelError::IllegalAttribute {
                    intent_type: self.intent_type,
                    attribute: *attribute,
                });
            }
            if !attribute.accepts(value) {
                return Err(ModelError::AttributeShape {
                    attribute: *attribute,
                    value: value.clone(),
                });
            }
        }
        for d in &self.assumed_defaults {
            if self.attributes.get(&d.attribute) != Some(&d.value) {
                return Err(ModelError::DanglingDefault(d.attribute));
            }
        }
        Ok(())
    }
}
