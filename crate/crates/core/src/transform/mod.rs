//! Structured intents from extraction output, and policies from structured
//! intents.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{apply_defaults, names_previous_request, resolve_among, IntentRef, ReferenceResolution};
use crate::ids::{IntentId, PolicyId, RequestId};
use crate::model::{
    AttrValue, Attribute, Comparator, DetectedIntent, Entity, EntityKind, EntityValue, ExtractionOutcome,
    IntentType, ModelError, StructuredIntent,
};
use crate::time::IsoDuration;

/// JSON schema every compiled policy validates against.
pub const POLICY_SCHEMA: &str = include_str!("../../schemas/policy.schema.json");

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("missing required attribute `{0}`")]
    MissingAttribute(String),
    #[error(transparent)]
    Invalid(#[from] ModelError),
}

impl TransformError {
    /// The question put back to the user for this failure.
    pub fn clarification(&self, intent_type: IntentType) -> String {
        match self {
            TransformError::MissingAttribute(name) => match name.as_str() {
                "region" => format!("In which region should the {intent_type} apply?"),
                "network_id" => format!("Which network (for example net-1) does the {intent_type} refer to?"),
                "performance_target" => {
                    "What should be assured: a number of registered users, PDU sessions, or a QoS level?".into()
                }
                "subject_intent" => "Which earlier request should the report cover?".into(),
                "subject" => format!("Which network or earlier request does the {intent_type} refer to?"),
                other => format!("Please provide `{other}` for the {intent_type}."),
            },
            TransformError::Invalid(e) => format!("The {intent_type} could not be understood: {e}."),
        }
    }
}

fn first(entities: &[Entity], kind: EntityKind) -> Option<&EntityValue> {
    entities.iter().find(|e| e.kind == kind).map(|e| &e.normalized)
}

fn attr_from(value: &EntityValue) -> AttrValue {
    match value {
        EntityValue::Text(s) | EntityValue::Identifier(s) => AttrValue::Text(s.clone()),
        EntityValue::Duration(d) => AttrValue::Duration(*d),
        EntityValue::Target(b) => AttrValue::Target(*b),
    }
}

/// QoS classes that describe a kind of network rather than a service level.
fn network_type_of(entities: &[Entity]) -> Option<AttrValue> {
    match first(entities, EntityKind::QosLevel) {
        Some(EntityValue::Text(s)) if matches!(s.as_str(), "URLLC" | "eMBB" | "mMTC" | "MIoT" | "V2X") => {
            Some(AttrValue::Text(s.clone()))
        }
        _ => None,
    }
}

/// Fills the attribute slots legal for the detected type, attaches the
/// resolved reference where one applies, applies defaults and validates.
pub fn to_structured(
    detected: &DetectedIntent,
    entities: &[Entity],
    resolution: Option<&ReferenceResolution>,
    id: IntentId,
    source_request_id: RequestId,
) -> Result<StructuredIntent, TransformError> {
    use Attribute::*;
    let t = detected.intent_type();
    let mut attrs: BTreeMap<Attribute, AttrValue> = BTreeMap::new();
    let mut put = |a: Attribute, v: Option<AttrValue>| {
        if let Some(v) = v {
            attrs.insert(a, v);
        }
    };
    let entity = |k: EntityKind| first(entities, k).map(attr_from);
    let resolved = resolution.and_then(ReferenceResolution::resolved).map(AttrValue::Intent);
    let missing = |name: &str| Err(TransformError::MissingAttribute(name.into()));

    match t {
        IntentType::Deployment | IntentType::Modification => {
            if t == IntentType::Modification {
                put(NetworkId, entity(EntityKind::NetworkId));
            }
            put(Region, entity(EntityKind::Region));
            put(NetworkType, network_type_of(entities));
            put(PlmnId, entity(EntityKind::PlmnId));
            put(CapacityTarget, entity(EntityKind::CapacityTarget));
            if t == IntentType::Deployment && !attrs.contains_key(&Region) {
                return missing("region");
            }
            if t == IntentType::Modification && !attrs.contains_key(&NetworkId) {
                return missing("network_id");
            }
        }
        IntentType::PerformanceAssurance => {
            put(NetworkId, entity(EntityKind::NetworkId));
            put(RegisteredUsersTarget, entity(EntityKind::RegisteredUsersTarget));
            put(PduSessionsTarget, entity(EntityKind::PduSessionsTarget));
            put(QosLevel, entity(EntityKind::QosLevel));
            if !attrs.contains_key(&NetworkId) {
                return missing("network_id");
            }
            if ![RegisteredUsersTarget, PduSessionsTarget, QosLevel].iter().any(|a| attrs.contains_key(a)) {
                return missing("performance_target");
            }
        }
        IntentType::IntentReportRequest => {
            put(SubjectIntent, resolved);
            if !attrs.contains_key(&SubjectIntent) {
                return missing("subject_intent");
            }
        }
        IntentType::IntentFeasibilityCheck => {
            put(Region, entity(EntityKind::Region));
            put(CapacityTarget, entity(EntityKind::CapacityTarget));
            put(SubjectIntent, resolved);
            if !attrs.contains_key(&Region) && !attrs.contains_key(&SubjectIntent) {
                return missing("subject");
            }
        }
        IntentType::RegularNotificationRequest => {
            match entity(EntityKind::NetworkId) {
                Some(n) => put(NetworkId, Some(n)),
                None => put(SubjectIntent, resolved),
            }
            put(Frequency, entity(EntityKind::Frequency));
            if !attrs.contains_key(&NetworkId) && !attrs.contains_key(&SubjectIntent) {
                return missing("subject");
            }
        }
    }

    let mut intent = StructuredIntent::new(id, t, source_request_id);
    intent.attributes = attrs;
    let intent = apply_defaults(intent);
    intent.validate()?;
    Ok(intent)
}

/// Structures every intent detected in one request.
///
/// Ids are minted in detection order. References are resolved against
/// `history` (oldest first) followed by the deployment, modification and
/// assurance intents of this same request, so "notify me of its status"
/// after "deploy ..." points at the new deployment. A phrase that names an
/// earlier request looks only at `history`. A feasibility check is tied to
/// a deployment or modification in the same request when there is one.
pub fn structure_request(
    outcome: &ExtractionOutcome,
    text: &str,
    entities: &[Entity],
    history: &[IntentRef],
    mut mint: impl FnMut() -> IntentId,
    request_id: RequestId,
) -> Vec<(IntentType, Result<StructuredIntent, TransformError>)> {
    use IntentType::*;
    let detected = outcome.detected();
    let siblings: Vec<IntentRef> =
        detected.iter().map(|d| IntentRef { id: mint(), intent_type: d.intent_type() }).collect();
    let changes = |r: &&IntentRef| matches!(r.intent_type, Deployment | Modification);
    let has_region = entities.iter().any(|e| e.kind == EntityKind::Region);
    detected
        .iter()
        .zip(&siblings)
        .map(|(d, me)| {
            let resolution = match me.intent_type {
                IntentReportRequest | RegularNotificationRequest => {
                    let mut candidates = history.to_vec();
                    if !names_previous_request(text) {
                        candidates.extend(
                            siblings.iter().filter(|s| matches!(s.intent_type, Deployment | Modification | PerformanceAssurance)),
                        );
                    }
                    Some(resolve_among(&candidates, text))
                }
                IntentFeasibilityCheck => match siblings.iter().rev().find(changes) {
                    Some(s) => Some(ReferenceResolution::Resolved(s.id)),
                    None if !has_region => {
                        let candidates: Vec<IntentRef> = history.iter().filter(changes).copied().collect();
                        Some(resolve_among(&candidates, text))
                    }
                    None => None,
                },
                _ => None,
            };
            (me.intent_type, to_structured(d, entities, resolution.as_ref(), me.id, request_id))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyAction {
    DeployCoreNetwork,
    ModifyCoreNetwork,
    AssurePerformance,
    GenerateReport,
    CheckFeasibility,
    SubscribeNotifications,
}

impl PolicyAction {
    pub fn for_type(t: IntentType) -> Self {
        match t {
            IntentType::Deployment => PolicyAction::DeployCoreNetwork,
            IntentType::Modification => PolicyAction::ModifyCoreNetwork,
            IntentType::PerformanceAssurance => PolicyAction::AssurePerformance,
            IntentType::IntentReportRequest => PolicyAction::GenerateReport,
            IntentType::IntentFeasibilityCheck => PolicyAction::CheckFeasibility,
            IntentType::RegularNotificationRequest => PolicyAction::SubscribeNotifications,
        }
    }

    pub fn intent_type(self) -> IntentType {
        match self {
            PolicyAction::DeployCoreNetwork => IntentType::Deployment,
            PolicyAction::ModifyCoreNetwork => IntentType::Modification,
            PolicyAction::AssurePerformance => IntentType::PerformanceAssurance,
            PolicyAction::GenerateReport => IntentType::IntentReportRequest,
            PolicyAction::CheckFeasibility => IntentType::IntentFeasibilityCheck,
            PolicyAction::SubscribeNotifications => IntentType::RegularNotificationRequest,
        }
    }
}

/// What a policy acts on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyTarget {
    Network { network_id: String },
    Region { region: String },
    Intent { intent_id: IntentId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamValue {
    Text(String),
    Duration(IsoDuration),
    Intent(IntentId),
}

/// Metrics a constraint can bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    CapacityUnits,
    RegisteredUsers,
    PduSessions,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::CapacityUnits => "capacity_units",
            Metric::RegisteredUsers => "registered_users",
            Metric::PduSessions => "pdu_sessions",
        }
    }

    pub fn for_attribute(a: Attribute) -> Option<Metric> {
        match a {
            Attribute::CapacityTarget => Some(Metric::CapacityUnits),
            Attribute::RegisteredUsersTarget => Some(Metric::RegisteredUsers),
            Attribute::PduSessionsTarget => Some(Metric::PduSessions),
            _ => None,
        }
    }

    pub fn attribute(self) -> Attribute {
        match self {
            Metric::CapacityUnits => Attribute::CapacityTarget,
            Metric::RegisteredUsers => Attribute::RegisteredUsersTarget,
            Metric::PduSessions => Attribute::PduSessionsTarget,
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub metric: Metric,
    pub comparator: Comparator,
    pub value: u64,
}

/// The machine-actionable form of one structured intent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDocument {
    pub policy_id: PolicyId,
    pub intent_id: IntentId,
    pub action: PolicyAction,
    pub target: PolicyTarget,
    pub parameters: BTreeMap<String, ParamValue>,
    pub constraints: Vec<Constraint>,
}

impl PolicyDocument {
    /// The attribute each part of the document came from, in document order:
    /// target, then parameters, then constraints.
    pub fn attribute_sources(&self) -> Vec<Attribute> {
        let mut out = vec![match self.target {
            PolicyTarget::Network { .. } => Attribute::NetworkId,
            PolicyTarget::Region { .. } => Attribute::Region,
            PolicyTarget::Intent { .. } => Attribute::SubjectIntent,
        }];
        out.extend(self.parameters.keys().filter_map(|k| attribute_named(k)));
        out.extend(self.constraints.iter().map(|c| c.metric.attribute()));
        out
    }
}

fn attribute_named(name: &str) -> Option<Attribute> {
    use Attribute::*;
    [
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
    ]
    .into_iter()
    .find(|a| a.name() == name)
}

/// The attribute a policy of this intent's shape is aimed at.
fn target_attribute(intent: &StructuredIntent) -> Attribute {
    use Attribute::*;
    let has = |a| intent.attributes.contains_key(&a);
    match intent.intent_type {
        IntentType::Deployment => Region,
        IntentType::Modification | IntentType::PerformanceAssurance => NetworkId,
        IntentType::IntentReportRequest => SubjectIntent,
        IntentType::IntentFeasibilityCheck if has(SubjectIntent) => SubjectIntent,
        IntentType::IntentFeasibilityCheck => Region,
        IntentType::RegularNotificationRequest if has(NetworkId) => NetworkId,
        IntentType::RegularNotificationRequest => SubjectIntent,
    }
}

/// Compiles a validated intent. Every attribute lands in exactly one of
/// target, parameters or constraints.
pub fn compile_policy(intent: &StructuredIntent, policy_id: PolicyId) -> PolicyDocument {
    let target_attr = target_attribute(intent);
    let target = match (target_attr, intent.get(target_attr)) {
        (Attribute::NetworkId, Some(AttrValue::Text(s))) => PolicyTarget::Network { network_id: s.clone() },
        (Attribute::Region, Some(AttrValue::Text(s))) => PolicyTarget::Region { region: s.clone() },
        (Attribute::SubjectIntent, Some(AttrValue::Intent(id))) => PolicyTarget::Intent { intent_id: *id },
        (a, v) => panic!("compile_policy on an unvalidated intent: {a} = {v:?}"),
    };
    let mut parameters = BTreeMap::new();
    let mut constraints = Vec::new();
    for (&attribute, value) in &intent.attributes {
        if attribute == target_attr {
            continue;
        }
        match (Metric::for_attribute(attribute), value) {
            (Some(metric), AttrValue::Target(b)) => {
                constraints.push(Constraint { metric, comparator: b.comparator, value: b.value })
            }
            (_, AttrValue::Text(s)) => {
                parameters.insert(attribute.name().to_string(), ParamValue::Text(s.clone()));
            }
            (_, AttrValue::Duration(d)) => {
                parameters.insert(attribute.name().to_string(), ParamValue::Duration(*d));
            }
            (_, AttrValue::Intent(id)) => {
                parameters.insert(attribute.name().to_string(), ParamValue::Intent(*id));
            }
            (None, AttrValue::Target(b)) => panic!("target value on non-metric attribute {attribute}: {b}"),
        }
    }
    PolicyDocument {
        policy_id,
        intent_id: intent.id,
        action: PolicyAction::for_type(intent.intent_type),
        target,
        parameters,
        constraints,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::extract_entities;
    use crate::ids::IdGenerator;
    use crate::model::Bound;
    use crate::time::LogicalTime;

    fn detected(t: IntentType) -> DetectedIntent {
        DetectedIntent::new(t, "test", Vec::new(), 1.0).unwrap()
    }

    fn structure(t: IntentType, text: &str, res: Option<&ReferenceResolution>) -> Result<StructuredIntent, TransformError> {
        let mut g = IdGenerator::new(1);
        to_structured(&detected(t), &extract_entities(text), res, g.intent_id(LogicalTime(0)), g.request_id(LogicalTime(0)))
    }

    fn structure_all(text: &str, types: &[IntentType], history: &[IntentRef]) -> Vec<StructuredIntent> {
        let outcome = ExtractionOutcome::intents(types.iter().map(|&t| detected(t)).collect()).unwrap();
        let mut g = IdGenerator::new(3);
        let request = g.request_id(LogicalTime(10));
        structure_request(&outcome, text, &extract_entities(text), history, || g.intent_id(LogicalTime(10)), request)
            .into_iter()
            .map(|(_, r)| r.unwrap())
            .collect()
    }

    #[test]
    fn same_request_references_prefer_the_new_intent() {
        let old = IntentRef { id: IdGenerator::new(9).intent_id(LogicalTime(0)), intent_type: IntentType::Deployment };
        let out = structure_all(
            "Deploy a new network in RegionA. Also, notify me of its status every 5 minutes.",
            &[IntentType::Deployment, IntentType::RegularNotificationRequest],
            &[old],
        );
        assert_eq!(out[1].subject_intent(), Some(out[0].id));

        let out = structure_all(
            "Deploy a new network in RegionB and summarize the previous request.",
            &[IntentType::Deployment, IntentType::IntentReportRequest],
            &[old],
        );
        assert_eq!(out[1].subject_intent(), Some(old.id));
    }

    #[test]
    fn feasibility_checks_the_sibling_change() {
        let out = structure_all(
            "Deploy a new network in RegionB. Before proceeding, ensure that capacity exists in RegionB.",
            &[IntentType::Deployment, IntentType::IntentFeasibilityCheck],
            &[],
        );
        assert_eq!(out[1].subject_intent(), Some(out[0].id));
        let out = structure_all("Is it possible to add 2 capacity units in RegionA?", &[IntentType::IntentFeasibilityCheck], &[]);
        assert_eq!(out[0].subject_intent(), None);
        assert_eq!(out[0].text(Attribute::Region), Some("RegionA"));
    }

    #[test]
    fn deployment_takes_the_region() {
        let i = structure(IntentType::Deployment, "Deploy a new network in RegionA", None).unwrap();
        assert_eq!(i.attributes.len(), 1);
        assert_eq!(i.text(Attribute::Region), Some("RegionA"));
    }

    #[test]
    fn report_takes_the_resolution() {
        let d1 = IdGenerator::new(9).intent_id(LogicalTime(0));
        let i = structure(
            IntentType::IntentReportRequest,
            "Summarize the results of the previous request.",
            Some(&ReferenceResolution::Resolved(d1)),
        )
        .unwrap();
        assert_eq!(i.subject_intent(), Some(d1));
        assert_eq!(
            structure(
                IntentType::IntentReportRequest,
                "Summarize the results of the previous request.",
                Some(&ReferenceResolution::Unresolved("no prior request in session".into()))
            ),
            Err(TransformError::MissingAttribute("subject_intent".into()))
        );
    }

    #[test]
    fn required_attributes() {
        assert_eq!(
            structure(IntentType::Deployment, "Deploy a network", None),
            Err(TransformError::MissingAttribute("region".into()))
        );
        assert_eq!(
            structure(IntentType::Modification, "Modify the network in RegionB", None),
            Err(TransformError::MissingAttribute("network_id".into()))
        );
        assert_eq!(
            structure(IntentType::PerformanceAssurance, "Make sure net-2 performs well", None),
            Err(TransformError::MissingAttribute("performance_target".into()))
        );
        assert_eq!(
            structure(IntentType::RegularNotificationRequest, "Notify me every hour", None),
            Err(TransformError::MissingAttribute("subject".into()))
        );
        assert_eq!(
            structure(IntentType::IntentFeasibilityCheck, "Is it feasible?", None),
            Err(TransformError::MissingAttribute("subject".into()))
        );
    }

    #[test]
    fn feasibility_from_region_alone() {
        let i = structure(
            IntentType::IntentFeasibilityCheck,
            "Before proceeding, ensure that capacity exists in RegionC to perform the required changes.",
            None,
        )
        .unwrap();
        assert_eq!(i.text(Attribute::Region), Some("RegionC"));
    }

    #[test]
    fn notification_defaults_frequency() {
        let i = structure(IntentType::RegularNotificationRequest, "notify me of the status of net-3", None).unwrap();
        assert_eq!(i.get(Attribute::Frequency), Some(&AttrValue::Duration(IsoDuration::from_mins(15))));
        assert_eq!(i.assumed_defaults.len(), 1);
    }

    #[test]
    fn deployment_policy() {
        let i = structure(IntentType::Deployment, "Deploy a new network in RegionA", None).unwrap();
        let p = compile_policy(&i, IdGenerator::new(2).policy_id(LogicalTime(0)));
        assert_eq!(p.action, PolicyAction::DeployCoreNetwork);
        assert_eq!(p.target, PolicyTarget::Region { region: "RegionA".into() });
        assert!(p.parameters.is_empty() && p.constraints.is_empty());
    }

    #[test]
    fn assurance_policy_constraints() {
        let i = structure(IntentType::PerformanceAssurance, "ensure net-3 can support 5000 registered users", None).unwrap();
        let p = compile_policy(&i, IdGenerator::new(2).policy_id(LogicalTime(0)));
        assert_eq!(
            p.constraints,
            vec![Constraint { metric: Metric::RegisteredUsers, comparator: Comparator::AtLeast, value: 5000 }]
        );
        assert_eq!(p.parameters.get("evaluation_window"), Some(&ParamValue::Duration(IsoDuration::from_mins(5))));
        assert_eq!(i.target(Attribute::RegisteredUsersTarget), Some(Bound::at_least(5000)));
    }

    #[test]
    fn compile_is_deterministic_modulo_policy_id() {
        let i = structure(IntentType::Modification, "Scale net-4 to 6 capacity units in RegionB", None).unwrap();
        let mut g = IdGenerator::new(5);
        let a = compile_policy(&i, g.policy_id(LogicalTime(0)));
        let b = compile_policy(&i, g.policy_id(LogicalTime(0)));
        assert_ne!(a.policy_id, b.policy_id);
        assert_eq!(PolicyDocument { policy_id: a.policy_id, ..b }, a);
    }

    #[test]
    fn action_is_a_bijection() {
        let actions: std::collections::BTreeSet<_> = IntentType::ALL.iter().map(|&t| PolicyAction::for_type(t)).collect();
        assert_eq!(actions.len(), 6);
        for t in IntentType::ALL {
            assert_eq!(PolicyAction::for_type(t).intent_type(), t);
        }
    }
}
