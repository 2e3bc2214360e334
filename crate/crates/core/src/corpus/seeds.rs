//! Hand-written seed requests.
//!
//! Single-intent seeds fill in the canonical request template of each
//! intent type; the rest are compound requests and negatives.

use super::{LabeledExample, Sentinel};
use crate::model::IntentType::{self, *};

/// Bumped whenever a seed is added, removed or edited.
pub const SEEDS_VERSION: &str = "1";

const SINGLE: &[(&str, &str, &[IntentType])] = &[
    ("deploy-1", "Deploy a new network in RegionA with the following specifications: 4 capacity units and PLMN 001-01.", &[Deployment]),
    ("deploy-2", "Deploy a new network in RegionC for an eMBB service.", &[Deployment]),
    ("deploy-3", "Please spin up a new 5G core in RegionB with 2 capacity units.", &[Deployment]),
    ("modify-1", "Modify the existing net-1 to address the performance issues caused by high loading.", &[Modification]),
    ("modify-2", "Modify net-3 by removing the UPF instance from RegionB.", &[Modification]),
    ("modify-3", "Scale up net-2 to 5 capacity units.", &[Modification]),
    ("assure-1", "Ensure that the deployed network can support a URLLC application with the following requirements: net-3 must support 2000 registered users.", &[PerformanceAssurance]),
    ("assure-2", "Guarantee that net-1 can handle at least 1500 PDU sessions.", &[PerformanceAssurance]),
    ("assure-3", "Make sure net-2 is able to support 900 registered users.", &[PerformanceAssurance]),
    ("report-1", "Summarize the results of the previous request.", &[IntentReportRequest]),
    ("report-2", "What is the status of the network creation intent?", &[IntentReportRequest]),
    ("report-3", "Give me a report on the last request.", &[IntentReportRequest]),
    ("feasible-1", "Before proceeding, ensure that capacity exists in RegionC to perform the required changes.", &[IntentFeasibilityCheck]),
    ("feasible-2", "Check whether it is feasible to add 3 capacity units in RegionD.", &[IntentFeasibilityCheck]),
    ("feasible-3", "Is there enough capacity in RegionB for 2 more capacity units?", &[IntentFeasibilityCheck]),
    ("notify-1", "Notify me of the status of net-3 every 10 minutes.", &[RegularNotificationRequest]),
    ("notify-2", "Send me updates on net-1 every hour.", &[RegularNotificationRequest]),
    ("notify-3", "Keep me posted on net-2 every 30 minutes.", &[RegularNotificationRequest]),
];

const COMPOUND: &[(&str, &str, &[IntentType])] = &[
    ("compound-1", "Modify net-3 by removing the AMF instance from RegionB, ensure that it can support 5000 registered users, and notify me of its status.", &[Modification, PerformanceAssurance, RegularNotificationRequest]),
    ("compound-2", "Deploy a new network in RegionB. Before proceeding, ensure that capacity exists in RegionB.", &[Deployment, IntentFeasibilityCheck]),
    ("compound-3", "Summarize the results of the previous request and notify me of the status of net-2 every 30 minutes.", &[IntentReportRequest, RegularNotificationRequest]),
    ("compound-4", "Scale up net-1 to 6 capacity units and guarantee that it can support 5000 registered users.", &[Modification, PerformanceAssurance]),
    ("compound-5", "Deploy a new network in RegionA for a URLLC service and make sure it can support 1000 registered users.", &[Deployment, PerformanceAssurance]),
];

const NONE: &[(&str, &str)] = &[
    ("none-1", "What is the capital of France?"),
    ("none-2", "How are you doing today?"),
    ("none-3", "Tell me a joke about routers."),
    ("none-4", "What does the acronym AMF stand for?"),
];

const UNKNOWN: &[(&str, &str)] = &[
    ("unknown-1", "Order me a pizza with extra cheese."),
    ("unknown-2", "Restart my home router."),
    ("unknown-3", "Book a flight to Paris for next Monday."),
    ("unknown-4", "Please translate this paragraph into German."),
];

/// The bundled seed set in a fixed order.
pub fn seed_examples() -> Vec<LabeledExample> {
    let mut out: Vec<LabeledExample> = SINGLE
        .iter()
        .chain(COMPOUND)
        .map(|(id, text, labels)| LabeledExample::seed(id, text, labels))
        .collect();
    out.extend(NONE.iter().map(|(id, text)| LabeledExample::negative(id, text, Sentinel::NoIntentPresent)));
    out.extend(UNKNOWN.iter().map(|(id, text)| LabeledExample::negative(id, text, Sentinel::UnknownIntent)));
    out
}
