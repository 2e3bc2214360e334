//! Per-intent status reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Conflict, ExecutionError, FeasibilityResult, FulfilmentStatus, IntentRecord};
use crate::canonical;
use crate::ids::IntentId;
use crate::model::{Bound, IntentType};
use crate::time::LogicalTime;
use crate::transform::Metric;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: Metric,
    pub target: Option<Bound>,
    pub achieved: Option<u64>,
    /// `None` when there is no target or nothing measured yet.
    pub met: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeasibilitySection {
    NotApplicable,
    Checked { result: FeasibilityResult },
}

/// The four report sections plus identification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub intent_id: IntentId,
    pub intent_type: IntentType,
    pub generated_at: LogicalTime,
    pub achieved_vs_target: Vec<MetricRow>,
    pub feasibility: FeasibilitySection,
    pub conflicts: Vec<Conflict>,
    pub status: FulfilmentStatus,
}

/// Builds the report for `record` as of `now`.
pub fn report_for(record: &IntentRecord, now: LogicalTime) -> Report {
    let f = &record.fulfilment;
    let mut metrics: Vec<Metric> = f.targets.keys().chain(f.achieved.keys()).copied().collect();
    metrics.sort();
    metrics.dedup();
    let achieved_vs_target = metrics
        .into_iter()
        .map(|metric| {
            let target = f.targets.get(&metric).copied();
            let achieved = f.achieved.get(&metric).copied();
            let met = match (target, achieved) {
                (Some(t), Some(a)) => Some(t.holds(a)),
                _ => None,
            };
            MetricRow { metric, target, achieved, met }
        })
        .collect();
    Report {
        intent_id: record.id(),
        intent_type: record.intent.intent_type,
        generated_at: now,
        achieved_vs_target,
        feasibility: match &f.feasibility {
            Some(result) => FeasibilitySection::Checked { result: result.clone() },
            None => FeasibilitySection::NotApplicable,
        },
        conflicts: f.conflicts.clone(),
        status: f.status,
    }
}

/// Looks `subject` up in `records` and reports on it.
pub fn generate_report<'a>(
    subject: IntentId,
    mut records: impl FnMut(IntentId) -> Option<&'a IntentRecord>,
    now: LogicalTime,
) -> Result<Report, ExecutionError> {
    records(subject)
        .map(|r| report_for(r, now))
        .ok_or(ExecutionError::UnknownIntent(subject))
}

impl Report {
    pub fn to_json(&self) -> String {
        canonical::to_string(self).expect("reports serialize")
    }

    /// Plain-text rendering with one heading per section.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Report for {} ({}) at t={}", self.intent_type, self.intent_id, self.generated_at);
        s.push_str("\nAchieved vs. target\n");
        if self.achieved_vs_target.is_empty() {
            s.push_str("  (nothing measured)\n");
        }
        for row in &self.achieved_vs_target {
            let target = row.target.map_or("-".to_string(), |b| b.to_string());
            let achieved = row.achieved.map_or("-".to_string(), |a| a.to_string());
            let met = match row.met {
                Some(true) => "met",
                Some(false) => "not met",
                None => "n/a",
            };
            let _ = writeln!(s, "  {:<18} target {:<10} achieved {:<8} {met}", row.metric.name(), target, achieved);
        }
        s.push_str("\nFeasibility\n");
        match &self.feasibility {
            FeasibilitySection::NotApplicable => s.push_str("  not applicable\n"),
            FeasibilitySection::Checked { result } => {
                let _ = writeln!(
                    s,
                    "  {:?}: {} required, {} available ({})",
                    result.verdict, result.required_units, result.available_units, result.detail
                );
            }
        }
        s.push_str("\nConflicts\n");
        if self.conflicts.is_empty() {
            s.push_str("  none\n");
        }
        for c in &self.conflicts {
            let _ = writeln!(s, "  {}: {}", c.intent_id, c.reason);
        }
        let _ = write!(s, "\nStatus\n  {}\n", self.status);
        s
    }
}
