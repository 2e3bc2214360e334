//! Contradictory targets and modify-during-deploy.

use serde::{Deserialize, Serialize};

use super::{FulfilmentStatus, IntentRecord};
use crate::ids::IntentId;
use crate::model::{Attribute, Bound, Comparator, IntentType, StructuredIntent};
use crate::transform::Metric;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Conflict {
    pub intent_id: IntentId,
    pub reason: String,
}

/// Closed integer interval a bound admits.
pub fn interval(b: Bound) -> (u64, u64) {
    match b.comparator {
        Comparator::AtLeast => (b.value, u64::MAX),
        Comparator::AtMost => (0, b.value),
        Comparator::Exactly => (b.value, b.value),
    }
}

/// Whether some value satisfies both bounds.
pub fn compatible(a: Bound, b: Bound) -> bool {
    let (lo1, hi1) = interval(a);
    let (lo2, hi2) = interval(b);
    lo1.max(lo2) <= hi1.min(hi2)
}

fn assurance_targets(i: &StructuredIntent) -> Vec<(Metric, Bound)> {
    [Attribute::RegisteredUsersTarget, Attribute::PduSessionsTarget]
        .into_iter()
        .filter_map(|a| Some((Metric::for_attribute(a)?, i.target(a)?)))
        .collect()
}

/// Live records that `new` contradicts: assurance targets on the same
/// network and metric with no common value, or a modification aimed at a
/// network still being deployed.
pub fn detect_conflicts<'a>(
    new: &StructuredIntent,
    active: impl IntoIterator<Item = &'a IntentRecord>,
) -> Vec<Conflict> {
    let network = new.text(Attribute::NetworkId);
    let mut out = Vec::new();
    for rec in active {
        if rec.id() == new.id || !rec.status().is_live() {
            continue;
        }
        let other = &rec.intent;
        match (new.intent_type, other.intent_type) {
            (IntentType::PerformanceAssurance, IntentType::PerformanceAssurance)
                if network.is_some() && network == other.text(Attribute::NetworkId) =>
            {
                for (metric, mine) in assurance_targets(new) {
                    for (m, theirs) in assurance_targets(other) {
                        if m == metric && !compatible(mine, theirs) {
                            out.push(Conflict {
                                intent_id: rec.id(),
                                reason: format!("{metric} {mine} contradicts {metric} {theirs}"),
                            });
                        }
                    }
                }
            }
            (IntentType::Modification, IntentType::Deployment)
                if rec.status() == FulfilmentStatus::InProgress
                    && network.is_some()
                    && rec.network_id.as_deref() == network =>
            {
                out.push(Conflict {
                    intent_id: rec.id(),
                    reason: format!("{} is still being deployed", network.unwrap_or_default()),
                });
            }
            _ => {}
        }
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_bound() -> impl Strategy<Value = Bound> {
        (0u8..3, 0u64..40).prop_map(|(c, v)| Bound {
            comparator: [Comparator::AtLeast, Comparator::AtMost, Comparator::Exactly][c as usize],
            value: v,
        })
    }

    proptest! {
        #[test]
        fn interval_intersection_matches_enumeration(a in arb_bound(), b in arb_bound()) {
            // values above 40 satisfy any pair of lower bounds, so 0..=41 decides
            let witness = (0..=41u64).any(|x| a.holds(x) && b.holds(x));
            prop_assert_eq!(compatible(a, b), witness);
        }
    }
}
