//! Capacity arithmetic for deployments, modifications and explicit checks.

use serde::{Deserialize, Serialize};

use super::inventory::Inventory;
use super::ExecutionError;
use crate::model::{Attribute, IntentType, StructuredIntent};

/// Units assumed when a request names no capacity.
pub const DEFAULT_UNITS: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Feasible,
    Infeasible,
}

/// Invariant: `verdict == Feasible` exactly when `required_units <= available_units`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityResult {
    pub verdict: Verdict,
    pub required_units: u64,
    pub available_units: u64,
    pub detail: String,
}

impl FeasibilityResult {
    pub fn new(required_units: u64, available_units: u64, detail: String) -> Self {
        let verdict = if required_units <= available_units { Verdict::Feasible } else { Verdict::Infeasible };
        FeasibilityResult { verdict, required_units, available_units, detail }
    }

    pub fn is_feasible(&self) -> bool {
        self.verdict == Verdict::Feasible
    }
}

/// Units a request needs in a region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Demand {
    pub region: String,
    pub required_units: u64,
    pub what: String,
}

fn requested_units(intent: &StructuredIntent) -> Option<u64> {
    intent.target(Attribute::CapacityTarget).map(|b| b.value)
}

/// What executing `intent` would take from the inventory; `None` for
/// intent types that consume no capacity.
pub fn demand(intent: &StructuredIntent, inv: &Inventory) -> Result<Option<Demand>, ExecutionError> {
    let region_attr = intent.text(Attribute::Region).map(str::to_string);
    Ok(Some(match intent.intent_type {
        IntentType::Deployment | IntentType::IntentFeasibilityCheck => {
            let Some(region) = region_attr else {
                return Ok(None);
            };
            let units = requested_units(intent).unwrap_or(DEFAULT_UNITS);
            Demand { what: format!("{units} unit(s) in {region}"), region, required_units: units }
        }
        IntentType::Modification => {
            let id = intent.text(Attribute::NetworkId).unwrap_or_default();
            let net = inv.network(id)?;
            let units = requested_units(intent).unwrap_or(net.capacity_units);
            match region_attr.filter(|r| *r != net.region) {
                Some(region) => Demand {
                    what: format!("moving {id} ({units} unit(s)) to {region}"),
                    region,
                    required_units: units,
                },
                None => {
                    let extra = units.saturating_sub(net.capacity_units);
                    Demand {
                        what: format!("{extra} additional unit(s) for {id} in {}", net.region),
                        region: net.region.clone(),
                        required_units: extra,
                    }
                }
            }
        }
        _ => return Ok(None),
    }))
}

pub fn assess(d: &Demand, inv: &Inventory) -> Result<FeasibilityResult, ExecutionError> {
    let available = inv.available(&d.region)?;
    let verdict = if d.required_units <= available { "fits" } else { "does not fit" };
    Ok(FeasibilityResult::new(
        d.required_units,
        available,
        format!("{} {verdict}: {available} unit(s) free in {}", d.what, d.region),
    ))
}

/// Whether `intent` fits the inventory. Intents that consume no capacity
/// are trivially feasible.
pub fn check_feasibility(intent: &StructuredIntent, inv: &Inventory) -> Result<FeasibilityResult, ExecutionError> {
    match demand(intent, inv)? {
        Some(d) => assess(&d, inv),
        None => Ok(FeasibilityResult::new(0, 0, "no capacity required".into())),
    }
}
