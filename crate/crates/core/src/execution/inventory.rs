//! Simulated core-network inventory.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExecutionError;

/// Users one capacity unit can register.
pub const USERS_PER_UNIT: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NetworkStatus {
    Active,
    Deploying,
    Degraded,
    Decommissioned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub id: String,
    pub region: String,
    pub network_type: String,
    pub plmn_id: Option<String>,
    pub capacity_units: u64,
    pub registered_users: u64,
    pub max_users: u64,
    pub pdu_sessions: u64,
    pub status: NetworkStatus,
}

impl NetworkRecord {
    pub fn holds_capacity(&self) -> bool {
        self.status != NetworkStatus::Decommissioned
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Inventory {
    pub networks: BTreeMap<String, NetworkRecord>,
    pub region_capacity: BTreeMap<String, u64>,
}

const BUNDLED: &str = include_str!("../../data/inventory.json");

impl Inventory {
    /// The demo inventory shipped in `data/`.
    pub fn bundled() -> Self {
        Inventory::from_json(BUNDLED).expect("bundled inventory is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ExecutionError> {
        let inv: Inventory =
            serde_json::from_str(text).map_err(|e| ExecutionError::Inventory(e.to_string()))?;
        inv.check()?;
        Ok(inv)
    }

    pub fn load(path: &Path) -> Result<Self, ExecutionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExecutionError::Inventory(format!("{}: {e}", path.display())))?;
        Inventory::from_json(&text)
    }

    /// Units held by live networks in `region`.
    pub fn allocated(&self, region: &str) -> u64 {
        self.networks
            .values()
            .filter(|n| n.region == region && n.holds_capacity())
            .map(|n| n.capacity_units)
            .sum()
    }

    /// Free units in `region`, or `UnknownRegion`.
    pub fn available(&self, region: &str) -> Result<u64, ExecutionError> {
        let total = *self
            .region_capacity
            .get(region)
            .ok_or_else(|| ExecutionError::UnknownRegion(region.to_string()))?;
        Ok(total.saturating_sub(self.allocated(region)))
    }

    pub fn network(&self, id: &str) -> Result<&NetworkRecord, ExecutionError> {
        self.networks.get(id).ok_or_else(|| ExecutionError::UnknownNetwork(id.to_string()))
    }

    /// `net-N` with N one past the largest numeric suffix in use.
    pub fn next_network_id(&self) -> String {
        let max = self
            .networks
            .keys()
            .filter_map(|k| k.strip_prefix("net-").and_then(|n| n.parse::<u64>().ok()))
            .max()
            .unwrap_or(0);
        format!("net-{}", max + 1)
    }

    /// Capacity conservation per region and the per-network user bound.
    pub fn check(&self) -> Result<(), ExecutionError> {
        for (id, n) in &self.networks {
            if *id != n.id {
                return Err(ExecutionError::Inventory(format!("network keyed {id} has id {}", n.id)));
            }
            if n.registered_users > n.max_users {
                return Err(ExecutionError::Inventory(format!(
                    "{id}: {} registered users exceed max {}",
                    n.registered_users, n.max_users
                )));
            }
            if !self.region_capacity.contains_key(&n.region) {
                return Err(ExecutionError::UnknownRegion(n.region.clone()));
            }
        }
        for (region, total) in &self.region_capacity {
            let used = self.allocated(region);
            if used > *total {
                return Err(ExecutionError::Inventory(format!(
                    "{region}: {used} units allocated of {total}"
                )));
            }
        }
        Ok(())
    }
}
