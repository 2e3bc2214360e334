//! Request execution against a simulated core network.
//!
//! All state lives in an [`Engine`], which is mutated only through
//! [`Command`]s. Replaying the same commands against the same starting
//! inventory reproduces the same state bit for bit.

pub mod conflicts;
pub mod engine;
pub mod feasibility;
pub mod inventory;
pub mod report;
pub mod scheduler;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::IntentId;
use crate::model::{Bound, StructuredIntent};
use crate::time::LogicalTime;
use crate::transform::{Metric, PolicyDocument};

pub use conflicts::{detect_conflicts, Conflict};
pub use engine::{Command, Engine, EngineEvent};
pub use feasibility::{check_feasibility, FeasibilityResult, Verdict};
pub use inventory::{Inventory, NetworkRecord, NetworkStatus};
pub use report::{generate_report, Report};
pub use scheduler::{Notification, NotificationSubscription, Subject, SubjectStatus};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecutionError {
    #[error("UnknownNetwork: {0}")]
    UnknownNetwork(String),
    #[error("UnknownRegion: {0}")]
    UnknownRegion(String),
    #[error("UnknownIntent: {0}")]
    UnknownIntent(IntentId),
    #[error("intent {0} is already recorded")]
    DuplicateIntent(IntentId),
    #[error("intent {0} is not pending")]
    NotPending(IntentId),
    #[error("clock moved backwards from {last} to {now}")]
    ClockWentBackwards { last: LogicalTime, now: LogicalTime },
    #[error("invalid inventory: {0}")]
    Inventory(String),
    #[error("invalid observation: {0}")]
    Observation(String),
    #[error("cannot replay event: {0}")]
    Replay(String),
}

impl ExecutionError {
    /// Short machine-readable reason stored on failed records.
    pub fn code(&self) -> &'static str {
        match self {
            ExecutionError::UnknownNetwork(_) => "UnknownNetwork",
            ExecutionError::UnknownRegion(_) => "UnknownRegion",
            ExecutionError::UnknownIntent(_) => "UnknownIntent",
            ExecutionError::DuplicateIntent(_) => "DuplicateIntent",
            ExecutionError::NotPending(_) => "NotPending",
            ExecutionError::ClockWentBackwards { .. } => "ClockWentBackwards",
            ExecutionError::Inventory(_) => "Inventory",
            ExecutionError::Observation(_) => "Observation",
            ExecutionError::Replay(_) => "Replay",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FulfilmentStatus {
    Pending,
    Infeasible,
    InProgress,
    Fulfilled,
    Degraded,
    Failed,
}

impl FulfilmentStatus {
    /// The lifecycle graph. Self-loops are not transitions.
    pub fn can_become(self, to: FulfilmentStatus) -> bool {
        use FulfilmentStatus::*;
        matches!(
            (self, to),
            (Pending, Infeasible | InProgress | Failed | Fulfilled)
                | (InProgress, Fulfilled | Degraded | Failed)
                | (Degraded, Fulfilled)
                | (Fulfilled, Degraded)
        )
    }

    /// Still able to change or to affect other intents.
    pub fn is_live(self) -> bool {
        !matches!(self, FulfilmentStatus::Infeasible | FulfilmentStatus::Failed)
    }
}

impl std::fmt::Display for FulfilmentStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FulfilmentInfo {
    pub status: FulfilmentStatus,
    pub achieved: BTreeMap<Metric, u64>,
    pub targets: BTreeMap<Metric, Bound>,
    pub conflicts: Vec<Conflict>,
    pub feasibility: Option<FeasibilityResult>,
    pub reason: Option<String>,
}

impl FulfilmentInfo {
    pub fn pending() -> Self {
        FulfilmentInfo {
            status: FulfilmentStatus::Pending,
            achieved: BTreeMap::new(),
            targets: BTreeMap::new(),
            conflicts: Vec::new(),
            feasibility: None,
            reason: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: FulfilmentStatus,
    pub to: FulfilmentStatus,
    pub at: LogicalTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentRecord {
    pub intent: StructuredIntent,
    pub policy: PolicyDocument,
    pub fulfilment: FulfilmentInfo,
    /// Network the intent created or acts on, once known.
    pub network_id: Option<String>,
    /// Attached to report requests when they execute.
    pub report: Option<Report>,
    pub transitions: Vec<Transition>,
    pub created_at: LogicalTime,
    pub updated_at: LogicalTime,
}

impl IntentRecord {
    pub fn new(intent: StructuredIntent, policy: PolicyDocument, now: LogicalTime) -> Self {
        IntentRecord {
            intent,
            policy,
            fulfilment: FulfilmentInfo::pending(),
            network_id: None,
            report: None,
            transitions: Vec::new(),
            created_at: now,
            updated_at: now,
        }
    }

    pub fn id(&self) -> IntentId {
        self.intent.id
    }

    pub fn status(&self) -> FulfilmentStatus {
        self.fulfilment.status
    }

    /// Moves to `to`. Panics on an edge outside the lifecycle graph.
    pub(crate) fn transition(&mut self, to: FulfilmentStatus, at: LogicalTime) -> Option<Transition> {
        let from = self.fulfilment.status;
        if from == to {
            return None;
        }
        assert!(from.can_become(to), "illegal transition {from} -> {to} for {}", self.intent.id);
        assert!(at >= self.updated_at, "record time moved backwards");
        self.fulfilment.status = to;
        self.updated_at = at;
        let t = Transition { from, to, at };
        self.transitions.push(t);
        Some(t)
    }
}

#[cfg(test)]
mod tests {
    use super::FulfilmentStatus::*;

    #[test]
    fn lifecycle_edges() {
        let all = [Pending, Infeasible, InProgress, Fulfilled, Degraded, Failed];
        let legal = [
            (Pending, Infeasible),
            (Pending, InProgress),
            (Pending, Failed),
            (Pending, Fulfilled),
            (InProgress, Fulfilled),
            (InProgress, Degraded),
            (InProgress, Failed),
            (Degraded, Fulfilled),
            (Fulfilled, Degraded),
        ];
        for a in all {
            for b in all {
                assert_eq!(a.can_become(b), legal.contains(&(a, b)), "{a} -> {b}");
            }
        }
    }
}
