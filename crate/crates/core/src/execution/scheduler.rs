//! Periodic notification subscriptions under the logical clock.

use serde::{Deserialize, Serialize};

use super::inventory::NetworkStatus;
use super::FulfilmentStatus;
use crate::ids::IntentId;
use crate::time::{IsoDuration, LogicalTime};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Subject {
    Network { network_id: String },
    Intent { intent_id: IntentId },
}

/// Successive fire times differ by exactly `frequency`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotificationSubscription {
    /// The notification intent that created it.
    pub id: IntentId,
    pub subject: Subject,
    pub frequency: IsoDuration,
    pub next_fire: LogicalTime,
    pub active: bool,
}

impl NotificationSubscription {
    pub fn new(id: IntentId, subject: Subject, frequency: IsoDuration, created: LogicalTime) -> Self {
        assert!(!frequency.is_zero(), "subscription frequency must be positive");
        NotificationSubscription { id, subject, frequency, next_fire: created + frequency, active: true }
    }

    /// Every fire time at or before `now`, advancing `next_fire` past `now`.
    pub fn due(&mut self, now: LogicalTime) -> Vec<LogicalTime> {
        let mut fired = Vec::new();
        if !self.active {
            return fired;
        }
        while self.next_fire <= now {
            fired.push(self.next_fire);
            self.next_fire = self.next_fire + self.frequency;
        }
        fired
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubjectStatus {
    Network { network_id: String, status: Option<NetworkStatus> },
    Intent { intent_id: IntentId, status: Option<FulfilmentStatus> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub subscription_id: IntentId,
    pub fired_at: LogicalTime,
    pub subject: SubjectStatus,
    pub message: String,
}
