//! The single mutation point for execution state.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::conflicts::detect_conflicts;
use super::feasibility::{assess, check_feasibility, demand, DEFAULT_UNITS};
use super::inventory::{Inventory, NetworkRecord, NetworkStatus, USERS_PER_UNIT};
use super::report::Report;
use super::scheduler::{Notification, NotificationSubscription, Subject, SubjectStatus};
use super::{ExecutionError, FeasibilityResult, FulfilmentStatus, IntentRecord, Transition};
use crate::context::events::{Event, EventKind};
use crate::ids::IntentId;
use crate::model::{Attribute, IntentType, StructuredIntent};
use crate::time::{IsoDuration, LogicalTime};
use crate::transform::{Metric, PolicyDocument};

/// Network type recorded when a deployment names none.
pub const DEFAULT_NETWORK_TYPE: &str = "5GC";

/// Every way execution state can change.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Records a pending intent; conflicts are detected here.
    Submit { at: LogicalTime, intent: StructuredIntent, policy: PolicyDocument },
    /// Runs a pending intent.
    Execute { at: LogicalTime, intent_id: IntentId },
    /// Advances the clock: finishes deployments, re-evaluates monitors, fires notifications.
    Tick { at: LogicalTime },
    /// Load reported by a network.
    Observe { at: LogicalTime, network_id: String, registered_users: u64, pdu_sessions: u64 },
    /// Stops a subscription from firing.
    Cancel { at: LogicalTime, subscription_id: IntentId },
}

impl Command {
    pub fn at(&self) -> LogicalTime {
        match self {
            Command::Submit { at, .. }
            | Command::Execute { at, .. }
            | Command::Tick { at }
            | Command::Observe { at, .. }
            | Command::Cancel { at, .. } => *at,
        }
    }

    /// The event-log kind a command is recorded under.
    pub fn event_kind(&self) -> EventKind {
        match self {
            Command::Submit { .. } => EventKind::IntentSubmitted,
            Command::Execute { .. } => EventKind::IntentExecuted,
            Command::Tick { .. } => EventKind::Tick,
            Command::Observe { .. } => EventKind::NetworkObserved,
            Command::Cancel { .. } => EventKind::SubscriptionCancelled,
        }
    }

    /// The command carried by a log event, or `None` for session events.
    pub fn from_event(event: &Event) -> Result<Option<Command>, ExecutionError> {
        match event.event_kind {
            EventKind::SessionCreated | EventKind::RequestRecorded => Ok(None),
            kind => {
                let c: Command = serde_json::from_value(event.payload.clone())
                    .map_err(|e| ExecutionError::Replay(e.to_string()))?;
                if c.event_kind() != kind {
                    return Err(ExecutionError::Replay(format!("{kind:?} event carries a {:?} command", c.event_kind())));
                }
                Ok(Some(c))
            }
        }
    }
}

/// What a command changed, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EngineEvent {
    IntentTransition {
        intent_id: IntentId,
        intent_type: IntentType,
        from: FulfilmentStatus,
        to: FulfilmentStatus,
        at: LogicalTime,
        reason: Option<String>,
    },
    NetworkUpdated { at: LogicalTime, network: NetworkRecord },
    Notification { notification: Notification },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Engine {
    now: LogicalTime,
    inventory: Inventory,
    records: BTreeMap<IntentId, IntentRecord>,
    subscriptions: BTreeMap<IntentId, NotificationSubscription>,
}

impl Engine {
    pub fn new(inventory: Inventory, start: LogicalTime) -> Self {
        Engine { now: start, inventory, records: BTreeMap::new(), subscriptions: BTreeMap::new() }
    }

    /// Rebuilds an engine by applying every command found in `events`.
    pub fn replay<'a>(
        inventory: Inventory,
        start: LogicalTime,
        events: impl IntoIterator<Item = &'a Event>,
    ) -> Result<Engine, ExecutionError> {
        let mut engine = Engine::new(inventory, start);
        for event in events {
            if let Some(command) = Command::from_event(event)? {
                engine.apply(&command)?;
            }
        }
        Ok(engine)
    }

    pub fn now(&self) -> LogicalTime {
        self.now
    }

    pub fn inventory(&self) -> &Inventory {
        &self.inventory
    }

    pub fn record(&self, id: IntentId) -> Option<&IntentRecord> {
        self.records.get(&id)
    }

    pub fn records(&self) -> impl Iterator<Item = &IntentRecord> {
        self.records.values()
    }

    pub fn subscriptions(&self) -> impl Iterator<Item = &NotificationSubscription> {
        self.subscriptions.values()
    }

    pub fn subscription(&self, id: IntentId) -> Option<&NotificationSubscription> {
        self.subscriptions.get(&id)
    }

    pub fn report(&self, subject: IntentId, now: LogicalTime) -> Result<Report, ExecutionError> {
        super::report::generate_report(subject, |id| self.records.get(&id), now)
    }

    /// Applies one command. On error nothing has changed.
    pub fn apply(&mut self, command: &Command) -> Result<Vec<EngineEvent>, ExecutionError> {
        let at = command.at();
        if at < self.now {
            return Err(ExecutionError::ClockWentBackwards { last: self.now, now: at });
        }
        let events = match command {
            Command::Submit { intent, policy, .. } => {
                self.submit(intent.clone(), policy.clone(), at)?;
                Vec::new()
            }
            Command::Execute { intent_id, .. } => self.execute(*intent_id, at)?,
            Command::Tick { .. } => self.tick(at),
            Command::Observe { network_id, registered_users, pdu_sessions, .. } => {
                self.observe(network_id, *registered_users, *pdu_sessions, at)?
            }
            Command::Cancel { subscription_id, .. } => {
                self.subscriptions
                    .get_mut(subscription_id)
                    .ok_or(ExecutionError::UnknownIntent(*subscription_id))?
                    .active = false;
                Vec::new()
            }
        };
        self.now = at;
        debug_assert!(self.inventory.check().is_ok(), "inventory invariant broken");
        Ok(events)
    }

    fn submit(&mut self, intent: StructuredIntent, policy: PolicyDocument, at: LogicalTime) -> Result<(), ExecutionError> {
        if self.records.contains_key(&intent.id) {
            return Err(ExecutionError::DuplicateIntent(intent.id));
        }
        let conflicts = detect_conflicts(&intent, self.records.values());
        let mut record = IntentRecord::new(intent, policy, at);
        record.fulfilment.conflicts = conflicts;
        self.records.insert(record.id(), record);
        Ok(())
    }

    fn move_to(
        &mut self,
        id: IntentId,
        to: FulfilmentStatus,
        at: LogicalTime,
        reason: Option<String>,
        events: &mut Vec<EngineEvent>,
    ) {
        let rec = self.records.get_mut(&id).expect("record exists");
        if reason.is_some() {
            rec.fulfilment.reason = reason.clone();
        }
        if let Some(Transition { from, to, at }) = rec.transition(to, at) {
            events.push(EngineEvent::IntentTransition {
                intent_id: id,
                intent_type: rec.intent.intent_type,
                from,
                to,
                at,
                reason,
            });
        }
    }

    fn fail(&mut self, id: IntentId, err: &ExecutionError, at: LogicalTime, events: &mut Vec<EngineEvent>) {
        let reason = match err {
            ExecutionError::UnknownNetwork(_) | ExecutionError::UnknownRegion(_) | ExecutionError::UnknownIntent(_) => {
                err.code().to_string()
            }
            other => other.to_string(),
        };
        self.move_to(id, FulfilmentStatus::Failed, at, Some(reason), events);
    }

    fn network_updated(&self, id: &str, at: LogicalTime, events: &mut Vec<EngineEvent>) {
        if let Some(n) = self.inventory.networks.get(id) {
            events.push(EngineEvent::NetworkUpdated { at, network: n.clone() });
        }
    }

    fn execute(&mut self, id: IntentId, at: LogicalTime) -> Result<Vec<EngineEvent>, ExecutionError> {
        let rec = self.records.get(&id).ok_or(ExecutionError::UnknownIntent(id))?;
        if rec.status() != FulfilmentStatus::Pending {
            return Err(ExecutionError::NotPending(id));
        }
        let intent = rec.intent.clone();
        let mut events = Vec::new();
        {
            let rec = self.records.get_mut(&id).expect("checked");
            for (&a, v) in &intent.attributes {
                if let (Some(m), Some(b)) = (Metric::for_attribute(a), v.as_target()) {
                    rec.fulfilment.targets.insert(m, b);
                }
            }
        }
        match intent.intent_type {
            IntentType::Deployment => self.execute_deployment(id, &intent, at, &mut events),
            IntentType::Modification => self.execute_modification(id, &intent, at, &mut events),
            IntentType::PerformanceAssurance => self.execute_assurance(id, &intent, at, &mut events),
            IntentType::IntentReportRequest => self.execute_report(id, &intent, at, &mut events),
            IntentType::IntentFeasibilityCheck => self.execute_feasibility(id, &intent, at, &mut events),
            IntentType::RegularNotificationRequest => self.execute_subscription(id, &intent, at, &mut events),
        }
        Ok(events)
    }

    fn set_feasibility(&mut self, id: IntentId, result: FeasibilityResult) {
        self.records.get_mut(&id).expect("record exists").fulfilment.feasibility = Some(result);
    }

    fn execute_deployment(&mut self, id: IntentId, intent: &StructuredIntent, at: LogicalTime, events: &mut Vec<EngineEvent>) {
        let result = match check_feasibility(intent, &self.inventory) {
            Ok(r) => r,
            Err(e) => return self.fail(id, &e, at, events),
        };
        let feasible = result.is_feasible();
        let detail = result.detail.clone();
        let units = result.required_units;
        self.set_feasibility(id, result);
        if !feasible {
            return self.move_to(id, FulfilmentStatus::Infeasible, at, Some(detail), events);
        }
        let network_id = self.inventory.next_network_id();
        let network = NetworkRecord {
            id: network_id.clone(),
            region: intent.text(Attribute::Region).unwrap_or_default().to_string(),
            network_type: intent.text(Attribute::NetworkType).unwrap_or(DEFAULT_NETWORK_TYPE).to_string(),
            plmn_id: intent.text(Attribute::PlmnId).map(str::to_string),
            capacity_units: units,
            registered_users: 0,
            max_users: units * USERS_PER_UNIT,
            pdu_sessions: 0,
            status: NetworkStatus::Deploying,
        };
        self.inventory.networks.insert(network_id.clone(), network);
        self.records.get_mut(&id).expect("record exists").network_id = Some(network_id.clone());
        self.network_updated(&network_id, at, events);
        self.move_to(id, FulfilmentStatus::InProgress, at, None, events);
    }

    fn execute_modification(&mut self, id: IntentId, intent: &StructuredIntent, at: LogicalTime, events: &mut Vec<EngineEvent>) {
        let network_id = intent.text(Attribute::NetworkId).unwrap_or_default().to_string();
        let result = match check_feasibility(intent, &self.inventory) {
            Ok(r) => r,
            Err(e) => return self.fail(id, &e, at, events),
        };
        self.records.get_mut(&id).expect("record exists").network_id = Some(network_id.clone());
        let feasible = result.is_feasible();
        let detail = result.detail.clone();
        self.set_feasibility(id, result);
        if !feasible {
            return self.move_to(id, FulfilmentStatus::Infeasible, at, Some(detail), events);
        }
        let net = self.inventory.networks.get(&network_id).expect("feasibility checked the network");
        let units = intent.target(Attribute::CapacityTarget).map_or(net.capacity_units, |b| b.value);
        if units * USERS_PER_UNIT < net.registered_users {
            let reason = format!(
                "{units} unit(s) cannot hold the {} users registered on {network_id}",
                net.registered_users
            );
            return self.move_to(id, FulfilmentStatus::Failed, at, Some(reason), events);
        }
        let net = self.inventory.networks.get_mut(&network_id).expect("exists");
        if let Some(r) = intent.text(Attribute::Region) {
            net.region = r.to_string();
        }
        if let Some(t) = intent.text(Attribute::NetworkType) {
            net.network_type = t.to_string();
        }
        if let Some(p) = intent.text(Attribute::PlmnId) {
            net.plmn_id = Some(p.to_string());
        }
        net.capacity_units = units;
        net.max_users = units * USERS_PER_UNIT;
        self.records
            .get_mut(&id)
            .expect("record exists")
            .fulfilment
            .achieved
            .insert(Metric::CapacityUnits, units);
        self.network_updated(&network_id, at, events);
        self.move_to(id, FulfilmentStatus::Fulfilled, at, None, events);
        self.reevaluate(Some(&network_id), at, events);
    }

    fn execute_assurance(&mut self, id: IntentId, intent: &StructuredIntent, at: LogicalTime, events: &mut Vec<EngineEvent>) {
        let network_id = intent.text(Attribute::NetworkId).unwrap_or_default().to_string();
        if let Err(e) = self.inventory.network(&network_id) {
            return self.fail(id, &e, at, events);
        }
        self.records.get_mut(&id).expect("record exists").network_id = Some(network_id.clone());
        self.move_to(id, FulfilmentStatus::InProgress, at, None, events);
        self.reevaluate(Some(&network_id), at, events);
    }

    fn execute_report(&mut self, id: IntentId, intent: &StructuredIntent, at: LogicalTime, events: &mut Vec<EngineEvent>) {
        let subject = intent.subject_intent().expect("validated report has a subject");
        match self.report(subject, at) {
            Ok(report) => {
                self.records.get_mut(&id).expect("record exists").report = Some(report);
                self.move_to(id, FulfilmentStatus::Fulfilled, at, None, events);
            }
            Err(e) => self.fail(id, &e, at, events),
        }
    }

    fn execute_feasibility(&mut self, id: IntentId, intent: &StructuredIntent, at: LogicalTime, events: &mut Vec<EngineEvent>) {
        let result = match intent.subject_intent() {
            None => check_feasibility(intent, &self.inventory),
            Some(subject) => self.subject_feasibility(subject, intent),
        };
        match result {
            Ok(r) => {
                self.set_feasibility(id, r);
                self.move_to(id, FulfilmentStatus::Fulfilled, at, None, events);
            }
            Err(e) => self.fail(id, &e, at, events),
        }
    }

    /// Feasibility of a referenced intent, with this check's own region and
    /// capacity taking precedence.
    fn subject_feasibility(&self, subject: IntentId, check: &StructuredIntent) -> Result<FeasibilityResult, ExecutionError> {
        let rec = self.records.get(&subject).ok_or(ExecutionError::UnknownIntent(subject))?;
        if rec.status() != FulfilmentStatus::Pending {
            if let Some(f) = &rec.fulfilment.feasibility {
                return Ok(f.clone());
            }
        }
        let Some(mut d) = demand(&rec.intent, &self.inventory)? else {
            return check_feasibility(check, &self.inventory);
        };
        if let Some(region) = check.text(Attribute::Region) {
            d.region = region.to_string();
        }
        if let Some(b) = check.target(Attribute::CapacityTarget) {
            d.required_units = b.value;
        }
        if d.required_units == 0 && rec.intent.intent_type == IntentType::Deployment {
            d.required_units = DEFAULT_UNITS;
        }
        assess(&d, &self.inventory)
    }

    fn execute_subscription(&mut self, id: IntentId, intent: &StructuredIntent, at: LogicalTime, events: &mut Vec<EngineEvent>) {
        let subject = match (intent.text(Attribute::NetworkId), intent.subject_intent()) {
            (Some(n), _) => match self.inventory.network(n) {
                Ok(_) => Subject::Network { network_id: n.to_string() },
                Err(e) => return self.fail(id, &e, at, events),
            },
            (None, Some(s)) if self.records.contains_key(&s) => Subject::Intent { intent_id: s },
            (None, Some(s)) => return self.fail(id, &ExecutionError::UnknownIntent(s), at, events),
            (None, None) => unreachable!("validated notification has a subject"),
        };
        if let Subject::Network { network_id } = &subject {
            self.records.get_mut(&id).expect("record exists").network_id = Some(network_id.clone());
        }
        let frequency = intent
            .get(Attribute::Frequency)
            .and_then(|v| v.as_duration())
            .unwrap_or(IsoDuration::from_mins(15));
        self.subscriptions.insert(id, NotificationSubscription::new(id, subject, frequency, at));
        self.move_to(id, FulfilmentStatus::Fulfilled, at, None, events);
    }

    /// Re-checks assurance monitors, optionally only those on one network.
    fn reevaluate(&mut self, network: Option<&str>, at: LogicalTime, events: &mut Vec<EngineEvent>) {
        let monitored: Vec<(IntentId, String)> = self
            .records
            .values()
            .filter(|r| r.intent.intent_type == IntentType::PerformanceAssurance)
            .filter(|r| {
                matches!(
                    r.status(),
                    FulfilmentStatus::InProgress | FulfilmentStatus::Fulfilled | FulfilmentStatus::Degraded
                )
            })
            .filter_map(|r| Some((r.id(), r.network_id.clone()?)))
            .filter(|(_, n)| network.is_none_or(|want| want == n))
            .collect();
        let mut touched: Vec<String> = Vec::new();
        for (id, network_id) in monitored {
            let Some(net) = self.inventory.networks.get(&network_id) else { continue };
            let rec = self.records.get_mut(&id).expect("listed above");
            let mut all_hold = true;
            let targets: Vec<_> = rec.fulfilment.targets.iter().map(|(m, b)| (*m, *b)).collect();
            for (metric, bound) in targets {
                let observed = match metric {
                    Metric::RegisteredUsers => net.registered_users,
                    Metric::PduSessions => net.pdu_sessions,
                    Metric::CapacityUnits => net.capacity_units,
                };
                rec.fulfilment.achieved.insert(metric, observed);
                all_hold &= bound.holds(observed);
            }
            let to = if all_hold { FulfilmentStatus::Fulfilled } else { FulfilmentStatus::Degraded };
            self.move_to(id, to, at, None, events);
            if !touched.contains(&network_id) {
                touched.push(network_id);
            }
        }
        for network_id in touched {
            let degraded = self.records.values().any(|r| {
                r.intent.intent_type == IntentType::PerformanceAssurance
                    && r.status() == FulfilmentStatus::Degraded
                    && r.network_id.as_deref() == Some(network_id.as_str())
            });
            let net = self.inventory.networks.get_mut(&network_id).expect("exists");
            let next = match (net.status, degraded) {
                (NetworkStatus::Active, true) => NetworkStatus::Degraded,
                (NetworkStatus::Degraded, false) => NetworkStatus::Active,
                (s, _) => s,
            };
            if next != net.status {
                net.status = next;
                self.network_updated(&network_id, at, events);
            }
        }
    }

    fn tick(&mut self, at: LogicalTime) -> Vec<EngineEvent> {
        let mut events = Vec::new();

        let deploying: Vec<String> = self
            .inventory
            .networks
            .values()
            .filter(|n| n.status == NetworkStatus::Deploying)
            .map(|n| n.id.clone())
            .collect();
        for network_id in deploying {
            let units = {
                let net = self.inventory.networks.get_mut(&network_id).expect("listed above");
                net.status = NetworkStatus::Active;
                net.capacity_units
            };
            self.network_updated(&network_id, at, &mut events);
            let owners: Vec<IntentId> = self
                .records
                .values()
                .filter(|r| {
                    r.intent.intent_type == IntentType::Deployment
                        && r.status() == FulfilmentStatus::InProgress
                        && r.network_id.as_deref() == Some(network_id.as_str())
                })
                .map(|r| r.id())
                .collect();
            for id in owners {
                self.records
                    .get_mut(&id)
                    .expect("listed above")
                    .fulfilment
                    .achieved
                    .insert(Metric::CapacityUnits, units);
                self.move_to(id, FulfilmentStatus::Fulfilled, at, None, &mut events);
            }
        }

        self.reevaluate(None, at, &mut events);

        let ids: Vec<IntentId> = self.subscriptions.keys().copied().collect();
        for sid in ids {
            let fires = self.subscriptions.get_mut(&sid).expect("listed above").due(at);
            if fires.is_empty() {
                continue;
            }
            let subject = self.subject_status(&self.subscriptions[&sid].subject);
            let message = describe(&subject);
            for fired_at in fires {
                events.push(EngineEvent::Notification {
                    notification: Notification {
                        subscription_id: sid,
                        fired_at,
                        subject: subject.clone(),
                        message: message.clone(),
                    },
                });
            }
        }
        events
    }

    fn subject_status(&self, subject: &Subject) -> SubjectStatus {
        match subject {
            Subject::Network { network_id } => SubjectStatus::Network {
                network_id: network_id.clone(),
                status: self.inventory.networks.get(network_id).map(|n| n.status),
            },
            Subject::Intent { intent_id } => SubjectStatus::Intent {
                intent_id: *intent_id,
                status: self.records.get(intent_id).map(|r| r.status()),
            },
        }
    }

    fn observe(
        &mut self,
        network_id: &str,
        registered_users: u64,
        pdu_sessions: u64,
        at: LogicalTime,
    ) -> Result<Vec<EngineEvent>, ExecutionError> {
        let net = self.inventory.network(network_id)?;
        if registered_users > net.max_users {
            return Err(ExecutionError::Observation(format!(
                "{registered_users} users exceed the {} {network_id} can hold",
                net.max_users
            )));
        }
        let net = self.inventory.networks.get_mut(network_id).expect("checked");
        net.registered_users = registered_users;
        net.pdu_sessions = pdu_sessions;
        let mut events = Vec::new();
        self.network_updated(network_id, at, &mut events);
        self.reevaluate(Some(network_id), at, &mut events);
        Ok(events)
    }
}

fn describe(s: &SubjectStatus) -> String {
    match s {
        SubjectStatus::Network { network_id, status: Some(st) } => format!("{network_id} is {st:?}"),
        SubjectStatus::Network { network_id, status: None } => format!("{network_id} no longer exists"),
        SubjectStatus::Intent { intent_id, status: Some(st) } => format!("intent {intent_id} is {st}"),
        SubjectStatus::Intent { intent_id, status: None } => format!("intent {intent_id} is unknown"),
    }
}
