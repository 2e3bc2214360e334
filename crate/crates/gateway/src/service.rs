//! The request pipeline: extraction, structuring, policy compilation and
//! execution, with every state change journaled and streamed.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex, MutexGuard};

use intent_gate_core::canonical;
use intent_gate_core::context::{ContextError, Event, EventKind, EventLog, SessionEntry, SessionStore};
use intent_gate_core::execution::{
    Command, Engine, EngineEvent, FeasibilityResult, FulfilmentStatus, Inventory, IntentRecord, Report,
};
use intent_gate_core::extraction::{
    extract_entities, ExtractionError, ExtractorBackend, Lexicon, LlmBackend, LlmOptions, PromptSpec, RetryPolicy,
    RuleBackend,
};
use intent_gate_core::extraction::chat::{ChatTransport, ReplayTransport};
use intent_gate_core::ids::{IdGenerator, IntentId, RequestId, SessionId};
use intent_gate_core::model::{ExtractionOutcome, IntentType, StructuredIntent};
use intent_gate_core::time::{IsoDuration, LogicalTime};
use intent_gate_core::transform::{compile_policy, structure_request, PolicyDocument};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use crate::clock::Clock;
use crate::config::{BackendKind, GatewayConfig};
use crate::error::GatewayError;
use crate::transport::HttpTransport;

const STREAM_CAPACITY: usize = 1024;

/// A detected intent that could not be structured.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unstructured {
    pub intent_type: IntentType,
    pub reason: String,
    pub question: String,
}

/// Where an executed intent stands right after its request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordSummary {
    pub intent_id: IntentId,
    pub intent_type: IntentType,
    pub status: FulfilmentStatus,
    pub network_id: Option<String>,
    pub reason: Option<String>,
    pub conflicts: Vec<IntentId>,
    pub feasibility: Option<FeasibilityResult>,
}

impl From<&IntentRecord> for RecordSummary {
    fn from(r: &IntentRecord) -> Self {
        RecordSummary {
            intent_id: r.id(),
            intent_type: r.intent.intent_type,
            status: r.status(),
            network_id: r.network_id.clone(),
            reason: r.fulfilment.reason.clone(),
            conflicts: r.fulfilment.conflicts.iter().map(|c| c.intent_id).collect(),
            feasibility: r.fulfilment.feasibility.clone(),
        }
    }
}

/// Everything the gateway has to say about one request.
///
/// `clarification` is present exactly when `unstructured` is non-empty.
/// Sentinel outcomes carry no structured intents and no records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestOutcome {
    pub request_id: RequestId,
    pub session_id: SessionId,
    pub received_at: LogicalTime,
    pub text: String,
    /// The backend that produced `extraction`.
    pub backend: String,
    pub extraction: ExtractionOutcome,
    pub structured: Vec<StructuredIntent>,
    pub policies: Vec<PolicyDocument>,
    pub unstructured: Vec<Unstructured>,
    pub clarification: Option<String>,
    pub records: Vec<RecordSummary>,
    pub reports: Vec<Report>,
    pub notices: Vec<String>,
    pub reply: String,
}

/// One item on the event stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub seq: u64,
    pub session_id: Option<SessionId>,
    /// `intent_transition`, `network_updated`, `notification` or
    /// `request_completed`.
    pub event: String,
    pub data: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestCompleted {
    pub request_id: RequestId,
    pub session_id: SessionId,
    pub at: LogicalTime,
    pub intent_ids: Vec<IntentId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub backend: String,
    pub now: LogicalTime,
    pub sessions: usize,
    pub records: usize,
}

struct State {
    engine: Engine,
    sessions: SessionStore,
    ids: IdGenerator,
    log: Option<EventLog>,
    /// Which session each intent came from, for stream filtering.
    owners: HashMap<IntentId, SessionId>,
    seq: u64,
}

impl State {
    fn journal(&mut self, event: Event) -> Result<(), GatewayError> {
        match &mut self.log {
            Some(log) => log.append(&event).map_err(|e| GatewayError::Journal(e.to_string())),
            None => Ok(()),
        }
    }

    fn journal_command(&mut self, session: Option<SessionId>, command: &Command) -> Result<(), GatewayError> {
        let event = Event::new(command.at(), session, command.event_kind(), command)
            .map_err(|e| GatewayError::Internal(e.to_string()))?;
        self.journal(event)
    }

    fn owner(&self, event: &EngineEvent, requester: Option<SessionId>) -> Option<SessionId> {
        match event {
            EngineEvent::IntentTransition { intent_id, .. } => self.owners.get(intent_id).copied(),
            EngineEvent::Notification { notification } => self.owners.get(&notification.subscription_id).copied(),
            EngineEvent::NetworkUpdated { network, .. } => requester.or_else(|| {
                self.engine
                    .records()
                    .filter(|r| r.intent.intent_type == IntentType::Deployment)
                    .filter(|r| r.network_id.as_deref() == Some(network.id.as_str()))
                    .find_map(|r| self.owners.get(&r.id()).copied())
            }),
        }
    }

    fn stream_event(&mut self, session_id: Option<SessionId>, event: &str, data: serde_json::Value) -> StreamEvent {
        self.seq += 1;
        StreamEvent { seq: self.seq, session_id, event: event.to_string(), data }
    }

    fn engine_stream_events(&mut self, events: &[EngineEvent], requester: Option<SessionId>) -> Vec<StreamEvent> {
        events
            .iter()
            .map(|e| {
                let kind = match e {
                    EngineEvent::IntentTransition { .. } => "intent_transition",
                    EngineEvent::NetworkUpdated { .. } => "network_updated",
                    EngineEvent::Notification { .. } => "notification",
                };
                let owner = self.owner(e, requester);
                let data = canonical::to_value(e).expect("engine events serialize");
                self.stream_event(owner, kind, data)
            })
            .collect()
    }
}

fn context_error(e: ContextError) -> GatewayError {
    match e {
        ContextError::UnknownSession(id) => GatewayError::UnknownSession(id),
        ContextError::Expired(id) => GatewayError::SessionExpired(id),
        other => GatewayError::Internal(other.to_string()),
    }
}

/// Builds the classifier named by `config.backend`.
pub fn build_backend(config: &GatewayConfig) -> Result<Arc<dyn ExtractorBackend>, GatewayError> {
    let setup = |e: &dyn std::fmt::Display| GatewayError::Setup(e.to_string());
    let lexicon = match &config.lexicon_path {
        Some(p) => Lexicon::load(p).map_err(|e| setup(&e))?,
        None => Lexicon::bundled(),
    };
    if config.backend == BackendKind::Rule {
        return Ok(Arc::new(RuleBackend::new(lexicon)));
    }
    let spec = match &config.prompt_spec_path {
        Some(p) => PromptSpec::load(p).map_err(|e| setup(&e))?,
        None => PromptSpec::bundled(),
    };
    let options = LlmOptions {
        model: config.llm_model.clone(),
        temperature: config.llm_temperature,
        retry: RetryPolicy { max_retries: config.llm_retries, ..RetryPolicy::default() },
        ..LlmOptions::default()
    };
    let (name, transport): (&str, Arc<dyn ChatTransport>) = match config.backend {
        BackendKind::Replay => {
            let dir = config.fixtures_dir.as_ref().ok_or_else(|| GatewayError::Setup("fixtures_dir is unset".into()))?;
            ("replay", Arc::new(ReplayTransport::load(dir).map_err(|e| setup(&e))?))
        }
        _ => ("llm", Arc::new(HttpTransport::from_config(config).map_err(|e| setup(&e))?)),
    };
    Ok(Arc::new(LlmBackend::new(name, transport, spec, options)))
}

pub struct Gateway {
    config: GatewayConfig,
    backend: Arc<dyn ExtractorBackend>,
    fallback: Option<Arc<dyn ExtractorBackend>>,
    clock: Clock,
    state: Mutex<State>,
    session_locks: Mutex<HashMap<SessionId, Arc<tokio::sync::Mutex<()>>>>,
    stream: broadcast::Sender<StreamEvent>,
}

impl Gateway {
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        let backend = build_backend(&config)?;
        Gateway::with_backend(config, backend)
    }

    /// Uses `backend` in place of the configured one. The journal named in
    /// `config` is replayed before the gateway takes requests.
    pub fn with_backend(config: GatewayConfig, backend: Arc<dyn ExtractorBackend>) -> Result<Self, GatewayError> {
        let setup = |e: &dyn std::fmt::Display| GatewayError::Setup(e.to_string());
        let inventory = match &config.inventory_path {
            Some(p) => Inventory::load(p).map_err(|e| setup(&e))?,
            None => Inventory::bundled(),
        };
        let fallback: Option<Arc<dyn ExtractorBackend>> =
            (config.fallback_to_rules && config.backend != BackendKind::Rule).then(|| {
                let lexicon = config.lexicon_path.as_ref().and_then(|p| Lexicon::load(p).ok()).unwrap_or_else(Lexicon::bundled);
                Arc::new(RuleBackend::new(lexicon)) as Arc<dyn ExtractorBackend>
            });
        let start = LogicalTime(config.logical_start);
        let clock = Clock::new(config.clock, start);
        let mut sessions = SessionStore::new(config.session_ttl);
        let mut ids = IdGenerator::new(config.seed);
        let (log, engine) = match &config.event_log_path {
            Some(path) => {
                let (log, existing) = EventLog::open(path).map_err(|e| setup(&e))?;
                for event in &existing {
                    sessions.apply_event(event).map_err(|e| setup(&e))?;
                    clock.resume(event.ts);
                }
                let engine = Engine::replay(inventory, start, &existing).map_err(|e| setup(&e))?;
                (Some(log), engine)
            }
            None => (None, Engine::new(inventory, start)),
        };
        let mut owners = HashMap::new();
        for session in sessions.iter() {
            ids.observe(session.id.ulid());
            for entry in session.requests() {
                ids.observe(entry.request_id.ulid());
                for i in &entry.intents {
                    owners.insert(i.id, session.id);
                }
            }
        }
        for record in engine.records() {
            ids.observe(record.id().ulid());
            ids.observe(record.policy.policy_id.ulid());
        }
        let (stream, _) = broadcast::channel(STREAM_CAPACITY);
        Ok(Gateway {
            config,
            backend,
            fallback,
            clock,
            state: Mutex::new(State { engine, sessions, ids, log, owners, seq: 0 }),
            session_locks: Mutex::new(HashMap::new()),
            stream,
        })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn now(&self) -> LogicalTime {
        self.clock.now()
    }

    fn state(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn subscribe(&self) -> broadcast::Receiver<StreamEvent> {
        self.stream.subscribe()
    }

    fn publish(&self, events: Vec<StreamEvent>) {
        for e in events {
            // no subscribers is fine
            let _ = self.stream.send(e);
        }
    }

    fn create_session_locked(&self, st: &mut State, id: Option<SessionId>) -> Result<SessionId, GatewayError> {
        let now = self.clock.stamp();
        let id = id.unwrap_or_else(|| st.ids.session_id(now));
        st.sessions.create(id, now).map_err(context_error)?;
        let event = Event::new(now, Some(id), EventKind::SessionCreated, &serde_json::json!({ "session_id": id }))
            .map_err(|e| GatewayError::Internal(e.to_string()))?;
        st.journal(event)?;
        Ok(id)
    }

    pub fn create_session(&self) -> Result<SessionId, GatewayError> {
        let mut st = self.state();
        self.create_session_locked(&mut st, None)
    }

    /// Sessions are created on first use; expired ones stay expired.
    fn ensure_session(&self, id: SessionId) -> Result<(), GatewayError> {
        let mut st = self.state();
        let found = st.sessions.get(id, self.clock.now()).map(|_| ());
        match found {
            Ok(()) => Ok(()),
            Err(ContextError::UnknownSession(_)) => self.create_session_locked(&mut st, Some(id)).map(|_| ()),
            Err(e) => Err(context_error(e)),
        }
    }

    fn session_lock(&self, id: SessionId) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.session_locks.lock().unwrap_or_else(|p| p.into_inner());
        locks.entry(id).or_default().clone()
    }

    fn classify(&self, text: &str) -> Result<(String, ExtractionOutcome, Vec<String>), GatewayError> {
        match self.backend.classify(text) {
            Ok(outcome) => Ok((self.backend.name().to_string(), outcome, Vec::new())),
            Err(ExtractionError::Transport { attempts, source }) => match &self.fallback {
                Some(rules) => {
                    let outcome = rules.classify(text).map_err(|e| GatewayError::Internal(e.to_string()))?;
                    let notice = format!(
                        "The language model could not be reached ({source}, {attempts} attempt(s)); rule-based extraction was used instead."
                    );
                    Ok((rules.name().to_string(), outcome, vec![notice]))
                }
                None => Err(GatewayError::BackendUnavailable(format!("{source} after {attempts} attempt(s)"))),
            },
            Err(ExtractionError::EmptyRequest) => Err(GatewayError::EmptyRequest),
            Err(ExtractionError::UnparseableResponse) => {
                Err(GatewayError::BackendResponse("no intent or sentinel in the model response".into()))
            }
            Err(other) => Err(GatewayError::Internal(other.to_string())),
        }
    }

    /// Runs one request through the whole pipeline. Requests on the same
    /// session are handled one at a time, in arrival order.
    pub async fn handle_request(self: &Arc<Self>, session_id: SessionId, text: String) -> Result<RequestOutcome, GatewayError> {
        if text.trim().is_empty() {
            return Err(GatewayError::EmptyRequest);
        }
        let lock = self.session_lock(session_id);
        let _turn = lock.lock().await;
        self.ensure_session(session_id)?;
        let this = Arc::clone(self);
        let input = text.clone();
        let (backend, extraction, notices) = tokio::task::spawn_blocking(move || this.classify(&input))
            .await
            .map_err(|e| GatewayError::Internal(e.to_string()))??;
        let (outcome, stream) = self.execute_request(session_id, text, backend, extraction, notices)?;
        self.publish(stream);
        Ok(outcome)
    }

    /// Blocking variant of [`Gateway::handle_request`] for callers without
    /// an async runtime.
    pub fn handle_request_blocking(&self, session_id: SessionId, text: String) -> Result<RequestOutcome, GatewayError> {
        if text.trim().is_empty() {
            return Err(GatewayError::EmptyRequest);
        }
        let lock = self.session_lock(session_id);
        let _turn = lock.blocking_lock();
        self.ensure_session(session_id)?;
        let (backend, extraction, notices) = self.classify(&text)?;
        let (outcome, stream) = self.execute_request(session_id, text, backend, extraction, notices)?;
        self.publish(stream);
        Ok(outcome)
    }

    fn execute_request(
        &self,
        session_id: SessionId,
        text: String,
        backend: String,
        extraction: ExtractionOutcome,
        mut notices: Vec<String>,
    ) -> Result<(RequestOutcome, Vec<StreamEvent>), GatewayError> {
        let mut guard = self.state();
        let st = &mut *guard;
        let now = self.clock.stamp();
        let request_id = st.ids.request_id(now);
        let history = st.sessions.get(session_id, now).map_err(context_error)?.intent_history();

        let mut structured = Vec::new();
        let mut unstructured = Vec::new();
        if extraction.sentinel_text().is_none() {
            let entities = extract_entities(&text);
            let ids = &mut st.ids;
            let results = structure_request(&extraction, &text, &entities, &history, || ids.intent_id(now), request_id);
            for (intent_type, result) in results {
                match result {
                    Ok(intent) => structured.push(intent),
                    Err(e) => unstructured.push(Unstructured {
                        intent_type,
                        reason: e.to_string(),
                        question: e.clarification(intent_type),
                    }),
                }
            }
        }
        let policies: Vec<PolicyDocument> =
            structured.iter().map(|i| compile_policy(i, st.ids.policy_id(now))).collect();
        for intent in &structured {
            st.owners.insert(intent.id, session_id);
            notices.extend(intent.assumed_defaults.iter().map(|d| d.notice.clone()));
        }

        let mut order: Vec<&StructuredIntent> = structured.iter().collect();
        order.sort_by_key(|i| (i.intent_type != IntentType::IntentFeasibilityCheck, i.intent_type.index()));
        let commands: Vec<Command> = structured
            .iter()
            .zip(&policies)
            .map(|(intent, policy)| Command::Submit { at: now, intent: intent.clone(), policy: policy.clone() })
            .chain(order.iter().map(|i| Command::Execute { at: now, intent_id: i.id }))
            .collect();
        let mut engine_events = Vec::new();
        for command in &commands {
            let events = st.engine.apply(command).map_err(|e| GatewayError::Internal(e.to_string()))?;
            st.journal_command(Some(session_id), command)?;
            engine_events.extend(events);
        }

        let entry = SessionEntry {
            request_id,
            text: text.clone(),
            timestamp: now,
            outcome: extraction.clone(),
            intents: structured.iter().map(Into::into).collect(),
        };
        let event = Event::new(now, Some(session_id), EventKind::RequestRecorded, &entry)
            .map_err(|e| GatewayError::Internal(e.to_string()))?;
        st.sessions.record(session_id, entry).map_err(context_error)?;
        st.journal(event)?;

        let records: Vec<RecordSummary> = structured
            .iter()
            .filter_map(|i| st.engine.record(i.id))
            .map(RecordSummary::from)
            .collect();
        let reports: Vec<Report> =
            structured.iter().filter_map(|i| st.engine.record(i.id)?.report.clone()).collect();
        for r in &records {
            for c in st.engine.record(r.intent_id).map(|r| r.fulfilment.conflicts.clone()).unwrap_or_default() {
                notices.push(format!("{} {} conflicts with {}: {}", r.intent_type, r.intent_id, c.intent_id, c.reason));
            }
        }
        let clarification = (!unstructured.is_empty())
            .then(|| unstructured.iter().map(|u| u.question.as_str()).collect::<Vec<_>>().join(" "));

        let mut outcome = RequestOutcome {
            request_id,
            session_id,
            received_at: now,
            text,
            backend,
            extraction,
            structured,
            policies,
            unstructured,
            clarification,
            records,
            reports,
            notices,
            reply: String::new(),
        };
        outcome.reply = render_reply(&outcome);

        let mut stream = st.engine_stream_events(&engine_events, Some(session_id));
        let completed = RequestCompleted {
            request_id,
            session_id,
            at: now,
            intent_ids: outcome.structured.iter().map(|i| i.id).collect(),
        };
        let data = canonical::to_value(&completed).expect("completion serializes");
        stream.push(st.stream_event(Some(session_id), "request_completed", data));
        Ok((outcome, stream))
    }

    /// Runs the scheduler once. The logical clock advances by `step`; the
    /// wall clock just reads the current time.
    pub fn tick(&self, step: IsoDuration) -> Result<Vec<StreamEvent>, GatewayError> {
        let stream = {
            let mut st = self.state();
            let command = Command::Tick { at: self.clock.tick(step) };
            let events = st.engine.apply(&command).map_err(|e| GatewayError::Internal(e.to_string()))?;
            st.journal_command(None, &command)?;
            st.engine_stream_events(&events, None)
        };
        self.publish(stream.clone());
        Ok(stream)
    }

    pub fn record(&self, id: IntentId) -> Result<IntentRecord, GatewayError> {
        self.state().engine.record(id).cloned().ok_or(GatewayError::UnknownIntent(id))
    }

    pub fn report(&self, id: IntentId) -> Result<Report, GatewayError> {
        let st = self.state();
        st.engine.report(id, self.clock.now()).map_err(|_| GatewayError::UnknownIntent(id))
    }

    pub fn inventory(&self) -> Inventory {
        self.state().engine.inventory().clone()
    }

    /// The engine as it stands; used to compare against a replay.
    pub fn engine_snapshot(&self) -> Engine {
        self.state().engine.clone()
    }

    pub fn health(&self) -> Health {
        let st = self.state();
        Health {
            status: "ok".into(),
            backend: self.backend.name().to_string(),
            now: self.clock.now(),
            sessions: st.sessions.len(),
            records: st.engine.records().count(),
        }
    }
}

/// The plain-text answer shown to the user.
pub fn render_reply(o: &RequestOutcome) -> String {
    if let Some(sentinel) = o.extraction.sentinel_text() {
        return sentinel.to_string();
    }
    let mut s = String::new();
    for r in &o.records {
        let _ = write!(s, "{} {}: {}", r.intent_type, r.intent_id, r.status);
        if let Some(n) = &r.network_id {
            let _ = write!(s, " on {n}");
        }
        if let Some(reason) = &r.reason {
            let _ = write!(s, " ({reason})");
        }
        s.push('\n');
    }
    for report in &o.reports {
        s.push('\n');
        s.push_str(&report.render_text());
    }
    for n in &o.notices {
        let _ = writeln!(s, "Note: {n}");
    }
    if let Some(q) = &o.clarification {
        s.push_str(q);
        s.push('\n');
    }
    s.trim_end().to_string()
}
