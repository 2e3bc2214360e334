#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use intent_gate::{ClockKind, Gateway, GatewayConfig, StreamEvent};
use serde_json::Value;
use tokio::sync::{mpsc, oneshot};

pub fn core_fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(rel)
}

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden").join(name)
}

/// Compares `actual` with the golden file, or rewrites it under
/// `UPDATE_GOLDEN=1`. Returns a description of the first difference.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        return Ok(());
    }
    let line = expected.lines().zip(actual.lines()).position(|(a, b)| a != b).unwrap_or(0);
    Err(format!(
        "{name} differs at line {}:\n  golden: {}\n  actual: {}",
        line + 1,
        expected.lines().nth(line).unwrap_or("<eof>"),
        actual.lines().nth(line).unwrap_or("<eof>")
    ))
}

/// Rule backend, logical clock, no background ticker.
pub fn rule_config() -> GatewayConfig {
    GatewayConfig {
        clock: ClockKind::Logical,
        logical_start: 1_700_000_000,
        seed: 42,
        tick_interval_secs: 0,
        ..GatewayConfig::default()
    }
}

pub struct Server {
    pub gw: Arc<Gateway>,
    pub base: String,
    pub client: reqwest::Client,
    shutdown: Option<oneshot::Sender<()>>,
}

impl Server {
    pub async fn start(gw: Gateway) -> Server {
        let gw = Arc::new(gw);
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = oneshot::channel::<()>();
        tokio::spawn(intent_gate::http::serve(gw.clone(), listener, async {
            let _ = rx.await;
        }));
        Server { gw, base, client: reqwest::Client::new(), shutdown: Some(tx) }
    }

    pub async fn post(&self, path: &str, body: Option<Value>) -> (u16, Value) {
        let mut req = self.client.post(format!("{}{path}", self.base));
        if let Some(b) = body {
            req = req.header("content-type", "application/json").body(b.to_string());
        }
        let resp = req.send().await.unwrap();
        let status = resp.status().as_u16();
        (status, serde_json::from_str(&resp.text().await.unwrap()).unwrap_or(Value::Null))
    }

    pub async fn get(&self, path: &str) -> (u16, String) {
        let resp = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        (resp.status().as_u16(), resp.text().await.unwrap())
    }

    pub async fn new_session(&self) -> String {
        let (status, body) = self.post("/v1/sessions", None).await;
        assert_eq!(status, 201, "{body}");
        body["session_id"].as_str().unwrap().to_string()
    }

    /// Submits `text` and returns the raw response body.
    pub async fn say(&self, session: &str, text: &str) -> (u16, String) {
        let resp = self
            .client
            .post(format!("{}/v1/sessions/{session}/requests", self.base))
            .header("content-type", "application/json")
            .body(serde_json::json!({ "text": text }).to_string())
            .send()
            .await
            .unwrap();
        (resp.status().as_u16(), resp.text().await.unwrap())
    }

    /// Opens the event stream and forwards parsed events on a channel. The
    /// subscription is live once this returns.
    pub async fn events(&self, query: &str) -> mpsc::UnboundedReceiver<StreamEvent> {
        let mut resp = self.client.get(format!("{}/v1/events{query}", self.base)).send().await.unwrap();
        assert_eq!(resp.status().as_u16(), 200);
        let (tx, rx) = mpsc::unbounded_channel();
        tokio::spawn(async move {
            let mut buf = String::new();
            while let Ok(Some(chunk)) = resp.chunk().await {
                buf.push_str(&String::from_utf8_lossy(&chunk));
                while let Some(end) = buf.find("\n\n") {
                    let frame: String = buf.drain(..end + 2).collect();
                    let data: String = frame
                        .lines()
                        .filter_map(|l| l.strip_prefix("data:"))
                        .map(|d| d.strip_prefix(' ').unwrap_or(d))
                        .collect();
                    if let Ok(e) = serde_json::from_str::<StreamEvent>(&data) {
                        if tx.send(e).is_err() {
                            return;
                        }
                    }
                }
            }
        });
        rx
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

/// Drains `rx` until `done` holds on what has arrived, or two seconds pass.
pub async fn collect_until(
    rx: &mut mpsc::UnboundedReceiver<StreamEvent>,
    done: impl Fn(&[StreamEvent]) -> bool,
) -> Vec<StreamEvent> {
    let mut got = Vec::new();
    let deadline = tokio::time::Instant::now() + Duration::from_secs(2);
    while !done(&got) {
        match tokio::time::timeout_at(deadline, rx.recv()).await {
            Ok(Some(e)) => got.push(e),
            _ => break,
        }
    }
    got
}

pub const SCRIPT: [&str; 4] = [
    "Deploy a new network in RegionB.",
    "Assure 5000 registered users on net-4.",
    "Summarize the previous request.",
    "Notify me of the status of net-4 every 10 minutes.",
];

pub struct ScriptRun {
    pub outcomes: Vec<Value>,
    pub report: Value,
    pub networks: Value,
    pub events: Vec<StreamEvent>,
}

fn pretty(v: &impl serde::Serialize) -> String {
    intent_gate_core::canonical::to_string_pretty(v).unwrap() + "\n"
}

impl ScriptRun {
    pub fn outcomes_golden(&self) -> String {
        pretty(&self.outcomes)
    }

    pub fn report_golden(&self) -> String {
        pretty(&self.report)
    }

    pub fn events_golden(&self) -> String {
        pretty(&self.events)
    }
}

/// Deploy, assure, report, subscribe over HTTP, with one scheduler tick
/// after the deployment and 25 minutes of ticks after the subscription.
pub async fn run_script() -> Result<ScriptRun, String> {
    let server = Server::start(Gateway::new(rule_config()).map_err(|e| e.to_string())?).await;
    let session = server.new_session().await;
    let mut rx = server.events(&format!("?session={session}")).await;
    let mut outcomes = Vec::new();
    for (i, text) in SCRIPT.iter().enumerate() {
        let (status, body) = server.say(&session, text).await;
        if status != 200 {
            return Err(format!("`{text}` answered {status}: {body}"));
        }
        outcomes.push(serde_json::from_str::<Value>(&body).map_err(|e| e.to_string())?);
        if i == 0 {
            server.gw.tick(intent_gate_core::time::IsoDuration::from_mins(1)).map_err(|e| e.to_string())?;
        }
    }
    for _ in 0..25 {
        server.gw.tick(intent_gate_core::time::IsoDuration::from_mins(1)).map_err(|e| e.to_string())?;
    }
    let assurance = outcomes[1]["records"][0]["intent_id"].as_str().ok_or("no assurance record")?.to_string();
    let (status, report) = server.get(&format!("/v1/intents/{assurance}/report")).await;
    if status != 200 {
        return Err(format!("report answered {status}: {report}"));
    }
    let (_, networks) = server.get("/v1/networks").await;
    let events = collect_until(&mut rx, |got| got.iter().filter(|e| e.event == "notification").count() >= 2).await;
    Ok(ScriptRun {
        outcomes,
        report: serde_json::from_str(&report).map_err(|e| e.to_string())?,
        networks: serde_json::from_str(&networks).map_err(|e| e.to_string())?,
        events,
    })
}
