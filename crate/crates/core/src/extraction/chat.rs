//! Chat-completions wire shapes and the transports that carry them.
//!
//! The live HTTP transport lives in the gateway crate; this module holds
//! the transport trait, the JSON body helpers and the file-backed replay
//! and recording transports.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::canonical;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

/// Request body for a chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    /// One system message followed by one user message.
    pub fn new(model: impl Into<String>, temperature: f64, system: String, user: String) -> Self {
        ChatRequest {
            model: model.into(),
            temperature,
            messages: vec![
                ChatMessage { role: ChatRole::System, content: system },
                ChatMessage { role: ChatRole::User, content: user },
            ],
        }
    }

    /// The user message content, if the exchange has the expected shape.
    pub fn user_text(&self) -> Option<&str> {
        match self.messages.as_slice() {
            [ChatMessage { role: ChatRole::System, .. }, ChatMessage { role: ChatRole::User, content }] => {
                Some(content)
            }
            _ => None,
        }
    }

    pub fn to_json(&self) -> String {
        canonical::to_string(self).expect("chat request serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("network error: {0}")]
    Network(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("malformed response: {0}")]
    Protocol(String),
    #[error("no replay fixture for request hash {0}")]
    ReplayMiss(String),
    #[error("fixture i/o: {0}")]
    Io(String),
}

impl TransportError {
    /// Whether another attempt could plausibly succeed.
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::Timeout(_) | TransportError::Network(_) => true,
            TransportError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// Reads `choices[0].message.content` from a chat-completions response body.
pub fn parse_completion_body(body: &str) -> Result<ChatResponse, TransportError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| TransportError::Protocol(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(serde_json::Value::as_str)
        .map(|content| ChatResponse { content: content.to_string() })
        .ok_or_else(|| TransportError::Protocol("missing choices[0].message.content".into()))
}

/// Anything that can complete a [`ChatRequest`].
pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError>;

    fn deterministic(&self) -> bool {
        false
    }
}

impl<T: ChatTransport + ?Sized> ChatTransport for Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        (**self).complete(request)
    }

    fn deterministic(&self) -> bool {
        (**self).deterministic()
    }
}

/// Hex SHA-256 of the request text; names replay fixture files.
pub fn fixture_key(request_text: &str) -> String {
    hex::encode(Sha256::digest(request_text.as_bytes()))
}

/// One recorded exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayFixture {
    pub request_text: String,
    pub raw_response: String,
}

impl ReplayFixture {
    pub fn file_name(&self) -> String {
        format!("{}.json", fixture_key(&self.request_text))
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(self.file_name());
        let mut text = canonical::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

/// Answers from a directory of recorded fixtures; a miss is an error.
#[derive(Debug, Clone, Default)]
pub struct ReplayTransport {
    fixtures: HashMap<String, ReplayFixture>,
}

impl ReplayTransport {
    pub fn from_fixtures(fixtures: impl IntoIterator<Item = ReplayFixture>) -> Self {
        ReplayTransport {
            fixtures: fixtures
                .into_iter()
                .map(|f| (fixture_key(&f.request_text), f))
                .collect(),
        }
    }

    /// Loads every `*.json` file in `dir`. Fixtures are keyed by the hash of
    /// their `request_text`, whatever the file is called.
    pub fn load(dir: &Path) -> Result<Self, TransportError> {
        let entries = std::fs::read_dir(dir).map_err(|e| TransportError::Io(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut fixtures = Vec::with_capacity(paths.len());
        for path in paths {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| TransportError::Io(format!("{}: {e}", path.display())))?;
            let fixture: ReplayFixture = serde_json::from_str(&text)
                .map_err(|e| TransportError::Io(format!("{}: {e}", path.display())))?;
            fixtures.push(fixture);
        }
        Ok(ReplayTransport::from_fixtures(fixtures))
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }
}

impl ChatTransport for ReplayTransport {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let text = request
            .user_text()
            .ok_or_else(|| TransportError::Protocol("expected one system and one user message".into()))?;
        let key = fixture_key(text);
        self.fixtures
            .get(&key)
            .map(|f| ChatResponse { content: f.raw_response.clone() })
            .ok_or(TransportError::ReplayMiss(key))
    }

    fn deterministic(&self) -> bool {
        true
    }
}

/// Passes requests to `inner` and saves every successful exchange as a
/// replay fixture.
pub struct RecordingTransport<T> {
    inner: T,
    dir: PathBuf,
}

impl<T: ChatTransport> RecordingTransport<T> {
    pub fn new(inner: T, dir: impl Into<PathBuf>) -> Self {
        RecordingTransport { inner, dir: dir.into() }
    }
}

impl<T: ChatTransport> ChatTransport for RecordingTransport<T> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let response = self.inner.complete(request)?;
        if let Some(text) = request.user_text() {
            ReplayFixture { request_text: text.to_string(), raw_response: response.content.clone() }
                .write_to(&self.dir)
                .map_err(|e| TransportError::Io(e.to_string()))?;
        }
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_body_shape() {
        let req = ChatRequest::new("gpt-3.5-turbo", 0.0, "sys".into(), "hello".into());
        assert_eq!(
            req.to_json(),
            r#"{"messages":[{"content":"sys","role":"system"},{"content":"hello","role":"user"}],"model":"gpt-3.5-turbo","temperature":0.0}"#
        );
        assert_eq!(req.user_text(), Some("hello"));
    }

    #[test]
    fn parses_first_choice() {
        let body = r#"{"id":"x","choices":[{"index":0,"message":{"role":"assistant","content":"no intent present"}},{"message":{"content":"other"}}]}"#;
        assert_eq!(parse_completion_body(body).unwrap().content, "no intent present");
        assert!(matches!(parse_completion_body(r#"{"choices":[]}"#), Err(TransportError::Protocol(_))));
        assert!(matches!(parse_completion_body("nope"), Err(TransportError::Protocol(_))));
    }

    #[test]
    fn retryable_classification() {
        assert!(TransportError::Timeout("t".into()).is_retryable());
        assert!(TransportError::Http { status: 503, body: String::new() }.is_retryable());
        assert!(TransportError::Http { status: 429, body: String::new() }.is_retryable());
        assert!(!TransportError::Http { status: 400, body: String::new() }.is_retryable());
        assert!(!TransportError::Auth("k".into()).is_retryable());
        assert!(!TransportError::ReplayMiss("h".into()).is_retryable());
    }

    #[test]
    fn replay_hits_and_misses() {
        let t = ReplayTransport::from_fixtures([ReplayFixture {
            request_text: "hi".into(),
            raw_response: "unknown intent".into(),
        }]);
        let hit = ChatRequest::new("m", 0.0, "s".into(), "hi".into());
        assert_eq!(t.complete(&hit).unwrap().content, "unknown intent");
        let miss = ChatRequest::new("m", 0.0, "s".into(), "bye".into());
        assert_eq!(t.complete(&miss), Err(TransportError::ReplayMiss(fixture_key("bye"))));
    }

    struct Echo;

    impl ChatTransport for Echo {
        fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
            Ok(ChatResponse { content: format!("echo: {}", request.user_text().unwrap()) })
        }
    }

    #[test]
    fn recording_then_replaying() {
        let dir = tempfile::tempdir().unwrap();
        let rec = RecordingTransport::new(Echo, dir.path());
        let req = ChatRequest::new("m", 0.0, "s".into(), "Deploy a network".into());
        rec.complete(&req).unwrap();
        let file = dir.path().join(format!("{}.json", fixture_key("Deploy a network")));
        assert!(file.exists());

        let replay = ReplayTransport::load(dir.path()).unwrap();
        assert_eq!(replay.len(), 1);
        assert_eq!(replay.complete(&req).unwrap().content, "echo: Deploy a network");
    }
}
