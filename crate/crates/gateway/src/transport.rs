//! Live chat-completions transport over HTTP.

use std::time::Duration;

use intent_gate_core::extraction::chat::{parse_completion_body, ChatRequest, ChatResponse, ChatTransport, TransportError};

use crate::config::{GatewayConfig, Secret};

/// Posts [`ChatRequest`]s to an OpenAI-style endpoint with a bearer key.
///
/// A fresh blocking client is built per call so the transport can be
/// created and dropped inside an async runtime; calls themselves must run
/// off the runtime threads.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    endpoint: String,
    key: Secret,
    timeout: Duration,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, key: Secret, timeout: Duration) -> Self {
        HttpTransport { endpoint: endpoint.into(), key, timeout }
    }

    pub fn from_config(config: &GatewayConfig) -> Result<Self, TransportError> {
        let endpoint = config
            .llm_endpoint
            .clone()
            .ok_or_else(|| TransportError::Protocol("llm_endpoint is unset".into()))?;
        let key = config.llm_key.clone().ok_or_else(|| TransportError::Auth("no API key configured".into()))?;
        Ok(HttpTransport::new(endpoint, key, Duration::from_secs(config.llm_timeout_secs)))
    }
}

fn classify_send_error(e: reqwest::Error) -> TransportError {
    if e.is_timeout() {
        TransportError::Timeout(e.to_string())
    } else {
        TransportError::Network(e.to_string())
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let response = client
            .post(&self.endpoint)
            .bearer_auth(&self.key.0)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(request.to_json())
            .send()
            .map_err(classify_send_error)?;
        let status = response.status().as_u16();
        let body = response.text().map_err(classify_send_error)?;
        match status {
            200..=299 => parse_completion_body(&body),
            401 | 403 => Err(TransportError::Auth(format!("HTTP {status}"))),
            _ => Err(TransportError::Http { status, body }),
        }
    }
}
