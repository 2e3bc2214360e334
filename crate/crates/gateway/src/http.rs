//! JSON-over-HTTP API and the server-sent event stream.

use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use intent_gate_core::canonical;
use intent_gate_core::ids::{IntentId, SessionId};
use intent_gate_core::time::IsoDuration;
use serde::{Deserialize, Serialize};
use tokio_stream::wrappers::BroadcastStream;
use tokio_stream::{Stream, StreamExt};

use crate::error::GatewayError;
use crate::service::Gateway;

/// A response body in canonical JSON.
pub struct CanonicalJson<T>(pub StatusCode, pub T);

impl<T: Serialize> IntoResponse for CanonicalJson<T> {
    fn into_response(self) -> Response {
        match canonical::to_string(&self.1) {
            Ok(body) => (self.0, [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], body).into_response(),
            Err(e) => GatewayError::Internal(e.to_string()).into_response(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl IntoResponse for GatewayError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        CanonicalJson(status, ErrorBody { error: self.code().to_string(), message: self.to_string() }).into_response()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NewSession {
    pub session_id: SessionId,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubmitBody {
    pub text: String,
}

#[derive(Debug, Deserialize)]
pub struct StreamFilter {
    pub session: Option<String>,
}

fn parse_id<T: std::str::FromStr>(raw: &str, what: &str) -> Result<T, GatewayError> {
    raw.parse().map_err(|_| GatewayError::BadRequest(format!("`{raw}` is not a valid {what} id")))
}

async fn create_session(State(gw): State<Arc<Gateway>>) -> Result<Response, GatewayError> {
    let session_id = gw.create_session()?;
    Ok(CanonicalJson(StatusCode::CREATED, NewSession { session_id }).into_response())
}

async fn submit(
    State(gw): State<Arc<Gateway>>,
    Path(session): Path<String>,
    body: axum::body::Bytes,
) -> Result<Response, GatewayError> {
    let session: SessionId = parse_id(&session, "session")?;
    let body: SubmitBody =
        serde_json::from_slice(&body).map_err(|e| GatewayError::BadRequest(format!("expected {{\"text\": ...}}: {e}")))?;
    let outcome = gw.handle_request(session, body.text).await?;
    Ok(CanonicalJson(StatusCode::OK, outcome).into_response())
}

async fn intent(State(gw): State<Arc<Gateway>>, Path(id): Path<String>) -> Result<Response, GatewayError> {
    let id: IntentId = parse_id(&id, "intent")?;
    Ok(CanonicalJson(StatusCode::OK, gw.record(id)?).into_response())
}

async fn report(State(gw): State<Arc<Gateway>>, Path(id): Path<String>) -> Result<Response, GatewayError> {
    let id: IntentId = parse_id(&id, "intent")?;
    Ok(CanonicalJson(StatusCode::OK, gw.report(id)?).into_response())
}

async fn networks(State(gw): State<Arc<Gateway>>) -> Response {
    CanonicalJson(StatusCode::OK, gw.inventory()).into_response()
}

async fn healthz(State(gw): State<Arc<Gateway>>) -> Response {
    CanonicalJson(StatusCode::OK, gw.health()).into_response()
}

async fn events(
    State(gw): State<Arc<Gateway>>,
    Query(filter): Query<StreamFilter>,
) -> Result<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>, GatewayError> {
    let session: Option<SessionId> = filter.session.as_deref().map(|s| parse_id(s, "session")).transpose()?;
    // a lagging client skips what it missed rather than ending the stream
    let stream = BroadcastStream::new(gw.subscribe()).filter_map(move |item| {
        let e = item.ok()?;
        if session.is_some() && e.session_id != session {
            return None;
        }
        let data = canonical::to_string(&e).ok()?;
        Some(Ok(SseEvent::default().event(e.event.clone()).id(e.seq.to_string()).data(data)))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::new().interval(Duration::from_secs(15))))
}

async fn require_token(State(gw): State<Arc<Gateway>>, request: Request, next: Next) -> Response {
    if let Some(token) = &gw.config().api_token {
        let expected = format!("Bearer {}", token.0);
        let given = request.headers().get(header::AUTHORIZATION).and_then(|v| v.to_str().ok());
        if given != Some(expected.as_str()) {
            return GatewayError::Unauthorized.into_response();
        }
    }
    next.run(request).await
}

pub fn router(gw: Arc<Gateway>) -> Router {
    let protected = Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/requests", post(submit))
        .route("/v1/intents/{id}", get(intent))
        .route("/v1/intents/{id}/report", get(report))
        .route("/v1/networks", get(networks))
        .route("/v1/events", get(events))
        .route_layer(middleware::from_fn_with_state(gw.clone(), require_token));
    Router::new().route("/v1/healthz", get(healthz)).merge(protected).with_state(gw)
}

/// Drives the scheduler every `tick_interval_secs` until the task is
/// dropped. Does nothing when the interval is zero.
pub fn spawn_ticker(gw: Arc<Gateway>) -> Option<tokio::task::JoinHandle<()>> {
    let secs = gw.config().tick_interval_secs;
    if secs == 0 {
        return None;
    }
    Some(tokio::spawn(async move {
        let mut interval = tokio::time::interval(Duration::from_secs(secs));
        interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        loop {
            interval.tick().await;
            if let Err(e) = gw.tick(IsoDuration::from_secs(secs)) {
                tracing::error!("scheduler tick failed: {e}");
            }
        }
    }))
}

/// Serves on `listener` until `shutdown` resolves.
pub async fn serve(
    gw: Arc<Gateway>,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let ticker = spawn_ticker(gw.clone());
    let result = axum::serve(listener, router(gw)).with_graceful_shutdown(shutdown).await;
    if let Some(t) = ticker {
        t.abort();
    }
    result
}
