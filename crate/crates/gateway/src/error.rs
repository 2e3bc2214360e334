use intent_gate_core::ids::{IntentId, SessionId};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("request text is empty")]
    EmptyRequest,
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("missing or wrong API token")]
    Unauthorized,
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("session {0} expired")]
    SessionExpired(SessionId),
    #[error("unknown intent {0}")]
    UnknownIntent(IntentId),
    #[error("extraction backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("extraction backend answered with something unusable: {0}")]
    BackendResponse(String),
    #[error("cannot write the event log: {0}")]
    Journal(String),
    #[error("cannot start: {0}")]
    Setup(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl GatewayError {
    /// Stable machine-readable code carried in error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::EmptyRequest => "EmptyRequest",
            GatewayError::BadRequest(_) => "BadRequest",
            GatewayError::Unauthorized => "Unauthorized",
            GatewayError::UnknownSession(_) => "UnknownSession",
            GatewayError::SessionExpired(_) => "SessionExpired",
            GatewayError::UnknownIntent(_) => "UnknownIntent",
            GatewayError::BackendUnavailable(_) => "BackendUnavailable",
            GatewayError::BackendResponse(_) => "BackendResponse",
            GatewayError::Journal(_) => "Journal",
            GatewayError::Setup(_) => "Setup",
            GatewayError::Internal(_) => "Internal",
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            GatewayError::EmptyRequest | GatewayError::BadRequest(_) => 400,
            GatewayError::Unauthorized => 401,
            GatewayError::UnknownSession(_) | GatewayError::UnknownIntent(_) => 404,
            GatewayError::SessionExpired(_) => 410,
            GatewayError::BackendResponse(_) => 502,
            GatewayError::BackendUnavailable(_) => 503,
            GatewayError::Journal(_) | GatewayError::Setup(_) | GatewayError::Internal(_) => 500,
        }
    }
}
