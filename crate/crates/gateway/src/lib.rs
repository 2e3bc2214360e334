//! HTTP gateway and command-line front end over `intent-gate-core`.
//!
//! [`service::Gateway`] owns the engine, the sessions and the event log and
//! runs each request through extraction, structuring, policy compilation and
//! execution. [`http`] exposes it as JSON endpoints plus a server-sent event
//! stream; [`cli`] wraps it for the terminal.

pub mod cli;
pub mod clock;
pub mod config;
pub mod error;
pub mod http;
pub mod service;
pub mod transport;

pub use config::{BackendKind, ClockKind, GatewayConfig};
pub use error::GatewayError;
pub use service::{Gateway, RequestOutcome, StreamEvent};
