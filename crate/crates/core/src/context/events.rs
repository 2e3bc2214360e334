//! Append-only event log.
//!
//! The file starts with a header line `{"format":"intent-gate-events","version":1}`
//! followed by one canonical-JSON event per line. A final line without a
//! trailing newline is a torn write and is ignored on read.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::ids::SessionId;
use crate::time::LogicalTime;

pub const FORMAT: &str = "intent-gate-events";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
}

impl Header {
    pub fn current() -> Self {
        Header { format: FORMAT.into(), version: VERSION }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SessionCreated,
    RequestRecorded,
    IntentSubmitted,
    IntentExecuted,
    Tick,
    NetworkObserved,
    SubscriptionCancelled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub ts: LogicalTime,
    pub session_id: Option<SessionId>,
    pub event_kind: EventKind,
    pub payload: serde_json::Value,
}

impl Event {
    pub fn new<P: Serialize>(
        ts: LogicalTime,
        session_id: Option<SessionId>,
        event_kind: EventKind,
        payload: &P,
    ) -> serde_json::Result<Self> {
        Ok(Event { ts, session_id, event_kind, payload: canonical::to_value(payload)? })
    }

    pub fn to_line(&self) -> String {
        canonical::to_string(self).expect("events serialize")
    }
}

#[derive(Debug, Error)]
pub enum EventLogError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("unsupported event log header: {0}")]
    Header(String),
}

/// Parses a whole log. Empty input yields no events.
pub fn parse_events(text: &str) -> Result<Vec<Event>, EventLogError> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        // header itself was torn
        None => return Ok(Vec::new()),
    };
    let mut lines = complete.lines().enumerate();
    let (_, header_line) = lines.next().expect("at least one complete line");
    let header: Header =
        serde_json::from_str(header_line).map_err(|e| EventLogError::Header(e.to_string()))?;
    if header != Header::current() {
        return Err(EventLogError::Header(header_line.to_string()));
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EventLogError::Malformed { line: i + 1, reason: e.to_string() })
        })
        .collect()
}

pub fn read_events(path: &Path) -> Result<Vec<Event>, EventLogError> {
    match std::fs::read_to_string(path) {
        Ok(text) => parse_events(&text),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(source) => Err(EventLogError::Io { path: path.to_path_buf(), source }),
    }
}

/// Writer half of the log; every append is flushed before returning.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl EventLog {
    /// Opens (or creates) the log and returns the events already in it.
    pub fn open(path: impl Into<PathBuf>) -> Result<(EventLog, Vec<Event>), EventLogError> {
        let path = path.into();
        let io = |source| EventLogError::Io { path: path.clone(), source };
        let existing = std::fs::read_to_string(&path).or_else(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Ok(String::new())
            } else {
                Err(io(e))
            }
        })?;
        let events = parse_events(&existing)?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        // rewrite from scratch when the file is new or ends in a torn line
        let clean = !existing.is_empty() && existing.ends_with('\n');
        let file = if clean {
            OpenOptions::new().append(true).open(&path).map_err(io)?
        } else {
            File::create(&path).map_err(io)?
        };
        let mut log = EventLog { path: path.clone(), out: BufWriter::new(file) };
        if !clean {
            log.write_line(&canonical::to_string(&Header::current()).expect("header serializes"))?;
            for e in &events {
                log.write_line(&e.to_line())?;
            }
        }
        Ok((log, events))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn write_line(&mut self, line: &str) -> Result<(), EventLogError> {
        let io = |source| EventLogError::Io { path: self.path.clone(), source };
        self.out.write_all(line.as_bytes()).map_err(io)?;
        self.out.write_all(b"\n").map_err(io)?;
        self.out.flush().map_err(io)
    }

    pub fn append(&mut self, event: &Event) -> Result<(), EventLogError> {
        self.write_line(&event.to_line())
    }
}
