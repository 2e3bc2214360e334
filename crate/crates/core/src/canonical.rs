//! Canonical JSON: compact, object keys sorted, no insignificant whitespace.
//!
//! Every file format and API body in the crate goes through these helpers so
//! that equal values always produce identical bytes.

use serde::de::DeserializeOwned;
use serde::Serialize;

pub fn to_value<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<serde_json::Value> {
    serde_json::to_value(value)
}

/// Serializes `value` to canonical JSON text.
pub fn to_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    // serde_json::Map is ordered by key, so a detour through Value sorts
    // struct fields as well as map entries.
    serde_json::to_string(&serde_json::to_value(value)?)
}

/// Canonical JSON with two-space indentation, for golden files and humans.
pub fn to_string_pretty<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    serde_json::to_string_pretty(&serde_json::to_value(value)?)
}

pub fn from_str<T: DeserializeOwned>(text: &str) -> serde_json::Result<T> {
    serde_json::from_str(text)
}
