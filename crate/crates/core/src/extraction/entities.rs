//! Pattern grammar for regions, identifiers, QoS levels, frequencies and
//! numeric targets.

use std::sync::OnceLock;

use regex::{Captures, Regex};

use super::char_offset;
use crate::model::{Bound, Comparator, Entity, EntityKind, EntityValue, Span};
use crate::time::IsoDuration;

struct Grammar {
    network_id: Regex,
    plmn: Regex,
    region_named: Regex,
    region_word: Regex,
    qos_class: Regex,
    qos_level: Regex,
    five_qi: Regex,
    every: Regex,
    adverb: Regex,
    count: Regex,
    capacity_of: Regex,
}

fn grammar() -> &'static Grammar {
    static G: OnceLock<Grammar> = OnceLock::new();
    G.get_or_init(|| {
        let number = r"(\d{1,3}(?:,\d{3})+|\d+)(?:\s*(k|thousand)\b)?";
        let qualifier = r"(?:(at\s+least|no\s+less\s+than|minimum\s+of|min\.?|at\s+most|no\s+more\s+than|up\s+to|maximum\s+of|max\.?|limit(?:ed)?\s+to|cap(?:ped)?\s+at|exactly|fewer\s+than|less\s+than|below|under|more\s+than|over|above)\s+)?";
        Grammar {
            network_id: Regex::new(r"(?i)\b(?:net|nw)-[a-z0-9]+\b").unwrap(),
            plmn: Regex::new(r"\b(\d{3})-(\d{2,3})\b").unwrap(),
            region_named: Regex::new(r"(?i)\b(?:in|within|at|to|into)\s+(?:the\s+)?(region[-_ ]?[a-z0-9]+)\b").unwrap(),
            region_word: Regex::new(r"\b(?i:in|within|at)\s+(?:the\s+)?([A-Z][A-Za-z0-9]*(?:[-_][A-Za-z0-9]+)*)").unwrap(),
            qos_class: Regex::new(r"(?i)\b(urllc|embb|mmtc|miot|v2x)\b").unwrap(),
            qos_level: Regex::new(r"(?i)\b(?:qos|quality\s+of\s+service)\s+(?:level|class|tier)\s+([a-z0-9]+)\b").unwrap(),
            five_qi: Regex::new(r"(?i)\b5qi\s*(?:=|of)?\s*(\d+)\b").unwrap(),
            every: Regex::new(
                r"(?i)\bevery\s+(?:(\d+|one|two|three|four|five|six|ten|twelve|fifteen|twenty|thirty|forty-five|sixty)\s+)?(seconds?|secs?|minutes?|mins?|hours?|hrs?|days?|weeks?)\b",
            )
            .unwrap(),
            adverb: Regex::new(r"(?i)\b(hourly|daily|weekly)\b").unwrap(),
            count: Regex::new(&format!(
                r"(?i)\b{qualifier}{number}\s+((?:registered\s+)?(?:users|subscribers|ues)|(?:concurrent\s+|active\s+|established\s+)?pdu\s+sessions?|sessions|(?:capacity\s+)?units?)\b"
            ))
            .unwrap(),
            capacity_of: Regex::new(&format!(r"(?i)\bcapacity\s+(?:of|to)\s+{qualifier}{number}\b")).unwrap(),
        }
    })
}

const NOT_REGIONS: &[&str] = &[
    "The", "This", "That", "These", "Those", "It", "Its", "Order", "Case", "Addition", "Future", "Time",
    "Parallel", "Future", "Particular", "General", "Total", "Least", "Most", "Once", "First", "Which",
];

fn span(text: &str, start: usize, end: usize) -> Span {
    Span::new(char_offset(text, start), char_offset(text, end))
}

fn word_number(s: &str) -> Option<u64> {
    Some(match s.to_lowercase().as_str() {
        "one" => 1,
        "two" => 2,
        "three" => 3,
        "four" => 4,
        "five" => 5,
        "six" => 6,
        "ten" => 10,
        "twelve" => 12,
        "fifteen" => 15,
        "twenty" => 20,
        "thirty" => 30,
        "forty-five" => 45,
        "sixty" => 60,
        other => return other.parse().ok(),
    })
}

fn unit_secs(unit: &str) -> u64 {
    let u = unit.to_lowercase();
    if u.starts_with("sec") {
        1
    } else if u.starts_with("min") {
        60
    } else if u.starts_with('h') {
        3600
    } else if u.starts_with('d') {
        86_400
    } else {
        604_800
    }
}

fn parse_number(digits: &str, scale: Option<&str>) -> Option<u64> {
    let n: u64 = digits.replace(',', "").parse().ok()?;
    match scale {
        Some(_) => n.checked_mul(1000),
        None => Some(n),
    }
}

fn bound(qualifier: Option<&str>, n: u64) -> Bound {
    let q = qualifier
        .map(|q| q.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase())
        .unwrap_or_default();
    let q = q.trim_end_matches('.');
    let (comparator, value) = match q {
        "at most" | "no more than" | "up to" | "maximum of" | "max" | "limit to" | "limited to" | "cap at"
        | "capped at" => (Comparator::AtMost, n),
        "fewer than" | "less than" | "below" | "under" => (Comparator::AtMost, n.saturating_sub(1)),
        "more than" | "over" | "above" => (Comparator::AtLeast, n.saturating_add(1)),
        "exactly" => (Comparator::Exactly, n),
        _ => (Comparator::AtLeast, n),
    };
    Bound { comparator, value }
}

fn count_entity(text: &str, c: &Captures<'_>) -> Option<(Span, EntityKind, EntityValue)> {
    let whole = c.get(0)?;
    let n = parse_number(c.get(2)?.as_str(), c.get(3).map(|m| m.as_str()))?;
    let unit = c.get(4)?.as_str().to_lowercase();
    let kind = if unit.contains("session") {
        EntityKind::PduSessionsTarget
    } else if unit.contains("unit") {
        EntityKind::CapacityTarget
    } else {
        EntityKind::RegisteredUsersTarget
    };
    Some((
        span(text, whole.start(), whole.end()),
        kind,
        EntityValue::Target(bound(c.get(1).map(|m| m.as_str()), n)),
    ))
}

/// Extracts entities from `text`, ordered by span start, never overlapping.
pub fn extract_entities(text: &str) -> Vec<Entity> {
    let g = grammar();
    let mut found: Vec<(Span, EntityKind, EntityValue)> = Vec::new();

    for m in g.network_id.find_iter(text) {
        found.push((
            span(text, m.start(), m.end()),
            EntityKind::NetworkId,
            EntityValue::Identifier(m.as_str().to_lowercase()),
        ));
    }
    for c in g.plmn.captures_iter(text) {
        let m = c.get(0).unwrap();
        found.push((
            span(text, m.start(), m.end()),
            EntityKind::PlmnId,
            EntityValue::Identifier(format!("{}-{}", &c[1], &c[2])),
        ));
    }
    for c in g.region_named.captures_iter(text) {
        let m = c.get(1).unwrap();
        found.push((span(text, m.start(), m.end()), EntityKind::Region, EntityValue::Text(m.as_str().to_string())));
    }
    for c in g.region_word.captures_iter(text) {
        let m = c.get(1).unwrap();
        let word = m.as_str();
        let is_other = NOT_REGIONS.contains(&word)
            || g.network_id.is_match(word)
            || g.qos_class.is_match(word)
            || word.eq_ignore_ascii_case("region");
        if !is_other {
            found.push((span(text, m.start(), m.end()), EntityKind::Region, EntityValue::Text(word.to_string())));
        }
    }
    for m in g.qos_class.find_iter(text) {
        let canonical = match m.as_str().to_lowercase().as_str() {
            "urllc" => "URLLC",
            "embb" => "eMBB",
            "mmtc" => "mMTC",
            "miot" => "MIoT",
            _ => "V2X",
        };
        found.push((span(text, m.start(), m.end()), EntityKind::QosLevel, EntityValue::Text(canonical.into())));
    }
    for c in g.qos_level.captures_iter(text) {
        let m = c.get(0).unwrap();
        found.push((
            span(text, m.start(), m.end()),
            EntityKind::QosLevel,
            EntityValue::Text(format!("level-{}", c[1].to_lowercase())),
        ));
    }
    for c in g.five_qi.captures_iter(text) {
        let m = c.get(0).unwrap();
        found.push((span(text, m.start(), m.end()), EntityKind::QosLevel, EntityValue::Text(format!("5QI-{}", &c[1]))));
    }
    for c in g.every.captures_iter(text) {
        let m = c.get(0).unwrap();
        let n = c.get(1).map_or(Some(1), |n| word_number(n.as_str()));
        if let Some(secs) = n.filter(|n| *n > 0).and_then(|n| n.checked_mul(unit_secs(&c[2]))) {
            let d = IsoDuration(secs);
            found.push((span(text, m.start(), m.end()), EntityKind::Frequency, EntityValue::Duration(d)));
        }
    }
    for m in g.adverb.find_iter(text) {
        let secs = match m.as_str().to_lowercase().as_str() {
            "hourly" => 3600,
            "daily" => 86_400,
            _ => 604_800,
        };
        found.push((span(text, m.start(), m.end()), EntityKind::Frequency, EntityValue::Duration(IsoDuration(secs))));
    }
    for c in g.count.captures_iter(text) {
        found.extend(count_entity(text, &c));
    }
    for c in g.capacity_of.captures_iter(text) {
        let m = c.get(0).unwrap();
        if let Some(n) = parse_number(&c[2], c.get(3).map(|m| m.as_str())) {
            found.push((
                span(text, m.start(), m.end()),
                EntityKind::CapacityTarget,
                EntityValue::Target(bound(c.get(1).map(|m| m.as_str()), n)),
            ));
        }
    }

    // earliest first, longest first on ties; drop anything overlapping a kept span
    found.sort_by(|a, b| a.0.start.cmp(&b.0.start).then(b.0.end.cmp(&a.0.end)));
    let mut kept: Vec<Entity> = Vec::new();
    for (s, kind, value) in found {
        if kept.iter().any(|e| e.raw_span.overlaps(s)) {
            continue;
        }
        if let Ok(e) = Entity::new(kind, s, value) {
            kept.push(e);
        }
    }
    kept.sort_by_key(|e| e.raw_span);
    kept
}
