//! Logical time and ISO-8601 durations.
//!
//! Core logic never reads the wall clock. Every operation that needs "now"
//! takes a [`LogicalTime`] from the caller.

use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Seconds since an arbitrary, caller-chosen epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogicalTime(pub u64);

impl LogicalTime {
    pub const ZERO: LogicalTime = LogicalTime(0);

    pub fn secs(self) -> u64 {
        self.0
    }

    pub fn millis(self) -> u64 {
        self.0.saturating_mul(1000)
    }
}

impl Add<IsoDuration> for LogicalTime {
    type Output = LogicalTime;

    fn add(self, rhs: IsoDuration) -> LogicalTime {
        LogicalTime(self.0.saturating_add(rhs.0))
    }
}

impl Sub for LogicalTime {
    type Output = IsoDuration;

    fn sub(self, rhs: LogicalTime) -> IsoDuration {
        IsoDuration(self.0.saturating_sub(rhs.0))
    }
}

impl fmt::Display for LogicalTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t+{}s", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid ISO-8601 duration `{0}`")]
pub struct DurationParseError(pub String);

/// A whole-second duration, rendered in ISO-8601 form (`PT10M`, `P1DT2H`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct IsoDuration(pub u64);

impl IsoDuration {
    pub const fn from_secs(secs: u64) -> Self {
        IsoDuration(secs)
    }

    pub const fn from_mins(mins: u64) -> Self {
        IsoDuration(mins * 60)
    }

    pub const fn from_hours(hours: u64) -> Self {
        IsoDuration(hours * 3600)
    }

    pub fn secs(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Plain-English rendering for user-facing notices: "15 minutes", "1 day 2 hours".
    pub fn describe(self) -> String {
        if self.0 == 0 {
            return "0 seconds".into();
        }
        let mut rest = self.0;
        let mut parts = Vec::new();
        for (unit, size) in [("week", 604_800), ("day", 86_400), ("hour", 3600), ("minute", 60), ("second", 1)] {
            let n = rest / size;
            rest %= size;
            if n > 0 {
                parts.push(format!("{n} {unit}{}", if n == 1 { "" } else { "s" }));
            }
        }
        parts.join(" ")
    }
}

impl fmt::Display for IsoDuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut rest = self.0;
        let days = rest / 86_400;
        rest %= 86_400;
        let hours = rest / 3600;
        rest %= 3600;
        let mins = rest / 60;
        let secs = rest % 60;

        f.write_str("P")?;
        if days > 0 {
            write!(f, "{days}D")?;
        }
        if hours == 0 && mins == 0 && secs == 0 {
            if days == 0 {
                f.write_str("T0S")?;
            }
            return Ok(());
        }
        f.write_str("T")?;
        if hours > 0 {
            write!(f, "{hours}H")?;
        }
        if mins > 0 {
            write!(f, "{mins}M")?;
        }
        if secs > 0 {
            write!(f, "{secs}S")?;
        }
        Ok(())
    }
}

impl FromStr for IsoDuration {
    type Err = DurationParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || DurationParseError(s.to_string());
        let body = s.strip_prefix('P').ok_or_else(err)?;
        if body.is_empty() {
            return Err(err());
        }
        let (date, time) = match body.split_once('T') {
            Some((d, t)) if !t.is_empty() => (d, Some(t)),
            Some(_) => return Err(err()),
            None => (body, None),
        };

        let mut total: u64 = 0;
        let mut take = |part: &str, units: &[(char, u64)]| -> Result<(), DurationParseError> {
            let mut digits = String::new();
            let mut next_unit = 0;
            for c in part.chars() {
                if c.is_ascii_digit() {
                    digits.push(c);
                    continue;
                }
                let pos = units[next_unit..]
                    .iter()
                    .position(|(u, _)| *u == c)
                    .ok_or_else(err)?;
                if digits.is_empty() {
                    return Err(err());
                }
                let n: u64 = digits.parse().map_err(|_| err())?;
                let (_, scale) = units[next_unit + pos];
                total = n
                    .checked_mul(scale)
                    .and_then(|v| total.checked_add(v))
                    .ok_or_else(err)?;
                next_unit += pos + 1;
                digits.clear();
            }
            if digits.is_empty() {
                Ok(())
            } else {
                Err(err())
            }
        };
        take(date, &[('W', 604_800), ('D', 86_400)])?;
        if let Some(time) = time {
            take(time, &[('H', 3600), ('M', 60), ('S', 1)])?;
        }
        Ok(IsoDuration(total))
    }
}

impl Serialize for IsoDuration {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IsoDuration {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_common_durations() {
        assert_eq!(IsoDuration::from_mins(10).to_string(), "PT10M");
        assert_eq!(IsoDuration::from_mins(15).to_string(), "PT15M");
        assert_eq!(IsoDuration::from_hours(1).to_string(), "PT1H");
        assert_eq!(IsoDuration::from_secs(86_400).to_string(), "P1D");
        assert_eq!(IsoDuration::from_secs(93_784).to_string(), "P1DT2H3M4S");
        assert_eq!(IsoDuration::from_secs(0).to_string(), "PT0S");
    }

    #[test]
    fn parses_and_rejects() {
        assert_eq!("PT10M".parse::<IsoDuration>().unwrap(), IsoDuration(600));
        assert_eq!("P1W".parse::<IsoDuration>().unwrap(), IsoDuration(604_800));
        assert_eq!("PT1H30M".parse::<IsoDuration>().unwrap(), IsoDuration(5400));
        for bad in ["", "P", "PT", "10M", "PTM", "PT10", "PT10M5H", "P1H"] {
            assert!(bad.parse::<IsoDuration>().is_err(), "{bad}");
        }
    }

    #[test]
    fn display_parse_round_trip() {
        for secs in [0, 1, 59, 60, 61, 3599, 3600, 86_399, 86_400, 604_800, 1_000_003] {
            let d = IsoDuration(secs);
            assert_eq!(d.to_string().parse::<IsoDuration>().unwrap(), d);
        }
    }

    #[test]
    fn describes_for_humans() {
        assert_eq!(IsoDuration::from_mins(15).describe(), "15 minutes");
        assert_eq!(IsoDuration::from_secs(93_784).describe(), "1 day 2 hours 3 minutes 4 seconds");
        assert_eq!(IsoDuration::from_hours(1).describe(), "1 hour");
    }
}
