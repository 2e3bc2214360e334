//! Time source for request stamps and scheduler ticks.

use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use intent_gate_core::time::{IsoDuration, LogicalTime};

use crate::config::ClockKind;

/// Readings never decrease, and [`Clock::stamp`] strictly increases.
#[derive(Debug)]
pub struct Clock {
    kind: ClockKind,
    last: Mutex<u64>,
}

fn wall_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl Clock {
    pub fn new(kind: ClockKind, start: LogicalTime) -> Self {
        Clock { kind, last: Mutex::new(start.secs()) }
    }

    pub fn kind(&self) -> ClockKind {
        self.kind
    }

    fn last(&self) -> std::sync::MutexGuard<'_, u64> {
        self.last.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// The current reading, without claiming it.
    pub fn now(&self) -> LogicalTime {
        let last = *self.last();
        match self.kind {
            ClockKind::Logical => LogicalTime(last),
            ClockKind::Wall => LogicalTime(last.max(wall_secs())),
        }
    }

    /// A reading later than every reading handed out before.
    pub fn stamp(&self) -> LogicalTime {
        let mut last = self.last();
        *last = match self.kind {
            ClockKind::Logical => *last + 1,
            ClockKind::Wall => (*last + 1).max(wall_secs()),
        };
        LogicalTime(*last)
    }

    /// Claims the time for a scheduler tick. The logical clock moves by
    /// `step`; the wall clock ignores it.
    pub fn tick(&self, step: IsoDuration) -> LogicalTime {
        let mut last = self.last();
        *last = match self.kind {
            ClockKind::Logical => *last + step.secs(),
            ClockKind::Wall => (*last).max(wall_secs()),
        };
        LogicalTime(*last)
    }

    /// Moves the clock up to `seen` after a restart.
    pub fn resume(&self, seen: LogicalTime) {
        let mut last = self.last();
        *last = (*last).max(seen.secs());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logical_stamps_count_up_from_start() {
        let c = Clock::new(ClockKind::Logical, LogicalTime(100));
        assert_eq!(c.stamp(), LogicalTime(101));
        assert_eq!(c.stamp(), LogicalTime(102));
        assert_eq!(c.tick(IsoDuration::from_mins(10)), LogicalTime(702));
        assert_eq!(c.now(), LogicalTime(702));
        c.resume(LogicalTime(50));
        assert_eq!(c.now(), LogicalTime(702));
    }

    #[test]
    fn wall_stamps_strictly_increase_within_a_second() {
        let c = Clock::new(ClockKind::Wall, LogicalTime::ZERO);
        let a = c.stamp();
        let b = c.stamp();
        let t = c.tick(IsoDuration::from_hours(1));
        assert!(b > a);
        assert!(t >= b && t.secs() < b.secs() + 5);
    }
}
