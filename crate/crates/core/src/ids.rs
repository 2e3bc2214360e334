//! Sortable identifiers.
//!
//! Every id is a ULID: 48 bits of millisecond timestamp taken from the
//! logical clock followed by 80 bits drawn from a seeded generator. Ids
//! minted by one [`IdGenerator`] are strictly increasing.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use ulid::Ulid;

use crate::time::LogicalTime;

macro_rules! ulid_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub Ulid);

        impl $name {
            pub fn ulid(self) -> Ulid {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt::Display::fmt(&self.0, f)
            }
        }

        impl FromStr for $name {
            type Err = ulid::DecodeError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Ulid::from_string(s).map($name)
            }
        }

        impl From<Ulid> for $name {
            fn from(u: Ulid) -> Self {
                $name(u)
            }
        }
    };
}

ulid_id!(
    /// Identifies a [`StructuredIntent`](crate::model::StructuredIntent) and its record.
    IntentId
);
ulid_id!(RequestId);
ulid_id!(SessionId);
ulid_id!(PolicyId);

/// Deterministic ULID source.
#[derive(Debug, Clone)]
pub struct IdGenerator {
    rng: ChaCha8Rng,
    last: Ulid,
}

impl IdGenerator {
    pub fn new(seed: u64) -> Self {
        IdGenerator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            last: Ulid::nil(),
        }
    }

    /// Mints the next id. Falls back to incrementing the previous id when the
    /// fresh one would not sort after it.
    pub fn next(&mut self, now: LogicalTime) -> Ulid {
        let random: u128 = self.rng.random::<u128>() & ((1u128 << 80) - 1);
        let candidate = Ulid::from_parts(now.millis(), random);
        let id = if candidate > self.last {
            candidate
        } else {
            self.last.increment().expect("ULID space exhausted")
        };
        self.last = id;
        id
    }

    /// Makes sure later ids sort after `seen`. Used when replaying a journal.
    pub fn observe(&mut self, seen: Ulid) {
        if seen > self.last {
            self.last = seen;
        }
    }

    pub fn intent_id(&mut self, now: LogicalTime) -> IntentId {
        IntentId(self.next(now))
    }

    pub fn request_id(&mut self, now: LogicalTime) -> RequestId {
        RequestId(self.next(now))
    }

    pub fn session_id(&mut self, now: LogicalTime) -> SessionId {
        SessionId(self.next(now))
    }

    pub fn policy_id(&mut self, now: LogicalTime) -> PolicyId {
        PolicyId(self.next(now))
    }
}
