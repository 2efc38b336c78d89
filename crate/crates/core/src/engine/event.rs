//! Append-only event records with co-location witnessing.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Speak,
    Move,
    Wait,
    System,
}

/// One entry in the world's event log. `(tick, seq)` totally orders the log;
/// `witnesses` is frozen at emission time to the occupants of `location`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub tick: u64,
    pub seq: u32,
    pub actor: String,
    pub location: String,
    pub kind: EventKind,
    pub description: String,
    pub witnesses: BTreeSet<String>,
}

impl Event {
    pub fn order_key(&self) -> (u64, u32) {
        (self.tick, self.seq)
    }

    pub fn witnessed_by(&self, agent: &str) -> bool {
        self.witnesses.contains(agent)
    }
}
