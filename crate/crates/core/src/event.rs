//! Protocol event log rows (`type,node,term,frame`).

use crate::raft::{NodeId, Term};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Candidate,
    Leader,
    /// A live node detected a peer as failed.
    Failure,
    /// Fault injection crashed a node.
    SimulateFailure,
    /// Fault injection brought a node back.
    SimulateRecovery,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::Candidate => "candidate",
            EventKind::Leader => "leader",
            EventKind::Failure => "failure",
            EventKind::SimulateFailure => "simulate failure",
            EventKind::SimulateRecovery => "simulate recovery",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        [Self::Candidate, Self::Leader, Self::Failure, Self::SimulateFailure, Self::SimulateRecovery]
            .into_iter()
            .find(|k| k.label() == label)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub kind: EventKind,
    pub node: NodeId,
    pub term: Term,
    pub frame: u64,
}

impl EventRecord {
    pub fn new(kind: EventKind, node: NodeId, term: Term, frame: u64) -> Self {
        Self { kind, node, term, frame }
    }
}
