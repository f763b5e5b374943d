use crate::formation::Vec2;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Node identifier. Each node hosts the agent with the same id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A leader term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Term(pub u64);

impl Term {
    pub fn next(self) -> Term {
        Term(self.0 + 1)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Log position, starting at 1. Index 0 means "before the first entry".
pub type Index = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Follower,
    Candidate,
    Leader,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Follower => "follower",
            Role::Candidate => "candidate",
            Role::Leader => "leader",
        })
    }
}

/// Replicated commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Command {
    /// New positions for a set of agents, each id at most once.
    PositionBatch(Vec<(NodeId, Vec2)>),
    AddMember(NodeId),
    RemoveMember(NodeId),
    Noop,
}

impl Command {
    pub fn is_config_change(&self) -> bool {
        matches!(self, Command::AddMember(_) | Command::RemoveMember(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub term: Term,
    pub index: Index,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RaftMessage {
    RequestVote {
        term: Term,
        candidate: NodeId,
        last_log_index: Index,
        last_log_term: Term,
    },
    VoteReply {
        term: Term,
        granted: bool,
    },
    AppendEntries {
        term: Term,
        leader: NodeId,
        prev_index: Index,
        prev_term: Term,
        entries: Vec<LogEntry>,
        leader_commit: Index,
    },
    AppendReply {
        term: Term,
        success: bool,
        /// On success the highest replicated index; on failure a hint for
        /// where the follower's log may still match.
        match_index: Index,
    },
}

impl RaftMessage {
    pub fn term(&self) -> Term {
        match self {
            RaftMessage::RequestVote { term, .. }
            | RaftMessage::VoteReply { term, .. }
            | RaftMessage::AppendEntries { term, .. }
            | RaftMessage::AppendReply { term, .. } => *term,
        }
    }
}

/// Timer settings in frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimerConfig {
    pub heartbeat_interval: u64,
    pub election_timeout_min: u64,
    pub election_timeout_max: u64,
}

impl Default for TimerConfig {
    fn default() -> Self {
        Self { heartbeat_interval: 2, election_timeout_min: 6, election_timeout_max: 12 }
    }
}

impl TimerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.heartbeat_interval == 0 {
            return Err("heartbeat interval must be positive".into());
        }
        if self.election_timeout_min == 0 || self.election_timeout_min >= self.election_timeout_max {
            return Err(format!(
                "need 0 < election_timeout_min < election_timeout_max, got {} and {}",
                self.election_timeout_min, self.election_timeout_max
            ));
        }
        if self.heartbeat_interval >= self.election_timeout_min {
            return Err(format!(
                "heartbeat interval {} must be below election_timeout_min {}",
                self.heartbeat_interval, self.election_timeout_min
            ));
        }
        Ok(())
    }
}
