//! Transport-agnostic Raft: randomized elections, log replication with
//! commitment, persistence, and single-server membership changes.

mod persist;
mod replica;
mod timeout;
mod types;

pub use persist::{decode_command, encode_command, PersistError, PersistentRecord};
pub use replica::{Outbox, ProposeError, RaftReplica, MAX_APPEND_ENTRIES};
pub use timeout::TimeoutSource;
pub use types::{Command, Index, LogEntry, NodeId, RaftMessage, Role, Term, TimerConfig};
