//! Line-oriented text encoding of a replica's durable state.
//!
//! ```text
//! term=<int> voted_for=<int|none>
//! <index> <term> noop
//! <index> <term> add <node>
//! <index> <term> remove <node>
//! <index> <term> pos [<agent>:<x>:<y> ...]
//! ```
//!
//! Coordinates use Rust's shortest round-trip float formatting, so a
//! decode of an encode reproduces every bit.

use super::types::{Command, LogEntry, NodeId, Term};
use crate::formation::Vec2;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct PersistentRecord {
    pub term: Term,
    pub voted_for: Option<NodeId>,
    pub log: Vec<LogEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct PersistError {
    pub line: usize,
    pub reason: String,
}

fn err(line: usize, reason: impl Into<String>) -> PersistError {
    PersistError { line, reason: reason.into() }
}

pub fn encode_command(command: &Command) -> String {
    match command {
        Command::Noop => "noop".to_string(),
        Command::AddMember(id) => format!("add {id}"),
        Command::RemoveMember(id) => format!("remove {id}"),
        Command::PositionBatch(batch) => {
            let mut out = String::from("pos");
            for (id, p) in batch {
                let _ = write!(out, " {id}:{:?}:{:?}", p.x, p.y);
            }
            out
        }
    }
}

fn parse_u64(s: &str, what: &str, line: usize) -> Result<u64, PersistError> {
    s.parse().map_err(|_| err(line, format!("bad {what} `{s}`")))
}

fn parse_coord(s: &str, line: usize) -> Result<f64, PersistError> {
    let v: f64 = s.parse().map_err(|_| err(line, format!("bad coordinate `{s}`")))?;
    if !v.is_finite() {
        return Err(err(line, format!("non-finite coordinate `{s}`")));
    }
    Ok(v)
}

pub fn decode_command(text: &str, line: usize) -> Result<Command, PersistError> {
    let mut parts = text.split_whitespace();
    let tag = parts.next().ok_or_else(|| err(line, "missing command"))?;
    let rest: Vec<&str> = parts.collect();
    match (tag, rest.as_slice()) {
        ("noop", []) => Ok(Command::Noop),
        ("add", [id]) => Ok(Command::AddMember(NodeId(parse_u64(id, "node id", line)?))),
        ("remove", [id]) => Ok(Command::RemoveMember(NodeId(parse_u64(id, "node id", line)?))),
        ("pos", items) => {
            let mut batch = Vec::with_capacity(items.len());
            for item in items {
                let fields: Vec<&str> = item.split(':').collect();
                let [id, x, y] = fields.as_slice() else {
                    return Err(err(line, format!("bad position `{item}`")));
                };
                let id = NodeId(parse_u64(id, "agent id", line)?);
                if batch.iter().any(|(seen, _)| *seen == id) {
                    return Err(err(line, format!("agent {id} listed twice")));
                }
                batch.push((id, Vec2::new(parse_coord(x, line)?, parse_coord(y, line)?)));
            }
            Ok(Command::PositionBatch(batch))
        }
        _ => Err(err(line, format!("unknown command `{text}`"))),
    }
}

impl fmt::Display for PersistentRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.voted_for {
            Some(v) => writeln!(f, "term={} voted_for={v}", self.term)?,
            None => writeln!(f, "term={} voted_for=none", self.term)?,
        }
        for entry in &self.log {
            writeln!(f, "{} {} {}", entry.index, entry.term, encode_command(&entry.command))?;
        }
        Ok(())
    }
}

impl FromStr for PersistentRecord {
    type Err = PersistError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty record"))?;
        let mut fields = header.split_whitespace();
        let (Some(term), Some(vote), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(err(1, "header must be `term=<int> voted_for=<int|none>`"));
        };
        let term = term.strip_prefix("term=").ok_or_else(|| err(1, "missing term="))?;
        let term = Term(parse_u64(term, "term", 1)?);
        let vote = vote.strip_prefix("voted_for=").ok_or_else(|| err(1, "missing voted_for="))?;
        let voted_for = match vote {
            "none" => None,
            v => Some(NodeId(parse_u64(v, "vote", 1)?)),
        };
        let mut log = Vec::new();
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, ' ');
            let index = parse_u64(parts.next().unwrap_or(""), "index", n)?;
            let entry_term = Term(parse_u64(parts.next().unwrap_or(""), "term", n)?);
            let command = decode_command(parts.next().unwrap_or(""), n)?;
            if index != log.len() as u64 + 1 {
                return Err(err(n, format!("expected index {}, found {index}", log.len() + 1)));
            }
            if entry_term > term {
                return Err(err(n, format!("entry term {entry_term} exceeds current term {term}")));
            }
            log.push(LogEntry { term: entry_term, index, command });
        }
        Ok(Self { term, voted_for, log })
    }
}
