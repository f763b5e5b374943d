//! Key-value override files.
//!
//! ```text
//! # comment
//! n = 6
//! frames = 1500
//! k = 1.0
//! crash 1 30
//! recover 1 60
//! add 6 40
//! ```

use super::ScenarioError;
use crate::raft::NodeId;
use std::str::FromStr;

/// A fault or membership line from an override file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleLine {
    Crash { node: NodeId, frame: u64 },
    Recover { node: NodeId, frame: u64 },
    Add { node: NodeId, frame: u64 },
}

/// Values that replace a builder's defaults. `None` keeps the default. Any
/// crash/recover line replaces the default fault schedule; any add line
/// replaces the default joins.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub agents: Option<usize>,
    pub frames: Option<u64>,
    pub gain: Option<f64>,
    pub dt: Option<f64>,
    pub radius: Option<f64>,
    pub seed: Option<u64>,
    pub heartbeat_interval: Option<u64>,
    pub election_timeout_min: Option<u64>,
    pub election_timeout_max: Option<u64>,
    /// Number of crashed agents (Scenario C).
    pub failures: Option<usize>,
    pub failure_frame: Option<u64>,
    pub period: Option<u64>,
    pub law: Option<String>,
    pub anchor_gain: Option<f64>,
    pub policy: Option<String>,
    pub schedule: Vec<ScheduleLine>,
}

fn bad(line: usize, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Config { line, reason: reason.into() }
}

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T, ScenarioError> {
    raw.parse().map_err(|_| bad(line, format!("bad value `{raw}` for `{key}`")))
}

impl Overrides {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut o = Overrides::default();
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some((key, val)) = line.split_once('=') {
                o.set(n, key.trim(), val.trim())?;
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [verb, node, frame] = parts.as_slice() else {
                return Err(bad(n, format!("expected `key = value` or `<verb> <node> <frame>`, found `{line}`")));
            };
            let node = NodeId(value(n, "node", node)?);
            let frame = value(n, "frame", frame)?;
            o.schedule.push(match *verb {
                "crash" => ScheduleLine::Crash { node, frame },
                "recover" => ScheduleLine::Recover { node, frame },
                "add" => ScheduleLine::Add { node, frame },
                other => return Err(bad(n, format!("unknown action `{other}`"))),
            });
        }
        Ok(o)
    }

    fn set(&mut self, n: usize, key: &str, val: &str) -> Result<(), ScenarioError> {
        match key {
            "n" | "agents" => self.agents = Some(value(n, key, val)?),
            "frames" => self.frames = Some(value(n, key, val)?),
            "k" | "gain" => self.gain = Some(value(n, key, val)?),
            "dt" => self.dt = Some(value(n, key, val)?),
            "radius" => self.radius = Some(value(n, key, val)?),
            "seed" => self.seed = Some(value(n, key, val)?),
            "heartbeat_interval" => self.heartbeat_interval = Some(value(n, key, val)?),
            "election_timeout_min" => self.election_timeout_min = Some(value(n, key, val)?),
            "election_timeout_max" => self.election_timeout_max = Some(value(n, key, val)?),
            "m" | "failures" => self.failures = Some(value(n, key, val)?),
            "failure_frame" => self.failure_frame = Some(value(n, key, val)?),
            "period" => self.period = Some(value(n, key, val)?),
            "law" => self.law = Some(val.to_string()),
            "anchor_gain" => self.anchor_gain = Some(value(n, key, val)?),
            "policy" => self.policy = Some(val.to_string()),
            other => return Err(bad(n, format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Later values win: every field set in `other` replaces this one's.
    pub fn merge(mut self, other: Overrides) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            agents, frames, gain, dt, radius, seed, heartbeat_interval, election_timeout_min, election_timeout_max,
            failures, failure_frame, period, law, anchor_gain, policy
        );
        if !other.schedule.is_empty() {
            self.schedule = other.schedule;
        }
        self
    }

    pub fn has_faults(&self) -> bool {
        self.schedule.iter().any(|l| !matches!(l, ScheduleLine::Add { .. }))
    }

    pub fn has_joins(&self) -> bool {
        self.schedule.iter().any(|l| matches!(l, ScheduleLine::Add { .. }))
    }
}
