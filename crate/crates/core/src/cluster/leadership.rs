use crate::raft::NodeId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// How the cluster picks the node that computes positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeadershipPolicy {
    /// Leadership rotates every `period` frames, bypassing elections. From
    /// `failure_frame` on, the leader of that frame counts as failed and is
    /// skipped by moving to the next index.
    ScriptedRotation { period: u64, failure_frame: Option<u64> },
    /// Leaders come from Raft elections.
    RaftElection,
}

impl LeadershipPolicy {
    pub fn is_scripted(&self) -> bool {
        matches!(self, LeadershipPolicy::ScriptedRotation { .. })
    }

    /// The leader this policy itself fails, once `frame` has reached its
    /// failure frame.
    pub fn failed_leader(&self, frame: u64, n: usize) -> Option<NodeId> {
        match *self {
            LeadershipPolicy::ScriptedRotation { period, failure_frame: Some(ff) } if frame >= ff && n > 0 => {
                Some(NodeId((ff / period.max(1)) % n as u64))
            }
            _ => None,
        }
    }
}

/// Leader index under [`LeadershipPolicy::ScriptedRotation`], counting only
/// the failure built into the policy.
pub fn scripted_rotation_leader(frame: u64, n: usize, policy: &LeadershipPolicy) -> NodeId {
    rotation_leader(frame, n, policy, &BTreeSet::new())
}

/// Rotation leader skipping `failed` nodes (plus the policy's own failed
/// leader, if any). Falls back to the plain rotation index when every node
/// has failed. `RaftElection` always yields node 0.
pub fn rotation_leader(frame: u64, n: usize, policy: &LeadershipPolicy, failed: &BTreeSet<NodeId>) -> NodeId {
    let LeadershipPolicy::ScriptedRotation { period, .. } = *policy else {
        return NodeId(0);
    };
    if n == 0 {
        return NodeId(0);
    }
    let mut failed = failed.clone();
    failed.extend(policy.failed_leader(frame, n));
    let n = n as u64;
    let rotation = |f: u64| (f / period.max(1)) % n;
    let mut index = rotation(frame);
    for _ in 0..n {
        if !failed.contains(&NodeId(index)) {
            return NodeId(index);
        }
        index = (index + 1) % n;
    }
    NodeId(rotation(frame))
}
