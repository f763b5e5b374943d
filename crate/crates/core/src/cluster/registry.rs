use crate::formation::Vec2;
use crate::raft::{Command, Index, LogEntry, NodeId};
use crate::rng::spawn_position;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Vec2,
    pub alive: bool,
}

/// Replicated agent state: a pure function of the applied command prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRegistry {
    agents: BTreeMap<NodeId, AgentState>,
    applied_index: Index,
    seed: u64,
}

impl AgentRegistry {
    /// Every member at its seeded spawn position, nothing applied.
    pub fn initial(seed: u64, members: impl IntoIterator<Item = NodeId>) -> Self {
        let agents = members
            .into_iter()
            .map(|id| (id, AgentState { position: spawn_position(seed, id), alive: true }))
            .collect();
        Self { agents, applied_index: 0, seed }
    }

    pub fn applied_index(&self) -> Index {
        self.applied_index
    }

    pub fn get(&self, id: NodeId) -> Option<&AgentState> {
        self.agents.get(&id)
    }

    pub fn position(&self, id: NodeId) -> Option<Vec2> {
        self.agents.get(&id).map(|a| a.position)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.agents.contains_key(&id)
    }

    pub fn agents(&self) -> impl Iterator<Item = (NodeId, &AgentState)> {
        self.agents.iter().map(|(&id, a)| (id, a))
    }

    pub fn members(&self) -> Vec<NodeId> {
        self.agents.keys().copied().collect()
    }

    /// Agents marked not alive (removed from the formation).
    pub fn failed(&self) -> BTreeSet<NodeId> {
        self.agents.iter().filter(|(_, a)| !a.alive).map(|(&id, _)| id).collect()
    }

    pub fn positions(&self) -> BTreeMap<NodeId, Vec2> {
        self.agents.iter().map(|(&id, a)| (id, a.position)).collect()
    }

    fn set_positions(&mut self, batch: &[(NodeId, Vec2)]) {
        for (id, p) in batch {
            if let Some(agent) = self.agents.get_mut(id) {
                agent.position = *p;
            }
        }
    }

    /// Applies one committed entry. Entries at or below the applied index
    /// are ignored.
    pub fn apply(&mut self, entry: &LogEntry) {
        if entry.index <= self.applied_index {
            return;
        }
        match &entry.command {
            Command::PositionBatch(batch) => self.set_positions(batch),
            Command::AddMember(id) => {
                let spawn = spawn_position(self.seed, *id);
                self.agents.entry(*id).or_insert(AgentState { position: spawn, alive: true }).alive = true;
            }
            Command::RemoveMember(id) => {
                if let Some(agent) = self.agents.get_mut(id) {
                    agent.alive = false;
                }
            }
            Command::Noop => {}
        }
        self.applied_index = entry.index;
    }

    /// Applies a directly broadcast batch carrying sequence number `seq`.
    pub fn apply_broadcast(&mut self, seq: Index, batch: &[(NodeId, Vec2)]) {
        if seq <= self.applied_index {
            return;
        }
        self.set_positions(batch);
        self.applied_index = seq;
    }

    /// Adds an agent outside the log (scripted runs).
    pub fn admit(&mut self, id: NodeId) {
        let spawn = spawn_position(self.seed, id);
        self.agents.entry(id).or_insert(AgentState { position: spawn, alive: true });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raft::Term;

    fn entry(index: Index, command: Command) -> LogEntry {
        LogEntry { term: Term(1), index, command }
    }

    #[test]
    fn empty_apply_is_noop() {
        let reg = AgentRegistry::initial(3, [NodeId(0), NodeId(1)]);
        let copy = reg.clone();
        let mut applied = reg;
        for e in [] as [LogEntry; 0] {
            applied.apply(&e);
        }
        assert_eq!(applied, copy);
    }

    #[test]
    fn entries_apply_once_in_order() {
        let mut reg = AgentRegistry::initial(3, [NodeId(0), NodeId(1)]);
        let batch = Command::PositionBatch(vec![(NodeId(1), Vec2::new(0.5, 0.5))]);
        reg.apply(&entry(1, batch));
        assert_eq!(reg.position(NodeId(1)), Some(Vec2::new(0.5, 0.5)));
        reg.apply(&entry(1, Command::PositionBatch(vec![(NodeId(1), Vec2::ZERO)])));
        assert_eq!(reg.position(NodeId(1)), Some(Vec2::new(0.5, 0.5)), "replay ignored");
        reg.apply(&entry(2, Command::AddMember(NodeId(3))));
        assert_eq!(reg.position(NodeId(3)), Some(spawn_position(3, NodeId(3))));
        reg.apply(&entry(3, Command::RemoveMember(NodeId(0))));
        assert_eq!(reg.failed(), BTreeSet::from([NodeId(0)]));
        assert_eq!(reg.applied_index(), 3);
    }
}
