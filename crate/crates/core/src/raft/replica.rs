use super::persist::PersistentRecord;
use super::types::{Command, Index, LogEntry, NodeId, RaftMessage, Role, Term, TimerConfig};
use super::timeout::TimeoutSource;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Outbound messages produced by one replica call.
pub type Outbox = Vec<(NodeId, RaftMessage)>;

/// Cap on entries carried by a single AppendEntries.
pub const MAX_APPEND_ENTRIES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProposeError {
    #[error("not the leader (leader hint: {0:?})")]
    NotLeader(Option<NodeId>),
    #[error("a membership change is still uncommitted")]
    ChangeInProgress,
    #[error("leader has not committed an entry in its term yet")]
    LeaderNotReady,
    #[error("invalid command: {0}")]
    InvalidCommand(String),
}

/// One node's Raft state machine. Time is supplied by the caller as a
/// frame number; nothing here blocks or reads a clock.
#[derive(Debug, Clone)]
pub struct RaftReplica {
    id: NodeId,
    role: Role,
    current_term: Term,
    voted_for: Option<NodeId>,
    log: Vec<LogEntry>,
    commit_index: Index,
    last_applied: Index,
    base_members: BTreeSet<NodeId>,
    members: BTreeSet<NodeId>,
    leader_hint: Option<NodeId>,
    election_deadline: u64,
    heartbeat_deadline: u64,
    next_index: BTreeMap<NodeId, Index>,
    match_index: BTreeMap<NodeId, Index>,
    votes: BTreeSet<NodeId>,
    timers: TimerConfig,
    timeouts: TimeoutSource,
    first_modified: Option<Index>,
    transitions: Vec<(Role, Term)>,
}

impl RaftReplica {
    /// A fresh follower. `members` is the initial voting configuration; a
    /// joining node passes the configuration it is being added to.
    pub fn new(id: NodeId, members: BTreeSet<NodeId>, timers: TimerConfig, timeouts: TimeoutSource, now: u64) -> Self {
        let mut replica = Self {
            id,
            role: Role::Follower,
            current_term: Term(0),
            voted_for: None,
            log: Vec::new(),
            commit_index: 0,
            last_applied: 0,
            members: members.clone(),
            base_members: members,
            leader_hint: None,
            election_deadline: 0,
            heartbeat_deadline: 0,
            next_index: BTreeMap::new(),
            match_index: BTreeMap::new(),
            votes: BTreeSet::new(),
            timers,
            timeouts,
            first_modified: None,
            transitions: Vec::new(),
        };
        replica.reset_election_deadline(now);
        replica
    }

    /// Rebuilds a follower from persisted state. Volatile state starts over:
    /// the commit index is relearned from the leader.
    pub fn restore(
        record: PersistentRecord,
        id: NodeId,
        members: BTreeSet<NodeId>,
        timers: TimerConfig,
        timeouts: TimeoutSource,
        now: u64,
    ) -> Self {
        let mut replica = Self::new(id, members, timers, timeouts, now);
        replica.current_term = record.term;
        replica.voted_for = record.voted_for;
        replica.log = record.log;
        replica.first_modified = (!replica.log.is_empty()).then_some(1);
        replica.recompute_members();
        replica
    }

    pub fn persist(&self) -> PersistentRecord {
        PersistentRecord { term: self.current_term, voted_for: self.voted_for, log: self.log.clone() }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn term(&self) -> Term {
        self.current_term
    }

    pub fn voted_for(&self) -> Option<NodeId> {
        self.voted_for
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn commit_index(&self) -> Index {
        self.commit_index
    }

    pub fn last_applied(&self) -> Index {
        self.last_applied
    }

    pub fn leader_hint(&self) -> Option<NodeId> {
        self.leader_hint
    }

    pub fn members(&self) -> &BTreeSet<NodeId> {
        &self.members
    }

    pub fn peers(&self) -> impl Iterator<Item = NodeId> + '_ {
        let id = self.id;
        self.members.iter().copied().filter(move |&m| m != id)
    }

    /// Votes or acknowledgements needed under the current configuration.
    pub fn quorum_size(&self) -> usize {
        self.members.len() / 2 + 1
    }

    pub fn election_deadline(&self) -> u64 {
        self.election_deadline
    }

    /// Overrides the next election deadline.
    pub fn set_election_deadline(&mut self, frame: u64) {
        self.election_deadline = frame;
    }

    pub fn timers(&self) -> &TimerConfig {
        &self.timers
    }

    pub fn next_index(&self, peer: NodeId) -> Option<Index> {
        self.next_index.get(&peer).copied()
    }

    pub fn match_index(&self, peer: NodeId) -> Option<Index> {
        self.match_index.get(&peer).copied()
    }

    pub fn last_index(&self) -> Index {
        self.log.len() as Index
    }

    pub fn last_term(&self) -> Term {
        self.log.last().map_or(Term(0), |e| e.term)
    }

    fn term_at(&self, index: Index) -> Option<Term> {
        match index {
            0 => Some(Term(0)),
            i => self.log.get(i as usize - 1).map(|e| e.term),
        }
    }

    /// Whether the leader has committed an entry from its own term, which
    /// is when it knows every earlier entry is committed too.
    pub fn has_committed_in_term(&self) -> bool {
        self.role == Role::Leader && self.term_at(self.commit_index) == Some(self.current_term)
    }

    /// Lowest log index rewritten or appended since the previous call.
    pub fn take_log_changes(&mut self) -> Option<Index> {
        self.first_modified.take()
    }

    /// Role transitions (with the term they happened in) since the previous call.
    pub fn take_transitions(&mut self) -> Vec<(Role, Term)> {
        std::mem::take(&mut self.transitions)
    }

    fn mark_modified(&mut self, index: Index) {
        self.first_modified = Some(self.first_modified.map_or(index, |m| m.min(index)));
    }

    fn reset_election_deadline(&mut self, frame: u64) {
        let timeout = self.timeouts.draw(frame, self.timers.election_timeout_min, self.timers.election_timeout_max);
        self.election_deadline = frame + timeout;
    }

    fn recompute_members(&mut self) {
        let mut members = self.base_members.clone();
        for entry in &self.log {
            apply_config(&mut members, &entry.command);
        }
        self.set_members(members);
    }

    fn set_members(&mut self, members: BTreeSet<NodeId>) {
        self.members = members;
        if self.role == Role::Leader {
            let next = self.last_index() + 1;
            let peers: Vec<NodeId> = self.peers().collect();
            self.next_index.retain(|p, _| peers.contains(p));
            self.match_index.retain(|p, _| peers.contains(p));
            for p in peers {
                self.next_index.entry(p).or_insert(next);
                self.match_index.entry(p).or_insert(0);
            }
        }
    }

    /// Advances timers. Followers and candidates past their deadline start
    /// an election; a leader past its heartbeat deadline replicates.
    pub fn tick(&mut self, frame: u64) -> Outbox {
        match self.role {
            Role::Leader => {
                if frame >= self.heartbeat_deadline {
                    self.heartbeat_deadline = frame + self.timers.heartbeat_interval;
                    self.broadcast_append()
                } else {
                    Vec::new()
                }
            }
            Role::Follower | Role::Candidate => {
                if frame >= self.election_deadline {
                    self.start_election(frame)
                } else {
                    Vec::new()
                }
            }
        }
    }

    /// Sends AppendEntries to every peer now instead of at the next
    /// heartbeat. No-op unless leader.
    pub fn replicate(&mut self, frame: u64) -> Outbox {
        if self.role != Role::Leader {
            return Vec::new();
        }
        self.heartbeat_deadline = frame + self.timers.heartbeat_interval;
        self.broadcast_append()
    }

    fn start_election(&mut self, frame: u64) -> Outbox {
        self.reset_election_deadline(frame);
        if !self.members.contains(&self.id) {
            // not a voter (yet): wait to be added
            return Vec::new();
        }
        self.current_term = self.current_term.next();
        self.role = Role::Candidate;
        self.voted_for = Some(self.id);
        self.leader_hint = None;
        self.votes = BTreeSet::from([self.id]);
        self.transitions.push((Role::Candidate, self.current_term));
        if self.votes.len() >= self.quorum_size() {
            return self.become_leader(frame);
        }
        let request = RaftMessage::RequestVote {
            term: self.current_term,
            candidate: self.id,
            last_log_index: self.last_index(),
            last_log_term: self.last_term(),
        };
        self.peers().map(|p| (p, request.clone())).collect()
    }

    fn become_leader(&mut self, frame: u64) -> Outbox {
        self.role = Role::Leader;
        self.leader_hint = Some(self.id);
        self.votes.clear();
        self.next_index.clear();
        self.match_index.clear();
        self.set_members(self.members.clone());
        self.transitions.push((Role::Leader, self.current_term));
        self.heartbeat_deadline = frame + self.timers.heartbeat_interval;
        self.advance_commit();
        self.broadcast_append()
    }

    fn become_follower(&mut self, term: Term, leader: Option<NodeId>, frame: u64) {
        if term > self.current_term {
            self.current_term = term;
            self.voted_for = None;
        }
        let was_leader = self.role == Role::Leader;
        if self.role != Role::Follower {
            self.role = Role::Follower;
            self.transitions.push((Role::Follower, self.current_term));
        }
        self.votes.clear();
        self.next_index.clear();
        self.match_index.clear();
        self.leader_hint = leader;
        if was_leader {
            self.reset_election_deadline(frame);
        }
    }

    fn broadcast_append(&self) -> Outbox {
        self.peers().filter_map(|p| self.append_for(p).map(|m| (p, m))).collect()
    }

    fn append_for(&self, peer: NodeId) -> Option<RaftMessage> {
        let next = *self.next_index.get(&peer)?;
        let prev_index = next - 1;
        let prev_term = self.term_at(prev_index)?;
        let entries = self
            .log
            .iter()
            .skip(prev_index as usize)
            .take(MAX_APPEND_ENTRIES)
            .cloned()
            .collect();
        Some(RaftMessage::AppendEntries {
            term: self.current_term,
            leader: self.id,
            prev_index,
            prev_term,
            entries,
            leader_commit: self.commit_index,
        })
    }

    fn log_up_to_date(&self, last_log_index: Index, last_log_term: Term) -> bool {
        (last_log_term, last_log_index) >= (self.last_term(), self.last_index())
    }

    pub fn handle_message(&mut self, from: NodeId, msg: RaftMessage, frame: u64) -> Outbox {
        if msg.term() > self.current_term {
            self.become_follower(msg.term(), None, frame);
        }
        match msg {
            RaftMessage::RequestVote { term, candidate, last_log_index, last_log_term } => {
                let granted = term == self.current_term
                    && self.voted_for.is_none_or(|v| v == candidate)
                    && self.log_up_to_date(last_log_index, last_log_term);
                if granted {
                    self.voted_for = Some(candidate);
                    self.reset_election_deadline(frame);
                }
                vec![(from, RaftMessage::VoteReply { term: self.current_term, granted })]
            }
            RaftMessage::VoteReply { term, granted } => {
                if self.role == Role::Candidate && term == self.current_term && granted && self.members.contains(&from) {
                    self.votes.insert(from);
                    if self.votes.len() >= self.quorum_size() {
                        return self.become_leader(frame);
                    }
                }
                Vec::new()
            }
            RaftMessage::AppendEntries { term, leader, prev_index, prev_term, entries, leader_commit } => {
                if term < self.current_term {
                    let reply = RaftMessage::AppendReply { term: self.current_term, success: false, match_index: 0 };
                    return vec![(from, reply)];
                }
                if self.role != Role::Follower {
                    self.become_follower(term, Some(leader), frame);
                }
                self.leader_hint = Some(leader);
                self.reset_election_deadline(frame);
                let (success, match_index) = self.accept_entries(prev_index, prev_term, entries, leader_commit);
                vec![(from, RaftMessage::AppendReply { term: self.current_term, success, match_index })]
            }
            RaftMessage::AppendReply { term, success, match_index } => {
                if self.role != Role::Leader || term != self.current_term {
                    return Vec::new();
                }
                let Some(&matched) = self.match_index.get(&from) else {
                    return Vec::new();
                };
                if success {
                    let matched = matched.max(match_index.min(self.last_index()));
                    self.match_index.insert(from, matched);
                    self.next_index.insert(from, matched + 1);
                    self.advance_commit();
                    if self.last_index() - matched >= MAX_APPEND_ENTRIES as Index {
                        // catching up: keep the pipe full
                        return self.append_for(from).map(|m| vec![(from, m)]).unwrap_or_default();
                    }
                    Vec::new()
                } else {
                    let next = self.next_index[&from];
                    let backed_off = next.saturating_sub(1).min(match_index + 1).max(matched + 1).max(1);
                    self.next_index.insert(from, backed_off);
                    self.append_for(from).map(|m| vec![(from, m)]).unwrap_or_default()
                }
            }
        }
    }

    /// Follower-side consistency check and append. Returns (success, match index or hint).
    fn accept_entries(
        &mut self,
        prev_index: Index,
        prev_term: Term,
        entries: Vec<LogEntry>,
        leader_commit: Index,
    ) -> (bool, Index) {
        if prev_index > self.last_index() {
            return (false, self.last_index());
        }
        if self.term_at(prev_index) != Some(prev_term) {
            return (false, prev_index - 1);
        }
        if entries.iter().enumerate().any(|(k, e)| e.index != prev_index + 1 + k as Index) {
            return (false, prev_index);
        }
        let last_new = prev_index + entries.len() as Index;
        let mut config_changed = false;
        for entry in entries {
            let slot = entry.index as usize - 1;
            if let Some(existing) = self.log.get(slot) {
                if existing.term == entry.term {
                    continue;
                }
                config_changed |= self.log[slot..].iter().any(|e| e.command.is_config_change());
                self.log.truncate(slot);
            }
            self.mark_modified(entry.index);
            config_changed |= entry.command.is_config_change();
            self.log.push(entry);
        }
        if config_changed {
            self.recompute_members();
        }
        let commit = leader_commit.min(last_new);
        if commit > self.commit_index {
            self.commit_index = commit;
        }
        (true, last_new)
    }

    fn advance_commit(&mut self) {
        if self.role != Role::Leader {
            return;
        }
        let quorum = self.quorum_size();
        for index in (self.commit_index + 1..=self.last_index()).rev() {
            if self.term_at(index) != Some(self.current_term) {
                break;
            }
            let acks = self
                .members
                .iter()
                .filter(|&&m| {
                    if m == self.id {
                        true
                    } else {
                        self.match_index.get(&m).is_some_and(|&mi| mi >= index)
                    }
                })
                .count();
            if acks >= quorum {
                self.commit_index = index;
                break;
            }
        }
    }

    /// Appends a command as the leader. Membership commands go through
    /// [`RaftReplica::change_membership`].
    pub fn propose(&mut self, command: Command) -> Result<Index, ProposeError> {
        if self.role != Role::Leader {
            return Err(ProposeError::NotLeader(self.leader_hint));
        }
        match &command {
            Command::AddMember(_) | Command::RemoveMember(_) => return self.change_membership(command),
            Command::PositionBatch(batch) => {
                let ids: BTreeSet<NodeId> = batch.iter().map(|(id, _)| *id).collect();
                if ids.len() != batch.len() {
                    return Err(ProposeError::InvalidCommand("agent listed twice in batch".into()));
                }
            }
            Command::Noop => {}
        }
        Ok(self.append_local(command))
    }

    /// Single-server membership change. The new configuration is in effect
    /// as soon as the entry is in the log.
    pub fn change_membership(&mut self, change: Command) -> Result<Index, ProposeError> {
        if self.role != Role::Leader {
            return Err(ProposeError::NotLeader(self.leader_hint));
        }
        match change {
            Command::AddMember(id) if self.members.contains(&id) => {
                return Err(ProposeError::InvalidCommand(format!("{id} is already a member")))
            }
            Command::RemoveMember(id) if id == self.id => {
                return Err(ProposeError::InvalidCommand("leader cannot remove itself".into()))
            }
            Command::RemoveMember(id) if !self.members.contains(&id) => {
                return Err(ProposeError::InvalidCommand(format!("{id} is not a member")))
            }
            Command::AddMember(_) | Command::RemoveMember(_) => {}
            _ => return Err(ProposeError::InvalidCommand("not a membership change".into())),
        }
        let pending = self.log[self.commit_index as usize..].iter().any(|e| e.command.is_config_change());
        if pending {
            return Err(ProposeError::ChangeInProgress);
        }
        if !self.has_committed_in_term() {
            return Err(ProposeError::LeaderNotReady);
        }
        let mut members = self.members.clone();
        apply_config(&mut members, &change);
        let index = self.append_local(change);
        self.set_members(members);
        self.advance_commit();
        Ok(index)
    }

    fn append_local(&mut self, command: Command) -> Index {
        let index = self.last_index() + 1;
        self.log.push(LogEntry { term: self.current_term, index, command });
        self.mark_modified(index);
        self.advance_commit();
        index
    }

    /// Committed entries not yet handed out, in index order, each once.
    pub fn drain_committed(&mut self) -> Vec<LogEntry> {
        let from = self.last_applied as usize;
        let to = self.commit_index as usize;
        self.last_applied = self.commit_index;
        self.log[from..to].to_vec()
    }
}

fn apply_config(members: &mut BTreeSet<NodeId>, command: &Command) {
    match command {
        Command::AddMember(id) => {
            members.insert(*id);
        }
        Command::RemoveMember(id) => {
            members.remove(id);
        }
        _ => {}
    }
}
