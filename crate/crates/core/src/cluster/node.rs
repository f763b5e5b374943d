use super::detector::FailureDetector;
use super::leadership::{rotation_leader, LeadershipPolicy};
use super::policy::{FormationPlan, FormationPolicy};
use super::registry::AgentRegistry;
use crate::event::{EventKind, EventRecord};
use crate::formation::{
    formation_errors, global_error, ControlLaw, ControllerConfig, FormationError, FormationGraph, FormationSpec, Vec2,
};
use crate::raft::{
    Command, Index, LogEntry, NodeId, PersistentRecord, ProposeError, RaftMessage, RaftReplica, Role, Term,
    TimeoutSource, TimerConfig,
};
use crate::simnet::FaultSchedule;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use thiserror::Error;

/// Everything that travels between nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum Wire {
    Raft(RaftMessage),
    /// Scripted leaders push their batch straight to every node.
    Broadcast { epoch: u64, seq: Index, batch: Vec<(NodeId, Vec2)> },
}

/// Controller settings shared by every node of a run.
#[derive(Debug, Clone)]
pub struct ControlContext {
    pub law: Arc<dyn ControlLaw>,
    pub policy: Arc<dyn FormationPolicy>,
    pub formation: FormationSpec,
    pub controller: ControllerConfig,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("registry has no state for agent {0}")]
    RegistryIncomplete(NodeId),
    #[error(transparent)]
    Formation(#[from] FormationError),
}

/// A leader's control step: the plan, the snapshot it was computed from,
/// and the resulting batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlRecord {
    pub snapshot: AgentRegistry,
    pub failed: BTreeSet<NodeId>,
    pub plan: FormationPlan,
    pub batch: Vec<(NodeId, Vec2)>,
}

/// Live agents of a registry, in id order.
pub fn live_agents(registry: &AgentRegistry) -> Vec<NodeId> {
    registry.agents().filter(|(_, a)| a.alive).map(|(id, _)| id).collect()
}

/// Formation plan for `registry`, with `failed` the agents known to be down.
pub fn plan_for(
    ctx: &ControlContext,
    registry: &AgentRegistry,
    failed: &BTreeSet<NodeId>,
) -> Result<FormationPlan, FormationError> {
    ctx.policy.plan(&live_agents(registry), failed, &ctx.formation)
}

/// One control step over the steered agents of the plan, on the complete
/// graph. `expected` lists agents the registry must already know about.
pub fn control_batch(
    ctx: &ControlContext,
    registry: &AgentRegistry,
    failed: &BTreeSet<NodeId>,
    expected: &BTreeSet<NodeId>,
) -> Result<ControlRecord, ControlError> {
    if let Some(&missing) = expected.iter().find(|id| !registry.contains(**id)) {
        return Err(ControlError::RegistryIncomplete(missing));
    }
    let plan = plan_for(ctx, registry, failed)?;
    let mut batch = Vec::with_capacity(plan.steered.len());
    if !plan.steered.is_empty() {
        let positions: Vec<Vec2> = plan.steered.iter().map(|id| registry.position(*id).unwrap_or(Vec2::ZERO)).collect();
        let goals: Vec<Vec2> = plan.steered.iter().map(|id| plan.goals[id]).collect();
        let graph = FormationGraph::complete(plan.steered.len())?;
        let inputs = ctx.law.inputs(&positions, &goals, &graph, &ctx.controller)?;
        let next = crate::formation::euler_step(&positions, &inputs, ctx.controller.dt)?;
        batch = plan.steered.iter().copied().zip(next).collect();
    }
    Ok(ControlRecord { snapshot: registry.clone(), failed: failed.clone(), plan, batch })
}

/// Distance of every goal-holding agent to its goal, and the global error
/// over the steered agents.
pub fn formation_metrics(registry: &AgentRegistry, plan: &FormationPlan) -> (BTreeMap<NodeId, f64>, f64) {
    let errors = plan
        .goals
        .iter()
        .filter_map(|(id, goal)| registry.position(*id).map(|p| (*id, p.distance(*goal))))
        .collect();
    let positions: Vec<Vec2> = plan.steered.iter().filter_map(|id| registry.position(*id)).collect();
    let goals: Vec<Vec2> = plan.steered.iter().map(|id| plan.goals[id]).collect();
    let total = match FormationGraph::complete(positions.len()) {
        Ok(graph) if positions.len() == goals.len() => {
            formation_errors(&positions, &goals, &graph).map(|e| global_error(&e)).unwrap_or(0.0)
        }
        _ => 0.0,
    };
    (errors, total)
}

/// What one node did in one frame.
#[derive(Debug, Clone, Default)]
pub struct FrameOutput {
    pub messages: Vec<(NodeId, Wire)>,
    pub events: Vec<EventRecord>,
    /// Committed entries applied to the registry this frame.
    pub applied: Vec<LogEntry>,
    /// Lowest log index the replica rewrote or appended this frame.
    pub log_changed_from: Option<Index>,
    pub control: Option<ControlRecord>,
}

/// `(frame, previous leader and epoch, newly failed nodes)`.
type LeaderChange = (u64, Option<(NodeId, u64)>, BTreeSet<NodeId>);

#[derive(Debug, Clone)]
struct ScriptedState {
    n: usize,
    policy: LeadershipPolicy,
    schedule: FaultSchedule,
    /// Last frame folded into `leader`/`epoch`, if any.
    seen: Option<u64>,
    leader: NodeId,
    epoch: u64,
    failed: BTreeSet<NodeId>,
}

impl ScriptedState {
    fn failed_at(&self, frame: u64) -> BTreeSet<NodeId> {
        let mut failed = self.schedule.crashed_by(frame);
        failed.extend(self.policy.failed_leader(frame, self.n));
        failed
    }

    /// Advances to `frame`. Returns the leader changes and failures seen on
    /// the way.
    fn advance(&mut self, frame: u64) -> Vec<LeaderChange> {
        let mut changes = Vec::new();
        let start = self.seen.map_or(0, |f| f + 1);
        for f in start..=frame {
            let failed = self.failed_at(f);
            let leader = rotation_leader(f, self.n, &self.policy, &self.schedule.crashed_by(f));
            let newly: BTreeSet<NodeId> = failed.difference(&self.failed).copied().collect();
            let previous = self.seen.map(|_| (self.leader, self.epoch));
            if self.seen.is_none() || leader != self.leader {
                self.epoch += 1;
                self.leader = leader;
                changes.push((f, previous, newly));
            } else if !newly.is_empty() {
                changes.push((f, None, newly));
            }
            self.failed = failed;
            self.seen = Some(f);
        }
        changes
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Raft(Box<RaftReplica>),
    Scripted(ScriptedState),
}

/// One cluster node: its agent registry plus either a Raft replica or the
/// scripted leadership clock.
#[derive(Debug, Clone)]
pub struct ClusterNode {
    id: NodeId,
    registry: AgentRegistry,
    engine: Engine,
    detector: FailureDetector,
    known_leader: Option<NodeId>,
    pending_changes: Vec<Command>,
}

impl ClusterNode {
    /// A fresh Raft node. `members` is the voting configuration it starts
    /// with; `initial_agents` are the agents every registry starts from.
    pub fn raft(
        id: NodeId,
        members: BTreeSet<NodeId>,
        initial_agents: &BTreeSet<NodeId>,
        timers: TimerConfig,
        seed: u64,
        frame: u64,
    ) -> Self {
        let timeouts = TimeoutSource::Staggered { seed, slot: id.0 };
        let replica = RaftReplica::new(id, members, timers, timeouts, frame);
        Self::with_engine(id, initial_agents, seed, timers.election_timeout_min, Engine::Raft(Box::new(replica)))
    }

    /// A Raft node rebuilt from stable storage after a crash.
    pub fn restore_raft(
        id: NodeId,
        record: PersistentRecord,
        members: BTreeSet<NodeId>,
        initial_agents: &BTreeSet<NodeId>,
        timers: TimerConfig,
        seed: u64,
        frame: u64,
    ) -> Self {
        let timeouts = TimeoutSource::Staggered { seed, slot: id.0 };
        let replica = RaftReplica::restore(record, id, members, timers, timeouts, frame);
        Self::with_engine(id, initial_agents, seed, timers.election_timeout_min, Engine::Raft(Box::new(replica)))
    }

    /// A node of a scripted-leadership cluster of `n` nodes.
    pub fn scripted(id: NodeId, n: usize, policy: LeadershipPolicy, schedule: FaultSchedule, seed: u64) -> Self {
        let agents: BTreeSet<NodeId> = (0..n as u64).map(NodeId).collect();
        let state = ScriptedState {
            n,
            policy,
            schedule,
            seen: None,
            leader: NodeId(0),
            epoch: 0,
            failed: BTreeSet::new(),
        };
        Self::with_engine(id, &agents, seed, u64::MAX, Engine::Scripted(state))
    }

    fn with_engine(id: NodeId, agents: &BTreeSet<NodeId>, seed: u64, detect_after: u64, engine: Engine) -> Self {
        Self {
            id,
            registry: AgentRegistry::initial(seed, agents.iter().copied()),
            engine,
            detector: FailureDetector::new(detect_after),
            known_leader: None,
            pending_changes: Vec::new(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn registry(&self) -> &AgentRegistry {
        &self.registry
    }

    pub fn replica(&self) -> Option<&RaftReplica> {
        match &self.engine {
            Engine::Raft(r) => Some(r),
            Engine::Scripted(_) => None,
        }
    }

    pub fn replica_mut(&mut self) -> Option<&mut RaftReplica> {
        match &mut self.engine {
            Engine::Raft(r) => Some(r),
            Engine::Scripted(_) => None,
        }
    }

    /// Current term, or the scripted leadership epoch.
    pub fn term(&self) -> Term {
        match &self.engine {
            Engine::Raft(r) => r.term(),
            Engine::Scripted(s) => Term(s.epoch),
        }
    }

    pub fn is_leader(&self) -> bool {
        match &self.engine {
            Engine::Raft(r) => r.role() == Role::Leader,
            Engine::Scripted(s) => s.seen.is_some() && s.leader == self.id,
        }
    }

    /// Queues a membership change; whichever node leads will propose it.
    pub fn request_change(&mut self, change: Command) {
        self.pending_changes.push(change);
    }

    pub fn pending_changes(&self) -> &[Command] {
        &self.pending_changes
    }

    /// Handles inbound messages, advances timers, applies what committed,
    /// and runs the controller when this node leads.
    pub fn node_frame(&mut self, inbound: Vec<(NodeId, Wire)>, frame: u64, ctx: &ControlContext) -> FrameOutput {
        match self.engine {
            Engine::Raft(_) => self.raft_frame(inbound, frame, ctx),
            Engine::Scripted(_) => self.scripted_frame(inbound, frame, ctx),
        }
    }

    /// Applies committed entries to the registry, in order.
    pub fn apply_committed(&mut self, entries: &[LogEntry]) {
        for entry in entries {
            self.registry.apply(entry);
        }
    }

    fn scripted_frame(&mut self, inbound: Vec<(NodeId, Wire)>, frame: u64, ctx: &ControlContext) -> FrameOutput {
        let mut out = FrameOutput::default();
        for (_, wire) in inbound {
            if let Wire::Broadcast { seq, batch, .. } = wire {
                self.registry.apply_broadcast(seq, &batch);
            }
        }
        let Engine::Scripted(state) = &mut self.engine else { unreachable!() };
        for (f, previous, newly) in state.advance(frame) {
            if state.leader != self.id {
                continue;
            }
            let reported_term = previous.map_or(Term(state.epoch), |(_, e)| Term(e));
            for failed in newly {
                out.events.push(EventRecord::new(EventKind::Failure, failed, reported_term, f));
            }
            if previous.is_none_or(|(leader, _)| leader != self.id) {
                out.events.push(EventRecord::new(EventKind::Leader, self.id, Term(state.epoch), f));
            }
        }
        if state.leader != self.id {
            return out;
        }
        let (n, epoch, failed) = (state.n, state.epoch, state.failed.clone());
        if let Ok(record) = control_batch(ctx, &self.registry, &failed, &BTreeSet::new()) {
            if !record.batch.is_empty() {
                let seq = self.registry.applied_index() + 1;
                self.registry.apply_broadcast(seq, &record.batch);
                for peer in (0..n as u64).map(NodeId).filter(|&p| p != self.id) {
                    out.messages.push((peer, Wire::Broadcast { epoch, seq, batch: record.batch.clone() }));
                }
            }
            out.control = Some(record);
        }
        out
    }

    fn raft_frame(&mut self, inbound: Vec<(NodeId, Wire)>, frame: u64, ctx: &ControlContext) -> FrameOutput {
        let mut out = FrameOutput::default();
        let Engine::Raft(replica) = &mut self.engine else { unreachable!() };
        let mut outbox = Vec::new();
        for (from, wire) in inbound {
            if let Wire::Raft(msg) = wire {
                self.detector.heard(from, msg.term(), frame);
                outbox.extend(replica.handle_message(from, msg, frame));
            }
        }
        outbox.extend(replica.tick(frame));

        let mut became_leader = false;
        for (role, term) in replica.take_transitions() {
            match role {
                Role::Candidate => out.events.push(EventRecord::new(EventKind::Candidate, self.id, term, frame)),
                Role::Leader => {
                    out.events.push(EventRecord::new(EventKind::Leader, self.id, term, frame));
                    became_leader = true;
                }
                Role::Follower => {}
            }
        }
        if became_leader && replica.role() == Role::Leader {
            // commits everything from earlier terms before the first batch
            let _ = replica.propose(Command::Noop);
            outbox.extend(replica.replicate(frame));
            let peers: Vec<NodeId> = replica.peers().collect();
            self.detector.restart(peers, frame);
        }
        if let Some(hint) = replica.leader_hint().filter(|&h| h != self.id) {
            if self.known_leader != Some(hint) {
                self.known_leader = Some(hint);
            }
        }

        let applied = replica.drain_committed();
        for entry in &applied {
            self.registry.apply(entry);
        }
        out.applied = applied;

        self.pending_changes.retain(|change| match change {
            Command::AddMember(id) => !replica.members().contains(id),
            Command::RemoveMember(id) => replica.members().contains(id),
            _ => false,
        });
        if replica.role() == Role::Leader {
            if let Some(change) = self.pending_changes.first().cloned() {
                match replica.change_membership(change) {
                    Ok(_) => {
                        self.pending_changes.remove(0);
                        outbox.extend(replica.replicate(frame));
                    }
                    Err(ProposeError::InvalidCommand(_)) => {
                        self.pending_changes.remove(0);
                    }
                    Err(_) => {}
                }
            }
        }

        let caught_up = self.registry.applied_index() == replica.last_index();
        if replica.role() == Role::Leader && replica.has_committed_in_term() && caught_up {
            let expected = replica.members().clone();
            if let Ok(record) = control_batch(ctx, &self.registry, &BTreeSet::new(), &expected) {
                if !record.batch.is_empty() && replica.propose(Command::PositionBatch(record.batch.clone())).is_ok() {
                    outbox.extend(replica.replicate(frame));
                }
                out.control = Some(record);
            }
        }
        let applied = replica.drain_committed();
        for entry in &applied {
            self.registry.apply(entry);
        }
        out.applied.extend(applied);

        let watched: Vec<NodeId> = if replica.role() == Role::Leader {
            replica.peers().collect()
        } else {
            self.known_leader.into_iter().collect()
        };
        for (peer, term) in self.detector.check(watched, frame) {
            out.events.push(EventRecord::new(EventKind::Failure, peer, term, frame));
        }
        out.log_changed_from = replica.take_log_changes();
        out.messages = outbox.into_iter().map(|(to, msg)| (to, Wire::Raft(msg))).collect();
        out
    }
}
