use super::monitor::{SafetyMonitor, Violation};
use super::spec::ScenarioSpec;
use super::ScenarioError;
use crate::cluster::{
    formation_metrics, plan_for, ClusterNode, ControlContext, DurableStore, FailurePolicyRegistry, Wire,
};
use crate::event::EventRecord;
use crate::formation::{check_stability, ControlLawRegistry, FormationGraph, Vec2};
use crate::raft::{Command, Index, LogEntry, NodeId, Role, Term};
use crate::simnet::SimNet;
use std::collections::{BTreeMap, BTreeSet};

/// Metrics for one frame, taken from the reference view: the running node
/// with the highest applied index (lowest id on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame: u64,
    pub positions: BTreeMap<NodeId, Vec2>,
    /// Distance of each goal-holding agent to its assigned goal.
    pub errors: BTreeMap<NodeId, f64>,
    /// Agents the controller drives this frame.
    pub steered: Vec<NodeId>,
    pub global_error: f64,
    /// Node leading at the end of the frame (highest term wins).
    pub leader: Option<NodeId>,
    /// The leader's quorum size.
    pub quorum: Option<usize>,
}

/// One node's registry, sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeView {
    pub frame: u64,
    pub node: NodeId,
    pub applied_index: Index,
    pub positions: BTreeMap<NodeId, Vec2>,
}

/// A node's state at the end of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSnapshot {
    pub node: NodeId,
    pub running: bool,
    /// `None` for scripted nodes.
    pub role: Option<Role>,
    pub term: Term,
    pub commit_index: Index,
    pub log: Vec<LogEntry>,
    pub members: BTreeSet<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub label: String,
    pub seed: u64,
    pub frames: Vec<FrameRecord>,
    pub events: Vec<EventRecord>,
    pub final_positions: BTreeMap<NodeId, Vec2>,
    pub views: Vec<NodeView>,
    pub nodes: Vec<NodeSnapshot>,
    pub violations: Vec<Violation>,
}

impl RunRecord {
    pub fn node(&self, id: NodeId) -> Option<&NodeSnapshot> {
        self.nodes.iter().find(|n| n.node == id)
    }
}

struct Slot {
    node: Option<ClusterNode>,
    store: DurableStore,
}

fn validate(spec: &ScenarioSpec) -> Result<ControlContext, ScenarioError> {
    if spec.agents == 0 {
        return Err(ScenarioError::Invalid("at least one agent is required".into()));
    }
    spec.timers.validate().map_err(ScenarioError::Invalid)?;
    if spec.leadership.is_scripted() && !spec.joins.is_empty() {
        return Err(ScenarioError::Invalid("runtime joins need elected leadership".into()));
    }
    let mut seen: BTreeSet<NodeId> = (0..spec.agents as u64).map(NodeId).collect();
    for &(id, _) in &spec.joins {
        if !seen.insert(id) {
            return Err(ScenarioError::Invalid(format!("node {id} joins twice or already exists")));
        }
    }
    let law = ControlLawRegistry::default().create(&spec.law, &spec.law_params)?;
    let policy = FailurePolicyRegistry::default()
        .get(&spec.failure_policy)
        .ok_or_else(|| ScenarioError::Invalid(format!("unknown failure policy `{}`", spec.failure_policy)))?;
    let formation = crate::formation::FormationSpec::new(
        spec.max_agents(),
        spec.formation.radius,
        spec.formation.center,
        spec.formation.phase,
    )?;
    let graph = FormationGraph::complete(spec.max_agents())?;
    check_stability(law.as_ref(), &graph, &spec.controller)?;
    Ok(ControlContext { law, policy, formation, controller: spec.controller })
}

/// Runs a scenario frame by frame: faults, delivery, then every running
/// node in id order, then metrics.
pub fn run(spec: &ScenarioSpec) -> Result<RunRecord, ScenarioError> {
    let ctx = validate(spec)?;
    let scripted = spec.leadership.is_scripted();
    let initial: BTreeSet<NodeId> = (0..spec.agents as u64).map(NodeId).collect();
    let mut net: SimNet<Wire> = SimNet::new(spec.net);
    let mut slots: BTreeMap<NodeId, Slot> = BTreeMap::new();
    for &id in &initial {
        let node = if scripted {
            ClusterNode::scripted(id, spec.agents, spec.leadership, spec.faults.clone(), spec.seed)
        } else {
            ClusterNode::raft(id, initial.clone(), &initial, spec.timers, spec.seed, 0)
        };
        slots.insert(id, Slot { node: Some(node), store: DurableStore::new() });
    }
    if let Some(first) = spec.bootstrap {
        let (min, settle) = (spec.timers.election_timeout_min, spec.timers.election_timeout_min + 2);
        for (&id, slot) in slots.iter_mut() {
            if let Some(replica) = slot.node.as_mut().and_then(|n| n.replica_mut()) {
                let deadline = if id == first { min } else { replica.election_deadline().max(settle) };
                replica.set_election_deadline(deadline);
            }
        }
    }
    let mut monitor = SafetyMonitor::new();
    let mut record = RunRecord {
        label: spec.label.clone(),
        seed: spec.seed,
        frames: Vec::with_capacity(spec.frames as usize),
        events: Vec::new(),
        final_positions: BTreeMap::new(),
        views: Vec::new(),
        nodes: Vec::new(),
        violations: Vec::new(),
    };

    for frame in 0..spec.frames {
        let terms: BTreeMap<NodeId, Term> = slots
            .iter()
            .map(|(&id, s)| (id, s.node.as_ref().map_or(s.store.term(), |n| n.term())))
            .collect();
        let fault_events = net.apply_faults(&spec.faults, frame, &|id| terms.get(&id).copied().unwrap_or(Term(0)));
        monitor.observe_events(&fault_events);
        record.events.extend(fault_events);

        for (&id, slot) in slots.iter_mut() {
            let alive = net.is_alive(id);
            if scripted {
                continue;
            }
            match (&slot.node, alive) {
                (Some(_), false) => {
                    slot.node = None;
                    monitor.node_down(id);
                }
                (None, true) => {
                    let restored = slot.store.load().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
                    slot.node = Some(ClusterNode::restore_raft(
                        id,
                        restored,
                        initial.clone(),
                        &initial,
                        spec.timers,
                        spec.seed,
                        frame,
                    ));
                }
                _ => {}
            }
        }

        for &(joiner, _) in spec.joins.iter().filter(|(_, f)| *f == frame) {
            let members = slots
                .values()
                .filter_map(|s| s.node.as_ref().and_then(|n| n.replica()))
                .max_by_key(|r| (r.term(), r.last_index()))
                .map_or(initial.clone(), |r| r.members().clone());
            let node = ClusterNode::raft(joiner, members, &initial, spec.timers, spec.seed, frame);
            slots.insert(joiner, Slot { node: Some(node), store: DurableStore::new() });
            for slot in slots.values_mut() {
                if let Some(n) = slot.node.as_mut().filter(|n| n.id() != joiner) {
                    n.request_change(Command::AddMember(joiner));
                }
            }
        }

        let mut inbox: BTreeMap<NodeId, Vec<(NodeId, Wire)>> = BTreeMap::new();
        for envelope in net.step_frame(frame) {
            inbox.entry(envelope.to).or_default().push((envelope.from, envelope.payload));
        }

        for (&id, slot) in slots.iter_mut() {
            if !net.is_alive(id) {
                continue;
            }
            let Some(node) = slot.node.as_mut() else { continue };
            let out = node.node_frame(inbox.remove(&id).unwrap_or_default(), frame, &ctx);
            for (to, wire) in &out.messages {
                net.send(id, *to, wire.clone(), frame);
            }
            if let Some(replica) = node.replica() {
                slot.store.sync(replica, out.log_changed_from);
            }
            monitor.observe_node(frame, node, &out);
            record.events.extend(out.events);
        }

        let running: Vec<&ClusterNode> =
            slots.iter().filter(|(id, _)| net.is_alive(**id)).filter_map(|(_, s)| s.node.as_ref()).collect();
        record.frames.push(frame_record(spec, &ctx, frame, &running));
        if frame % spec.view_interval.max(1) == 0 {
            for node in &running {
                record.views.push(NodeView {
                    frame,
                    node: node.id(),
                    applied_index: node.registry().applied_index(),
                    positions: node.registry().positions(),
                });
            }
        }
    }

    monitor.finish(slots.iter().filter(|(id, _)| net.is_alive(**id)).filter_map(|(_, s)| s.node.as_ref()));
    record.final_positions = record.frames.last().map(|f| f.positions.clone()).unwrap_or_default();
    record.nodes = slots
        .iter()
        .map(|(&id, slot)| {
            let running = net.is_alive(id) && slot.node.is_some();
            match slot.node.as_ref().and_then(|n| n.replica()) {
                Some(r) => NodeSnapshot {
                    node: id,
                    running,
                    role: Some(r.role()),
                    term: r.term(),
                    commit_index: r.commit_index(),
                    log: r.log().to_vec(),
                    members: r.members().clone(),
                },
                None => NodeSnapshot {
                    node: id,
                    running,
                    role: None,
                    term: slot.node.as_ref().map_or(slot.store.term(), |n| n.term()),
                    commit_index: 0,
                    log: Vec::new(),
                    members: BTreeSet::new(),
                },
            }
        })
        .collect();
    record.violations = monitor.into_violations();
    Ok(record)
}

/// Failed set the scripted engine works with at `frame`.
fn scripted_failed(spec: &ScenarioSpec, frame: u64) -> BTreeSet<NodeId> {
    let mut failed = spec.faults.crashed_by(frame);
    failed.extend(spec.leadership.failed_leader(frame, spec.agents));
    failed
}

fn frame_record(spec: &ScenarioSpec, ctx: &ControlContext, frame: u64, running: &[&ClusterNode]) -> FrameRecord {
    let reference = running
        .iter()
        .copied()
        .max_by_key(|n| (n.registry().applied_index(), std::cmp::Reverse(n.id())));
    let leader = running
        .iter()
        .filter(|n| n.is_leader())
        .max_by_key(|n| (n.term(), std::cmp::Reverse(n.id())))
        .copied();
    let Some(reference) = reference else {
        return FrameRecord {
            frame,
            positions: BTreeMap::new(),
            errors: BTreeMap::new(),
            steered: Vec::new(),
            global_error: 0.0,
            leader: None,
            quorum: None,
        };
    };
    let failed = if spec.leadership.is_scripted() { scripted_failed(spec, frame) } else { BTreeSet::new() };
    let registry = reference.registry();
    let (errors, global_error, steered) = match plan_for(ctx, registry, &failed) {
        Ok(plan) => {
            let (errors, e) = formation_metrics(registry, &plan);
            (errors, e, plan.steered)
        }
        Err(_) => (BTreeMap::new(), 0.0, Vec::new()),
    };
    FrameRecord {
        frame,
        positions: registry.positions(),
        errors,
        steered,
        global_error,
        leader: leader.map(|n| n.id()),
        quorum: leader.and_then(|n| n.replica()).map(|r| r.quorum_size()),
    }
}

