//! Deterministic frame-stepped transport with fault injection.
//!
//! Every envelope takes at least one frame. Delivery order within a frame
//! is `(deliver_frame, send_frame, from, to, sequence)`, and every random
//! draw comes from the seeded stream in [`NetConfig`], so a run replays
//! exactly from its seed.

use crate::event::{EventKind, EventRecord};
use crate::raft::{NodeId, Term};
use crate::rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub seed: u64,
    /// Minimum latency in frames (at least 1).
    pub base_delay: u64,
    /// Extra latency drawn uniformly from `0..=jitter`.
    pub jitter: u64,
    pub drop_probability: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self { seed: 0, base_delay: 1, jitter: 0, drop_probability: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope<P> {
    pub from: NodeId,
    pub to: NodeId,
    pub payload: P,
    pub send_frame: u64,
    pub deliver_frame: u64,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropReason {
    SenderCrashed,
    DestinationCrashed,
    Partitioned,
    Lost,
}

/// What happened to one envelope. Every sent envelope ends up in exactly
/// one `Delivered` or `Dropped` row (or is still pending).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transcript {
    Sent { seq: u64, from: NodeId, to: NodeId, send_frame: u64, deliver_frame: u64 },
    Delivered { seq: u64, frame: u64 },
    Dropped { seq: u64, frame: u64, reason: DropReason },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FaultKind {
    CrashNode(NodeId),
    RecoverNode(NodeId),
    /// Only nodes in the same group can talk; unlisted nodes are isolated.
    Partition(Vec<Vec<NodeId>>),
    Heal,
    DropProbability(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultAction {
    pub frame: u64,
    pub kind: FaultKind,
}

/// Timed fault actions, kept sorted by frame (stable for equal frames).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FaultSchedule {
    actions: Vec<FaultAction>,
}

impl FaultSchedule {
    pub fn new(actions: impl IntoIterator<Item = FaultAction>) -> Self {
        let mut actions: Vec<FaultAction> = actions.into_iter().collect();
        actions.sort_by_key(|a| a.frame);
        Self { actions }
    }

    pub fn push(&mut self, frame: u64, kind: FaultKind) {
        let at = self.actions.partition_point(|a| a.frame <= frame);
        self.actions.insert(at, FaultAction { frame, kind });
    }

    pub fn actions(&self) -> &[FaultAction] {
        &self.actions
    }

    pub fn at(&self, frame: u64) -> impl Iterator<Item = &FaultAction> {
        self.actions.iter().filter(move |a| a.frame == frame)
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Nodes crashed by this schedule at or before `frame` and not recovered.
    pub fn crashed_by(&self, frame: u64) -> BTreeSet<NodeId> {
        let mut crashed = BTreeSet::new();
        for action in self.actions.iter().take_while(|a| a.frame <= frame) {
            match action.kind {
                FaultKind::CrashNode(n) => {
                    crashed.insert(n);
                }
                FaultKind::RecoverNode(n) => {
                    crashed.remove(&n);
                }
                _ => {}
            }
        }
        crashed
    }
}

type QueueKey = (u64, u64, NodeId, NodeId, u64);

pub struct SimNet<P> {
    config: NetConfig,
    drop_probability: f64,
    rng: ChaCha8Rng,
    pending: BTreeMap<QueueKey, Envelope<P>>,
    crashed: BTreeSet<NodeId>,
    partition: Option<Vec<BTreeSet<NodeId>>>,
    next_seq: u64,
    transcript: Vec<Transcript>,
}

impl<P: Clone> SimNet<P> {
    pub fn new(config: NetConfig) -> Self {
        Self {
            drop_probability: config.drop_probability,
            rng: rng::net_rng(config.seed),
            config,
            pending: BTreeMap::new(),
            crashed: BTreeSet::new(),
            partition: None,
            next_seq: 0,
            transcript: Vec::new(),
        }
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn is_alive(&self, node: NodeId) -> bool {
        !self.crashed.contains(&node)
    }

    pub fn crashed(&self) -> &BTreeSet<NodeId> {
        &self.crashed
    }

    pub fn reachable(&self, a: NodeId, b: NodeId) -> bool {
        match &self.partition {
            None => true,
            Some(groups) => groups.iter().any(|g| g.contains(&a) && g.contains(&b)),
        }
    }

    pub fn transcript(&self) -> &[Transcript] {
        &self.transcript
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    fn record_drop(&mut self, seq: u64, frame: u64, reason: DropReason) {
        self.transcript.push(Transcript::Dropped { seq, frame, reason });
    }

    pub fn send(&mut self, from: NodeId, to: NodeId, payload: P, frame: u64) {
        let seq = self.next_seq;
        self.next_seq += 1;
        let base = self.config.base_delay.max(1);
        let jitter = if self.config.jitter > 0 { self.rng.gen_range(0..=self.config.jitter) } else { 0 };
        let deliver_frame = frame + base + jitter;
        self.transcript.push(Transcript::Sent { seq, from, to, send_frame: frame, deliver_frame });
        if !self.is_alive(from) {
            return self.record_drop(seq, frame, DropReason::SenderCrashed);
        }
        if !self.is_alive(to) {
            return self.record_drop(seq, frame, DropReason::DestinationCrashed);
        }
        if !self.reachable(from, to) {
            return self.record_drop(seq, frame, DropReason::Partitioned);
        }
        if self.drop_probability > 0.0 && self.rng.gen::<f64>() < self.drop_probability {
            return self.record_drop(seq, frame, DropReason::Lost);
        }
        let envelope = Envelope { from, to, payload, send_frame: frame, deliver_frame, seq };
        self.pending.insert((deliver_frame, frame, from, to, seq), envelope);
    }

    /// Envelopes due at (or before) `frame` whose destination is alive and
    /// reachable; the rest of the due envelopes are dropped.
    pub fn step_frame(&mut self, frame: u64) -> Vec<Envelope<P>> {
        let later = self.pending.split_off(&(frame + 1, 0, NodeId(0), NodeId(0), 0));
        let due = std::mem::replace(&mut self.pending, later);
        let mut delivered = Vec::with_capacity(due.len());
        for (_, envelope) in due {
            if !self.is_alive(envelope.to) {
                self.record_drop(envelope.seq, frame, DropReason::DestinationCrashed);
            } else if !self.reachable(envelope.from, envelope.to) {
                self.record_drop(envelope.seq, frame, DropReason::Partitioned);
            } else {
                self.transcript.push(Transcript::Delivered { seq: envelope.seq, frame });
                delivered.push(envelope);
            }
        }
        delivered
    }

    pub fn crash(&mut self, node: NodeId, frame: u64) -> bool {
        if !self.crashed.insert(node) {
            return false;
        }
        let inbound: Vec<QueueKey> = self.pending.keys().filter(|k| k.3 == node).copied().collect();
        for key in inbound {
            if let Some(env) = self.pending.remove(&key) {
                self.record_drop(env.seq, frame, DropReason::DestinationCrashed);
            }
        }
        true
    }

    pub fn recover(&mut self, node: NodeId) -> bool {
        self.crashed.remove(&node)
    }

    pub fn partition(&mut self, groups: &[Vec<NodeId>]) {
        self.partition = Some(groups.iter().map(|g| g.iter().copied().collect()).collect());
    }

    pub fn heal(&mut self) {
        self.partition = None;
    }

    pub fn set_drop_probability(&mut self, p: f64) {
        self.drop_probability = p.clamp(0.0, 1.0);
    }

    /// Runs the actions scheduled for `frame`. Crash and recovery emit the
    /// `simulate failure` / `simulate recovery` rows, stamped with the
    /// node's term as reported by `term_of`.
    pub fn apply_faults(
        &mut self,
        schedule: &FaultSchedule,
        frame: u64,
        term_of: &dyn Fn(NodeId) -> Term,
    ) -> Vec<EventRecord> {
        let mut events = Vec::new();
        for action in schedule.at(frame) {
            match &action.kind {
                FaultKind::CrashNode(node) => {
                    if self.crash(*node, frame) {
                        events.push(EventRecord::new(EventKind::SimulateFailure, *node, term_of(*node), frame));
                    }
                }
                FaultKind::RecoverNode(node) => {
                    if self.recover(*node) {
                        events.push(EventRecord::new(EventKind::SimulateRecovery, *node, term_of(*node), frame));
                    }
                }
                FaultKind::Partition(groups) => self.partition(groups),
                FaultKind::Heal => self.heal(),
                FaultKind::DropProbability(p) => self.set_drop_probability(*p),
            }
        }
        events
    }
}
