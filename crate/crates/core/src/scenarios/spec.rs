use super::overrides::{Overrides, ScheduleLine};
use super::ScenarioError;
use crate::cluster::LeadershipPolicy;
use crate::formation::{ControllerConfig, FormationSpec, LawParams};
use crate::raft::{NodeId, TimerConfig};
use crate::rng::stress_rng;
use crate::simnet::{FaultKind, FaultSchedule, NetConfig};
use rand::Rng;
use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

/// Frames between per-node registry snapshots.
pub const VIEW_INTERVAL: u64 = 5;

/// Full description of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub label: String,
    pub agents: usize,
    pub frames: u64,
    pub leadership: LeadershipPolicy,
    pub failure_policy: String,
    pub law: String,
    pub law_params: LawParams,
    pub faults: FaultSchedule,
    /// Nodes added at runtime: `(node, frame)`.
    pub joins: Vec<(NodeId, u64)>,
    pub formation: FormationSpec,
    pub controller: ControllerConfig,
    pub net: NetConfig,
    pub timers: TimerConfig,
    pub seed: u64,
    /// Node whose first election deadline is forced to the minimum timeout
    /// (and everyone else's to at least two frames later).
    pub bootstrap: Option<NodeId>,
    pub view_interval: u64,
}

impl ScenarioSpec {
    /// Defaults shared by every scenario: Raft leadership, anchored law,
    /// unit circle, lossless one-frame network.
    pub fn base(label: &str, agents: usize, frames: u64) -> Self {
        Self {
            label: label.to_string(),
            agents,
            frames,
            leadership: LeadershipPolicy::RaftElection,
            failure_policy: "leader-role-only".to_string(),
            law: "anchored".to_string(),
            law_params: LawParams::default(),
            faults: FaultSchedule::default(),
            joins: Vec::new(),
            formation: FormationSpec::default(),
            controller: ControllerConfig::default(),
            net: NetConfig::default(),
            timers: TimerConfig::default(),
            seed: 0,
            bootstrap: None,
            view_interval: VIEW_INTERVAL,
        }
    }

    /// Agent count once every join has happened.
    pub fn max_agents(&self) -> usize {
        self.agents + self.joins.len()
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(n) = o.agents {
            self.agents = n;
        }
        if let Some(f) = o.frames {
            self.frames = f;
        }
        if let Some(k) = o.gain {
            self.controller.gain = k;
        }
        if let Some(dt) = o.dt {
            self.controller.dt = dt;
        }
        if let Some(r) = o.radius {
            self.formation.radius = r;
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(h) = o.heartbeat_interval {
            self.timers.heartbeat_interval = h;
        }
        if let Some(t) = o.election_timeout_min {
            self.timers.election_timeout_min = t;
        }
        if let Some(t) = o.election_timeout_max {
            self.timers.election_timeout_max = t;
        }
        if let Some(law) = &o.law {
            self.law = law.clone();
        }
        if let Some(g) = o.anchor_gain {
            self.law_params.anchor_gain = g;
        }
        if let Some(p) = &o.policy {
            self.failure_policy = p.clone();
        }
        if let LeadershipPolicy::ScriptedRotation { period, failure_frame } = &mut self.leadership {
            if let Some(p) = o.period {
                *period = p;
            }
            if failure_frame.is_some() && o.failure_frame.is_some() {
                *failure_frame = o.failure_frame;
            }
        }
        if o.has_faults() {
            self.faults = FaultSchedule::new(o.schedule.iter().filter_map(|line| match *line {
                ScheduleLine::Crash { node, frame } => {
                    Some(crate::simnet::FaultAction { frame, kind: FaultKind::CrashNode(node) })
                }
                ScheduleLine::Recover { node, frame } => {
                    Some(crate::simnet::FaultAction { frame, kind: FaultKind::RecoverNode(node) })
                }
                ScheduleLine::Add { .. } => None,
            }));
        }
        if o.has_joins() {
            self.joins = o
                .schedule
                .iter()
                .filter_map(|line| match *line {
                    ScheduleLine::Add { node, frame } => Some((node, frame)),
                    _ => None,
                })
                .collect();
        }
        self.net.seed = self.seed;
    }
}

/// Builds the [`ScenarioSpec`] for one scenario label.
pub trait ScenarioBuilder: Debug + Send + Sync {
    fn label(&self) -> &'static str;

    fn describe(&self) -> &'static str;

    fn build(&self, overrides: &Overrides) -> Result<ScenarioSpec, ScenarioError>;
}

fn crash_all(nodes: impl IntoIterator<Item = u64>, frame: u64) -> FaultSchedule {
    FaultSchedule::new(nodes.into_iter().map(|n| crate::simnet::FaultAction { frame, kind: FaultKind::CrashNode(NodeId(n)) }))
}

#[derive(Debug)]
struct RotationWithFailure;

impl ScenarioBuilder for RotationWithFailure {
    fn label(&self) -> &'static str {
        "A"
    }

    fn describe(&self) -> &'static str {
        "leader rotates every 20 frames; the leader fails at frame 35 and the next index takes over"
    }

    fn build(&self, o: &Overrides) -> Result<ScenarioSpec, ScenarioError> {
        let mut spec = ScenarioSpec::base("A", 5, 60);
        spec.leadership = LeadershipPolicy::ScriptedRotation { period: 20, failure_frame: Some(35) };
        spec.apply(o);
        Ok(spec)
    }
}

#[derive(Debug)]
struct FrozenAgent;

impl ScenarioBuilder for FrozenAgent {
    fn label(&self) -> &'static str {
        "B"
    }

    fn describe(&self) -> &'static str {
        "agent 1 crashes at frame 35 and stays put; the others keep the n-gon"
    }

    fn build(&self, o: &Overrides) -> Result<ScenarioSpec, ScenarioError> {
        let mut spec = ScenarioSpec::base("B", 5, 200);
        spec.leadership = LeadershipPolicy::ScriptedRotation { period: 20, failure_frame: None };
        spec.failure_policy = "freeze-agent".to_string();
        spec.faults = crash_all([1], 35);
        spec.apply(o);
        Ok(spec)
    }
}

#[derive(Debug)]
struct ShrunkFormation;

impl ScenarioBuilder for ShrunkFormation {
    fn label(&self) -> &'static str {
        "C"
    }

    fn describe(&self) -> &'static str {
        "m agents crash at frame 30; the survivors re-form on an (n - m)-gon"
    }

    fn build(&self, o: &Overrides) -> Result<ScenarioSpec, ScenarioError> {
        let mut spec = ScenarioSpec::base("C", 6, 1500);
        spec.leadership = LeadershipPolicy::ScriptedRotation { period: 20, failure_frame: None };
        spec.failure_policy = "shrink-formation".to_string();
        let m = o.failures.unwrap_or(2) as u64;
        spec.faults = crash_all(1..=m, o.failure_frame.unwrap_or(30));
        spec.apply(o);
        Ok(spec)
    }
}

#[derive(Debug)]
struct Replicated {
    label: &'static str,
    describe: &'static str,
    agents: usize,
    frames: u64,
}

impl ScenarioBuilder for Replicated {
    fn label(&self) -> &'static str {
        self.label
    }

    fn describe(&self) -> &'static str {
        self.describe
    }

    fn build(&self, o: &Overrides) -> Result<ScenarioSpec, ScenarioError> {
        let mut spec = ScenarioSpec::base(self.label, self.agents, self.frames);
        spec.apply(o);
        Ok(spec)
    }
}

#[derive(Debug)]
struct FailAndRecover;

impl ScenarioBuilder for FailAndRecover {
    fn label(&self) -> &'static str {
        "F"
    }

    fn describe(&self) -> &'static str {
        "node 1 leads, fails at frame 10 and recovers at frame 20"
    }

    fn build(&self, o: &Overrides) -> Result<ScenarioSpec, ScenarioError> {
        let mut spec = ScenarioSpec::base("F", 3, 100);
        spec.faults = FaultSchedule::new([
            crate::simnet::FaultAction { frame: 10, kind: FaultKind::CrashNode(NodeId(1)) },
            crate::simnet::FaultAction { frame: 20, kind: FaultKind::RecoverNode(NodeId(1)) },
        ]);
        spec.bootstrap = Some(NodeId(1));
        spec.apply(o);
        Ok(spec)
    }
}

#[derive(Debug)]
struct Join;

impl ScenarioBuilder for Join {
    fn label(&self) -> &'static str {
        "G"
    }

    fn describe(&self) -> &'static str {
        "a fifth node joins the four-node cluster at frame 50"
    }

    fn build(&self, o: &Overrides) -> Result<ScenarioSpec, ScenarioError> {
        let mut spec = ScenarioSpec::base("G", 4, 2000);
        spec.apply(o);
        if !o.has_joins() {
            spec.joins = vec![(NodeId(spec.agents as u64), 50)];
        }
        Ok(spec)
    }
}

/// Random crashes, recoveries, partitions and message loss, plus one join.
#[derive(Debug)]
struct Stress;

impl Stress {
    fn schedule(seed: u64, n: usize, frames: u64) -> FaultSchedule {
        let mut rng = stress_rng(seed);
        let mut schedule = FaultSchedule::default();
        let quiet_from = frames.saturating_sub(frames / 4);
        let mut frame = 5;
        while frame < quiet_from {
            let node = NodeId(rng.gen_range(0..n as u64));
            match rng.gen_range(0..5) {
                0 | 1 => schedule.push(frame, FaultKind::CrashNode(node)),
                2 => schedule.push(frame, FaultKind::RecoverNode(node)),
                3 => {
                    let mut groups = vec![Vec::new(), Vec::new()];
                    for id in 0..=n as u64 {
                        groups[rng.gen_range(0..2)].push(NodeId(id));
                    }
                    schedule.push(frame, FaultKind::Partition(groups));
                    let heal = frame + rng.gen_range(5..25);
                    schedule.push(heal, FaultKind::Heal);
                }
                _ => schedule.push(frame, FaultKind::DropProbability(rng.gen_range(0.0..0.3))),
            }
            frame += rng.gen_range(4..20);
        }
        schedule.push(quiet_from, FaultKind::Heal);
        schedule.push(quiet_from, FaultKind::DropProbability(0.0));
        for id in 0..n as u64 {
            schedule.push(quiet_from, FaultKind::RecoverNode(NodeId(id)));
        }
        schedule
    }
}

impl ScenarioBuilder for Stress {
    fn label(&self) -> &'static str {
        "stress"
    }

    fn describe(&self) -> &'static str {
        "seeded random crashes, recoveries, partitions and loss, with a join at frame 100"
    }

    fn build(&self, o: &Overrides) -> Result<ScenarioSpec, ScenarioError> {
        let mut spec = ScenarioSpec::base("stress", 5, 300);
        spec.apply(o);
        if !o.has_faults() {
            spec.faults = Self::schedule(spec.seed, spec.agents, spec.frames);
        }
        if !o.has_joins() {
            spec.joins = vec![(NodeId(spec.agents as u64), 100.min(spec.frames / 2))];
        }
        Ok(spec)
    }
}

/// Scenario builders by label.
pub struct ScenarioRegistry {
    builders: BTreeMap<&'static str, Arc<dyn ScenarioBuilder>>,
}

impl ScenarioRegistry {
    pub fn empty() -> Self {
        Self { builders: BTreeMap::new() }
    }

    pub fn register(&mut self, builder: Arc<dyn ScenarioBuilder>) {
        self.builders.insert(builder.label(), builder);
    }

    pub fn get(&self, label: &str) -> Option<Arc<dyn ScenarioBuilder>> {
        self.builders.get(label).cloned()
    }

    pub fn labels(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.builders.keys().copied()
    }

    pub fn build(&self, label: &str, overrides: &Overrides) -> Result<ScenarioSpec, ScenarioError> {
        self.get(label).ok_or_else(|| ScenarioError::UnknownScenario(label.to_string()))?.build(overrides)
    }
}

impl Default for ScenarioRegistry {
    fn default() -> Self {
        let mut registry = Self::empty();
        registry.register(Arc::new(RotationWithFailure));
        registry.register(Arc::new(FrozenAgent));
        registry.register(Arc::new(ShrunkFormation));
        registry.register(Arc::new(Replicated {
            label: "D",
            describe: "position batches replicated through the log under elected leaders",
            agents: 5,
            frames: 300,
        }));
        registry.register(Arc::new(Replicated {
            label: "E",
            describe: "three nodes moving through follower, candidate and leader",
            agents: 3,
            frames: 200,
        }));
        registry.register(Arc::new(FailAndRecover));
        registry.register(Arc::new(Join));
        registry.register(Arc::new(Stress));
        registry
    }
}

/// Builds a scenario from the default registry.
pub fn build_scenario(label: &str, overrides: &Overrides) -> Result<ScenarioSpec, ScenarioError> {
    ScenarioRegistry::default().build(label, overrides)
}
