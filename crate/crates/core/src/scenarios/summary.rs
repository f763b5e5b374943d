use super::monitor::Violation;
use super::runner::RunRecord;
use crate::event::EventKind;
use crate::raft::{NodeId, Term};
use std::collections::BTreeMap;

/// Per-agent error below which an agent counts as converged.
pub const CONVERGENCE_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub final_global_error: f64,
    /// First frame where every steered agent is within the threshold.
    pub convergence_frame: Option<u64>,
    pub leaders_per_term: BTreeMap<Term, usize>,
    /// For each crash: the crashed node and the frames until some node
    /// reported it failed (`None` when nobody did).
    pub detection_latencies: Vec<(NodeId, u64, Option<u64>)>,
    pub violations: Vec<Violation>,
}

impl Summary {
    pub fn is_safe(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn summarize(record: &RunRecord) -> Summary {
    let convergence_frame = record
        .frames
        .iter()
        .find(|f| f.steered.iter().all(|id| f.errors.get(id).is_some_and(|&e| e < CONVERGENCE_THRESHOLD)))
        .map(|f| f.frame);

    let mut leaders: BTreeMap<Term, Vec<NodeId>> = BTreeMap::new();
    for e in record.events.iter().filter(|e| e.kind == EventKind::Leader) {
        let nodes = leaders.entry(e.term).or_default();
        if !nodes.contains(&e.node) {
            nodes.push(e.node);
        }
    }
    let mut violations = record.violations.clone();
    for (term, nodes) in &leaders {
        if nodes.len() > 1 {
            let v = Violation::ElectionSafety { term: *term, first: nodes[0], second: nodes[1] };
            if !violations.contains(&v) {
                violations.push(v);
            }
        }
    }

    let detection_latencies = record
        .events
        .iter()
        .filter(|e| e.kind == EventKind::SimulateFailure)
        .map(|crash| {
            let detected = record
                .events
                .iter()
                .find(|e| e.kind == EventKind::Failure && e.node == crash.node && e.frame >= crash.frame)
                .map(|e| e.frame - crash.frame);
            (crash.node, crash.frame, detected)
        })
        .collect();

    Summary {
        final_global_error: record.frames.last().map_or(0.0, |f| f.global_error),
        convergence_frame,
        leaders_per_term: leaders.into_iter().map(|(t, n)| (t, n.len())).collect(),
        detection_latencies,
        violations,
    }
}
