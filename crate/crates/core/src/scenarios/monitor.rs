use crate::cluster::{AgentRegistry, ClusterNode, FrameOutput};
use crate::event::{EventKind, EventRecord};
use crate::raft::{Command, Index, LogEntry, NodeId, Role, Term};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    /// Two nodes led the same term.
    ElectionSafety { term: Term, first: NodeId, second: NodeId },
    /// Two logs hold different entries (or different histories) at the same `(index, term)`.
    LogMatching { node: NodeId, index: Index, term: Term },
    /// A leader rewrote an entry it had already appended in its term.
    LeaderAppendOnly { node: NodeId, term: Term, index: Index },
    /// A node applied an entry that differs from what another node applied at that index.
    StateMachineSafety { node: NodeId, index: Index },
    TermRegression { node: NodeId, from: Term, to: Term },
    /// Two registries with the same applied index differ.
    RegistryDivergence { node: NodeId, applied_index: Index, frame: u64 },
    /// Committed prefixes of two final logs disagree.
    CommittedPrefix { first: NodeId, second: NodeId, index: Index },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Watches every node's frame output for Raft safety violations.
#[derive(Debug, Default)]
pub struct SafetyMonitor {
    leaders: BTreeMap<Term, NodeId>,
    entries: BTreeMap<(Index, Term), (Command, Term)>,
    lead: BTreeMap<NodeId, (Term, Index)>,
    terms: BTreeMap<NodeId, Term>,
    applied: Vec<(Term, Command)>,
    registries: BTreeMap<Index, AgentRegistry>,
    violations: Vec<Violation>,
}

impl SafetyMonitor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn into_violations(self) -> Vec<Violation> {
        self.violations
    }

    /// Leader events across all nodes: at most one leader per term.
    pub fn observe_events(&mut self, events: &[EventRecord]) {
        for e in events.iter().filter(|e| e.kind == EventKind::Leader) {
            match self.leaders.get(&e.term) {
                Some(&first) if first != e.node => {
                    self.violations.push(Violation::ElectionSafety { term: e.term, first, second: e.node })
                }
                Some(_) => {}
                None => {
                    self.leaders.insert(e.term, e.node);
                }
            }
        }
    }

    /// Forgets volatile tracking for a node that crashed.
    pub fn node_down(&mut self, node: NodeId) {
        self.lead.remove(&node);
    }

    /// Checks one node after its frame.
    pub fn observe_node(&mut self, frame: u64, node: &ClusterNode, out: &FrameOutput) {
        let id = node.id();
        self.observe_events(&out.events);
        if let Some(replica) = node.replica() {
            let term = replica.term();
            if let Some(&before) = self.terms.get(&id) {
                if term < before {
                    self.violations.push(Violation::TermRegression { node: id, from: before, to: term });
                }
            }
            self.terms.insert(id, term);

            if let Some(from) = out.log_changed_from {
                if let Some(&(lead_term, lead_last)) = self.lead.get(&id) {
                    if lead_term == term && replica.role() == Role::Leader && from <= lead_last {
                        self.violations.push(Violation::LeaderAppendOnly { node: id, term, index: from });
                    }
                }
                self.check_log(id, replica.log(), from);
            }
            if replica.role() == Role::Leader {
                self.lead.insert(id, (term, replica.last_index()));
            } else {
                self.lead.remove(&id);
            }
        }
        self.check_applied(id, &out.applied);
        self.check_registry(frame, id, node.registry());
    }

    fn check_log(&mut self, node: NodeId, log: &[LogEntry], from: Index) {
        for entry in log.iter().skip(from.saturating_sub(1) as usize) {
            let prev_term = match entry.index {
                1 => Term(0),
                i => log[i as usize - 2].term,
            };
            match self.entries.get(&(entry.index, entry.term)) {
                Some((command, prev)) if *command != entry.command || *prev != prev_term => {
                    self.violations.push(Violation::LogMatching { node, index: entry.index, term: entry.term });
                }
                Some(_) => {}
                None => {
                    self.entries.insert((entry.index, entry.term), (entry.command.clone(), prev_term));
                }
            }
        }
    }

    fn check_applied(&mut self, node: NodeId, applied: &[LogEntry]) {
        for entry in applied {
            let slot = entry.index as usize - 1;
            match self.applied.get(slot) {
                Some((term, command)) => {
                    if *term != entry.term || *command != entry.command {
                        self.violations.push(Violation::StateMachineSafety { node, index: entry.index });
                    }
                }
                None if slot == self.applied.len() => self.applied.push((entry.term, entry.command.clone())),
                None => self.violations.push(Violation::StateMachineSafety { node, index: entry.index }),
            }
        }
    }

    fn check_registry(&mut self, frame: u64, node: NodeId, registry: &AgentRegistry) {
        let index = registry.applied_index();
        match self.registries.get(&index) {
            Some(seen) if seen != registry => {
                self.violations.push(Violation::RegistryDivergence { node, applied_index: index, frame })
            }
            Some(_) => {}
            None => {
                self.registries.insert(index, registry.clone());
            }
        }
    }

    /// End-of-run check: committed prefixes of all live logs agree.
    pub fn finish<'a>(&mut self, nodes: impl IntoIterator<Item = &'a ClusterNode>) {
        let logs: Vec<(NodeId, &[LogEntry], Index)> = nodes
            .into_iter()
            .filter_map(|n| n.replica().map(|r| (n.id(), r.log(), r.commit_index())))
            .collect();
        for (i, &(a, log_a, commit_a)) in logs.iter().enumerate() {
            for &(b, log_b, commit_b) in &logs[i + 1..] {
                let upto = commit_a.min(commit_b) as usize;
                if let Some(k) = (0..upto).find(|&k| log_a[k] != log_b[k]) {
                    self.violations.push(Violation::CommittedPrefix { first: a, second: b, index: k as Index + 1 });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_leaders_in_one_term_flagged() {
        let mut m = SafetyMonitor::new();
        m.observe_events(&[
            EventRecord::new(EventKind::Leader, NodeId(0), Term(1), 3),
            EventRecord::new(EventKind::Leader, NodeId(0), Term(1), 3),
            EventRecord::new(EventKind::Leader, NodeId(1), Term(2), 9),
        ]);
        assert!(m.violations().is_empty());
        m.observe_events(&[EventRecord::new(EventKind::Leader, NodeId(2), Term(2), 12)]);
        assert_eq!(m.violations(), &[Violation::ElectionSafety { term: Term(2), first: NodeId(1), second: NodeId(2) }]);
    }

    #[test]
    fn divergent_logs_flagged() {
        let mut m = SafetyMonitor::new();
        let a = [LogEntry { term: Term(1), index: 1, command: Command::Noop }];
        let b = [LogEntry { term: Term(1), index: 1, command: Command::AddMember(NodeId(3)) }];
        m.check_log(NodeId(0), &a, 1);
        m.check_log(NodeId(1), &a, 1);
        assert!(m.violations().is_empty());
        m.check_log(NodeId(2), &b, 1);
        assert_eq!(m.violations().len(), 1);
    }

    #[test]
    fn divergent_application_flagged() {
        let mut m = SafetyMonitor::new();
        let e1 = LogEntry { term: Term(1), index: 1, command: Command::Noop };
        let e2 = LogEntry { term: Term(2), index: 1, command: Command::Noop };
        m.check_applied(NodeId(0), std::slice::from_ref(&e1));
        m.check_applied(NodeId(1), std::slice::from_ref(&e1));
        assert!(m.violations().is_empty());
        m.check_applied(NodeId(2), &[e2]);
        assert!(matches!(m.violations()[0], Violation::StateMachineSafety { index: 1, .. }));
        let skip = LogEntry { term: Term(1), index: 5, command: Command::Noop };
        m.check_applied(NodeId(0), &[skip]);
        assert_eq!(m.violations().len(), 2);
    }
}
