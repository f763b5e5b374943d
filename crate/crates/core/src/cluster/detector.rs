use crate::raft::{NodeId, Term};
use std::collections::{BTreeMap, BTreeSet};

/// Heartbeat-silence failure detector. A watched peer not heard from for
/// more than `timeout` frames is reported once, until it speaks again.
#[derive(Debug, Clone)]
pub struct FailureDetector {
    timeout: u64,
    last_contact: BTreeMap<NodeId, (u64, Term)>,
    suspected: BTreeSet<NodeId>,
}

impl FailureDetector {
    pub fn new(timeout: u64) -> Self {
        Self { timeout, last_contact: BTreeMap::new(), suspected: BTreeSet::new() }
    }

    pub fn heard(&mut self, from: NodeId, term: Term, frame: u64) {
        self.last_contact.insert(from, (frame, term));
        self.suspected.remove(&from);
    }

    /// Starts every watch afresh at `frame`, keeping the last known terms.
    pub fn restart(&mut self, peers: impl IntoIterator<Item = NodeId>, frame: u64) {
        self.suspected.clear();
        for peer in peers {
            let term = self.last_contact.get(&peer).map_or(Term(0), |c| c.1);
            self.last_contact.insert(peer, (frame, term));
        }
    }

    pub fn is_suspected(&self, peer: NodeId) -> bool {
        self.suspected.contains(&peer)
    }

    /// Newly suspected peers among `watched`, with the term last heard from each.
    pub fn check(&mut self, watched: impl IntoIterator<Item = NodeId>, frame: u64) -> Vec<(NodeId, Term)> {
        let mut newly = Vec::new();
        for peer in watched {
            let (last, term) = *self.last_contact.entry(peer).or_insert((frame, Term(0)));
            if frame.saturating_sub(last) > self.timeout && self.suspected.insert(peer) {
                newly.push((peer, term));
            }
        }
        newly
    }
}
