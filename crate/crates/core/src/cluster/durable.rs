use crate::raft::{encode_command, Index, PersistError, PersistentRecord, RaftReplica, Term};

/// Stable storage for one replica, kept as the lines of its text record
/// and rewritten incrementally from the replica's change markers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DurableStore {
    header: String,
    term: Term,
    entries: Vec<String>,
}

impl DurableStore {
    pub fn new() -> Self {
        Self { header: "term=0 voted_for=none".to_string(), term: Term(0), entries: Vec::new() }
    }

    /// Syncs term, vote, and every entry from `changed_from` on.
    pub fn sync(&mut self, replica: &RaftReplica, changed_from: Option<Index>) {
        self.term = replica.term();
        self.header = match replica.voted_for() {
            Some(v) => format!("term={} voted_for={v}", replica.term()),
            None => format!("term={} voted_for=none", replica.term()),
        };
        let log = replica.log();
        let from = changed_from.map_or(log.len().min(self.entries.len()), |i| (i as usize).saturating_sub(1));
        let from = from.min(self.entries.len());
        self.entries.truncate(from);
        for entry in &log[from..] {
            self.entries.push(format!("{} {} {}", entry.index, entry.term, encode_command(&entry.command)));
        }
    }

    /// Term in the last synced header.
    pub fn term(&self) -> Term {
        self.term
    }

    pub fn text(&self) -> String {
        let mut text = String::with_capacity(self.header.len() + 1 + self.entries.iter().map(|e| e.len() + 1).sum::<usize>());
        text.push_str(&self.header);
        text.push('\n');
        for line in &self.entries {
            text.push_str(line);
            text.push('\n');
        }
        text
    }

    pub fn load(&self) -> Result<PersistentRecord, PersistError> {
        self.text().parse()
    }
}
