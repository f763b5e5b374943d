//! Multi-agent formation control over a Raft-replicated state machine.
//!
//! Agents are single integrators in the plane, each hosted by one node of a
//! Raft cluster. The leader computes the next positions for every agent
//! with a Laplacian formation law and commits them through the log; every
//! node applies committed batches to its own agent registry. A
//! deterministic frame-stepped network with fault injection drives the
//! cluster through the bundled scenarios.

pub mod cluster;
pub mod event;
pub mod export;
pub mod formation;
pub mod raft;
pub mod rng;
pub mod scenarios;
pub mod simnet;

pub use event::{EventKind, EventRecord};
pub use formation::Vec2;
pub use raft::{NodeId, Term};
