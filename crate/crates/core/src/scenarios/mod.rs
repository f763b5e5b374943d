//! Scenario builders, the frame-loop runner, and run summaries.

mod monitor;
mod overrides;
mod runner;
mod spec;
mod summary;

pub use monitor::{SafetyMonitor, Violation};
pub use overrides::{Overrides, ScheduleLine};
pub use runner::{run, FrameRecord, NodeSnapshot, NodeView, RunRecord};
pub use spec::{build_scenario, ScenarioBuilder, ScenarioRegistry, ScenarioSpec, VIEW_INTERVAL};
pub use summary::{summarize, Summary, CONVERGENCE_THRESHOLD};

use crate::formation::FormationError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Formation(#[from] FormationError),
}
