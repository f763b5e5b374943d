//! Per-node composition: an agent registry driven by committed log
//! entries, a consensus engine, and the formation controller that runs on
//! whichever node leads.

mod detector;
mod durable;
mod leadership;
mod node;
mod policy;
mod registry;

pub use detector::FailureDetector;
pub use durable::DurableStore;
pub use leadership::{rotation_leader, scripted_rotation_leader, LeadershipPolicy};
pub use node::{
    control_batch, formation_metrics, live_agents, plan_for, ClusterNode, ControlContext, ControlError, ControlRecord,
    FrameOutput, Wire,
};
pub use policy::{FailurePolicyRegistry, FormationPlan, FormationPolicy, FreezeAgent, LeaderRoleOnly, ShrinkFormation};
pub use registry::{AgentRegistry, AgentState};
