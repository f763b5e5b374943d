use crate::formation::{polygon_goals, FormationError, FormationSpec, Vec2};
use crate::raft::NodeId;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;
use std::sync::Arc;

/// Which agents the leader steers and where each one should go.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FormationPlan {
    /// Agents the leader moves, in id order.
    pub steered: Vec<NodeId>,
    /// Goal for every agent that has one (steered or not).
    pub goals: BTreeMap<NodeId, Vec2>,
}

/// How failed agents affect the formation.
pub trait FormationPolicy: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// `members` is sorted by id. Goal vertices are handed out by rank.
    fn plan(
        &self,
        members: &[NodeId],
        failed: &BTreeSet<NodeId>,
        template: &FormationSpec,
    ) -> Result<FormationPlan, FormationError>;
}

fn assign(ids: &[NodeId], template: &FormationSpec) -> Result<BTreeMap<NodeId, Vec2>, FormationError> {
    if ids.is_empty() {
        return Ok(BTreeMap::new());
    }
    let goals = polygon_goals(&template.with_sides(ids.len()))?;
    Ok(ids.iter().copied().zip(goals).collect())
}

/// A failed node only loses its leadership; its agent is still steered.
#[derive(Debug, Clone, Copy, Default)]
pub struct LeaderRoleOnly;

impl FormationPolicy for LeaderRoleOnly {
    fn name(&self) -> &'static str {
        "leader-role-only"
    }

    fn plan(&self, members: &[NodeId], _: &BTreeSet<NodeId>, template: &FormationSpec) -> Result<FormationPlan, FormationError> {
        Ok(FormationPlan { steered: members.to_vec(), goals: assign(members, template)? })
    }
}

/// Failed agents stay where they are and keep their polygon slot.
#[derive(Debug, Clone, Copy, Default)]
pub struct FreezeAgent;

impl FormationPolicy for FreezeAgent {
    fn name(&self) -> &'static str {
        "freeze-agent"
    }

    fn plan(&self, members: &[NodeId], failed: &BTreeSet<NodeId>, template: &FormationSpec) -> Result<FormationPlan, FormationError> {
        let steered = members.iter().copied().filter(|id| !failed.contains(id)).collect();
        Ok(FormationPlan { steered, goals: assign(members, template)? })
    }
}

/// Failed agents stay put; the rest re-form on an `(n - m)`-gon.
#[derive(Debug, Clone, Copy, Default)]
pub struct ShrinkFormation;

impl FormationPolicy for ShrinkFormation {
    fn name(&self) -> &'static str {
        "shrink-formation"
    }

    fn plan(&self, members: &[NodeId], failed: &BTreeSet<NodeId>, template: &FormationSpec) -> Result<FormationPlan, FormationError> {
        let live: Vec<NodeId> = members.iter().copied().filter(|id| !failed.contains(id)).collect();
        let goals = assign(&live, template)?;
        Ok(FormationPlan { steered: live, goals })
    }
}

/// Failure policies selectable by name.
pub struct FailurePolicyRegistry {
    policies: BTreeMap<&'static str, Arc<dyn FormationPolicy>>,
}

impl FailurePolicyRegistry {
    pub fn empty() -> Self {
        Self { policies: BTreeMap::new() }
    }

    pub fn register(&mut self, policy: Arc<dyn FormationPolicy>) {
        self.policies.insert(policy.name(), policy);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn FormationPolicy>> {
        self.policies.get(name).cloned()
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.policies.keys().copied()
    }
}

impl Default for FailurePolicyRegistry {
    fn default() -> Self {
        let mut registry = Self::empty();
        registry.register(Arc::new(LeaderRoleOnly));
        registry.register(Arc::new(FreezeAgent));
        registry.register(Arc::new(ShrinkFormation));
        registry
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u64]) -> Vec<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    #[test]
    fn shrink_to_square() {
        let members = ids(&[0, 1, 2, 3, 4, 5]);
        let failed = BTreeSet::from([NodeId(1), NodeId(2)]);
        let plan = ShrinkFormation.plan(&members, &failed, &FormationSpec::default()).unwrap();
        assert_eq!(plan.steered, ids(&[0, 3, 4, 5]));
        let square = polygon_goals(&FormationSpec::default().with_sides(4)).unwrap();
        assert_eq!(plan.goals.values().copied().collect::<Vec<_>>(), square);
        assert_eq!(plan.goals.keys().copied().collect::<Vec<_>>(), ids(&[0, 3, 4, 5]));
    }

    #[test]
    fn freeze_keeps_slot() {
        let members = ids(&[0, 1, 2, 3, 4]);
        let failed = BTreeSet::from([NodeId(1)]);
        let plan = FreezeAgent.plan(&members, &failed, &FormationSpec::default()).unwrap();
        assert_eq!(plan.steered, ids(&[0, 2, 3, 4]));
        assert_eq!(plan.goals.len(), 5);
        let pentagon = polygon_goals(&FormationSpec::default().with_sides(5)).unwrap();
        assert_eq!(plan.goals[&NodeId(1)], pentagon[1]);
    }

    #[test]
    fn leader_role_only_steers_everyone() {
        let members = ids(&[0, 1, 2]);
        let failed = BTreeSet::from([NodeId(1)]);
        let plan = LeaderRoleOnly.plan(&members, &failed, &FormationSpec::default()).unwrap();
        assert_eq!(plan.steered, members);
    }

    #[test]
    fn all_failed_is_empty_plan() {
        let members = ids(&[0, 1]);
        let failed: BTreeSet<_> = members.iter().copied().collect();
        let plan = ShrinkFormation.plan(&members, &failed, &FormationSpec::default()).unwrap();
        assert!(plan.steered.is_empty() && plan.goals.is_empty());
    }

    #[test]
    fn registry_names() {
        let r = FailurePolicyRegistry::default();
        assert_eq!(r.names().collect::<Vec<_>>(), vec!["freeze-agent", "leader-role-only", "shrink-formation"]);
        assert_eq!(r.get("freeze-agent").unwrap().name(), "freeze-agent");
        assert!(r.get("explode").is_none());
    }
}
