use super::{control_inputs, ControllerConfig, FormationError, FormationGraph, Vec2};
use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

/// Default absolute-tracking gain for [`AnchoredLaplacianLaw`].
pub const DEFAULT_ANCHOR_GAIN: f64 = 4.0;

/// A control law mapping agent positions and goals to velocity inputs.
pub trait ControlLaw: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    fn inputs(
        &self,
        positions: &[Vec2],
        goals: &[Vec2],
        graph: &FormationGraph,
        config: &ControllerConfig,
    ) -> Result<Vec<Vec2>, FormationError>;

    /// Upper bound on the closed-loop eigenvalues per unit time. An explicit
    /// Euler step is stable when `dt * rate_bound < 2`.
    fn rate_bound(&self, graph: &FormationGraph, config: &ControllerConfig) -> f64;
}

/// The plain Laplacian consensus law on edge errors. It only constrains
/// relative positions, so the formation centroid never moves.
#[derive(Debug, Clone, Copy, Default)]
pub struct LaplacianLaw;

impl ControlLaw for LaplacianLaw {
    fn name(&self) -> &'static str {
        "laplacian"
    }

    fn inputs(
        &self,
        positions: &[Vec2],
        goals: &[Vec2],
        graph: &FormationGraph,
        config: &ControllerConfig,
    ) -> Result<Vec<Vec2>, FormationError> {
        control_inputs(positions, goals, graph, config)
    }

    fn rate_bound(&self, graph: &FormationGraph, config: &ControllerConfig) -> f64 {
        config.gain * graph.spectral_bound()
    }
}

/// Laplacian law plus `-anchor_gain * (x_i - x_i*)`, which pins the
/// formation to its absolute goals (a single agent also converges).
#[derive(Debug, Clone, Copy)]
pub struct AnchoredLaplacianLaw {
    pub anchor_gain: f64,
}

impl Default for AnchoredLaplacianLaw {
    fn default() -> Self {
        Self { anchor_gain: DEFAULT_ANCHOR_GAIN }
    }
}

impl ControlLaw for AnchoredLaplacianLaw {
    fn name(&self) -> &'static str {
        "anchored"
    }

    fn inputs(
        &self,
        positions: &[Vec2],
        goals: &[Vec2],
        graph: &FormationGraph,
        config: &ControllerConfig,
    ) -> Result<Vec<Vec2>, FormationError> {
        let mut inputs = control_inputs(positions, goals, graph, config)?;
        for ((u, &x), &g) in inputs.iter_mut().zip(positions).zip(goals) {
            *u += (x - g) * -self.anchor_gain;
        }
        Ok(inputs)
    }

    fn rate_bound(&self, graph: &FormationGraph, config: &ControllerConfig) -> f64 {
        config.gain * graph.spectral_bound() + self.anchor_gain
    }
}

/// Tunables shared by every law factory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawParams {
    pub anchor_gain: f64,
}

impl Default for LawParams {
    fn default() -> Self {
        Self { anchor_gain: DEFAULT_ANCHOR_GAIN }
    }
}

type LawFactory = Box<dyn Fn(&LawParams) -> Arc<dyn ControlLaw> + Send + Sync>;

/// Control laws selectable by name.
pub struct ControlLawRegistry {
    factories: BTreeMap<&'static str, LawFactory>,
}

impl ControlLawRegistry {
    pub fn empty() -> Self {
        Self { factories: BTreeMap::new() }
    }

    pub fn register(
        &mut self,
        name: &'static str,
        factory: impl Fn(&LawParams) -> Arc<dyn ControlLaw> + Send + Sync + 'static,
    ) {
        self.factories.insert(name, Box::new(factory));
    }

    pub fn create(&self, name: &str, params: &LawParams) -> Result<Arc<dyn ControlLaw>, FormationError> {
        self.factories
            .get(name)
            .map(|f| f(params))
            .ok_or_else(|| FormationError::UnknownLaw(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }
}

impl Default for ControlLawRegistry {
    fn default() -> Self {
        let mut registry = Self::empty();
        registry.register("laplacian", |_| Arc::new(LaplacianLaw));
        registry.register("anchored", |p| Arc::new(AnchoredLaplacianLaw { anchor_gain: p.anchor_gain }));
        registry
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formation::{formation_step, polygon_goals, FormationSpec};

    #[test]
    fn registry_lookup() {
        let registry = ControlLawRegistry::default();
        assert_eq!(registry.names().collect::<Vec<_>>(), vec!["anchored", "laplacian"]);
        let law = registry.create("anchored", &LawParams { anchor_gain: 2.0 }).unwrap();
        assert_eq!(law.name(), "anchored");
        assert!(matches!(registry.create("pid", &LawParams::default()), Err(FormationError::UnknownLaw(_))));
    }

    #[test]
    fn anchored_moves_single_agent_to_goal() {
        let g = FormationGraph::complete(1).unwrap();
        let goals = polygon_goals(&FormationSpec::default()).unwrap();
        let cfg = ControllerConfig::default();
        let law = AnchoredLaplacianLaw::default();
        let mut x = vec![Vec2::new(-1.5, 0.7)];
        for _ in 0..400 {
            x = formation_step(&law, &x, &goals, &g, &cfg).unwrap();
        }
        assert!(x[0].distance(goals[0]) < 1e-12);
        // the plain law cannot move a lone agent
        let still = formation_step(&LaplacianLaw, &[Vec2::new(-1.5, 0.7)], &goals, &g, &cfg).unwrap();
        assert_eq!(still, vec![Vec2::new(-1.5, 0.7)]);
    }
}
