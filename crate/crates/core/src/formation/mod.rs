//! Formation-control mathematics for single-integrator agents in the plane.
//!
//! Goals are vertices of a regular polygon. Relative errors are measured
//! along the edges of a [`FormationGraph`] and fed to a [`ControlLaw`]; one
//! explicit Euler step per frame advances the agents.

mod control;
mod graph;
mod vec2;

pub use control::{
    AnchoredLaplacianLaw, ControlLaw, ControlLawRegistry, LaplacianLaw, LawParams,
    DEFAULT_ANCHOR_GAIN,
};
pub use graph::{FormationGraph, LaplacianMatrix};
pub use vec2::Vec2;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormationError {
    #[error("formation graph must have at least one vertex")]
    EmptyGraph,
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("vertex {vertex} out of range for {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("formation graph is not connected")]
    Disconnected,
    #[error("polygon needs at least one side")]
    NoSides,
    #[error("radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("gain must be positive and finite, got {0}")]
    BadGain(f64),
    #[error("time step must be positive and finite, got {0}")]
    BadTimeStep(f64),
    #[error("expected {expected} entries, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("unstable step: dt * rate bound = {product} (must be < 2)")]
    Unstable { product: f64 },
    #[error("unknown control law `{0}`")]
    UnknownLaw(String),
}

/// Controller gain `k` and integration step `dt` (time units per frame).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub gain: f64,
    pub dt: f64,
}

impl ControllerConfig {
    pub fn new(gain: f64, dt: f64) -> Result<Self, FormationError> {
        let config = Self { gain, dt };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), FormationError> {
        if !(self.gain.is_finite() && self.gain > 0.0) {
            return Err(FormationError::BadGain(self.gain));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(FormationError::BadTimeStep(self.dt));
        }
        Ok(())
    }
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self { gain: 1.0, dt: 0.05 }
    }
}

/// Regular polygon template: `sides` vertices on a circle of `radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormationSpec {
    pub sides: usize,
    pub radius: f64,
    pub center: Vec2,
    pub phase: f64,
}

impl FormationSpec {
    pub fn new(sides: usize, radius: f64, center: Vec2, phase: f64) -> Result<Self, FormationError> {
        let spec = Self { sides, radius, center, phase };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_sides(mut self, sides: usize) -> Self {
        self.sides = sides;
        self
    }

    fn validate(&self) -> Result<(), FormationError> {
        if self.sides == 0 {
            return Err(FormationError::NoSides);
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(FormationError::BadRadius(self.radius));
        }
        Ok(())
    }
}

impl Default for FormationSpec {
    fn default() -> Self {
        Self { sides: 1, radius: 1.0, center: Vec2::ZERO, phase: 0.0 }
    }
}

/// Polygon vertices in index order. `libm` keeps the trigonometry
/// bit-reproducible across platforms.
pub fn polygon_goals(spec: &FormationSpec) -> Result<Vec<Vec2>, FormationError> {
    spec.validate()?;
    let sides = spec.sides as f64;
    Ok((0..spec.sides)
        .map(|i| {
            let angle = 2.0 * PI * i as f64 / sides + spec.phase;
            spec.center + Vec2::new(libm::cos(angle), libm::sin(angle)) * spec.radius
        })
        .collect())
}

/// Edge errors `e_ij`, keyed by normalized edge `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeErrors {
    errors: BTreeMap<(usize, usize), Vec2>,
}

impl EdgeErrors {
    /// `e_ij`, or `-e_ji` when asked in reverse orientation.
    pub fn get(&self, i: usize, j: usize) -> Option<Vec2> {
        if i < j {
            self.errors.get(&(i, j)).copied()
        } else {
            self.errors.get(&(j, i)).map(|&e| -e)
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), Vec2)> + '_ {
        self.errors.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }
}

fn check_len(expected: usize, actual: usize) -> Result<(), FormationError> {
    if expected != actual {
        return Err(FormationError::LengthMismatch { expected, actual });
    }
    Ok(())
}

/// Edge error for a single oriented pair: `(x_j - x_i) - (x_j* - x_i*)`.
fn edge_error(positions: &[Vec2], goals: &[Vec2], i: usize, j: usize) -> Vec2 {
    let relative = positions[j] - positions[i];
    let desired = goals[j] - goals[i];
    relative - desired
}

pub fn formation_errors(
    positions: &[Vec2],
    goals: &[Vec2],
    graph: &FormationGraph,
) -> Result<EdgeErrors, FormationError> {
    check_len(graph.n(), positions.len())?;
    check_len(graph.n(), goals.len())?;
    let errors = graph
        .edges()
        .map(|(i, j)| ((i, j), edge_error(positions, goals, i, j)))
        .collect();
    Ok(EdgeErrors { errors })
}

/// `u_i = -k * sum_{j != i} L_ij e_ij`, with `e_ij = 0` off the edge set.
pub fn control_inputs(
    positions: &[Vec2],
    goals: &[Vec2],
    graph: &FormationGraph,
    config: &ControllerConfig,
) -> Result<Vec<Vec2>, FormationError> {
    let errors = formation_errors(positions, goals, graph)?;
    let laplacian = graph.laplacian();
    let n = graph.n();
    Ok((0..n)
        .map(|i| {
            let mut sum = Vec2::ZERO;
            for j in (0..n).filter(|&j| j != i) {
                let l = laplacian.get(i, j);
                if l != 0.0 {
                    if let Some(e) = errors.get(i, j) {
                        sum += e * l;
                    }
                }
            }
            sum * -config.gain
        })
        .collect())
}

/// `x_i <- x_i + dt * u_i`.
pub fn euler_step(positions: &[Vec2], inputs: &[Vec2], dt: f64) -> Result<Vec<Vec2>, FormationError> {
    check_len(positions.len(), inputs.len())?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(FormationError::BadTimeStep(dt));
    }
    Ok(positions.iter().zip(inputs).map(|(&x, &u)| x + u * dt).collect())
}

/// `E = 0.5 * sum ||e_ij||^2`, each undirected edge counted once.
pub fn global_error(errors: &EdgeErrors) -> f64 {
    0.5 * errors.iter().map(|(_, e)| e.norm_squared()).sum::<f64>()
}

/// Rejects configurations where `dt` times the law's rate bound reaches 2.
pub fn check_stability(
    law: &dyn ControlLaw,
    graph: &FormationGraph,
    config: &ControllerConfig,
) -> Result<(), FormationError> {
    config.validate()?;
    let product = config.dt * law.rate_bound(graph, config);
    if product >= 2.0 {
        return Err(FormationError::Unstable { product });
    }
    Ok(())
}

/// One full control update: inputs from `law`, then one Euler step.
pub fn formation_step(
    law: &dyn ControlLaw,
    positions: &[Vec2],
    goals: &[Vec2],
    graph: &FormationGraph,
    config: &ControllerConfig,
) -> Result<Vec<Vec2>, FormationError> {
    let inputs = law.inputs(positions, goals, graph, config)?;
    euler_step(positions, &inputs, config.dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Vec2, b: Vec2, tol: f64) -> bool {
        (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol
    }

    #[test]
    fn square_goals() {
        let spec = FormationSpec::new(4, 1.0, Vec2::ZERO, 0.0).unwrap();
        let goals = polygon_goals(&spec).unwrap();
        let expected = [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(-1.0, 0.0), Vec2::new(0.0, -1.0)];
        for (g, e) in goals.iter().zip(expected) {
            assert!(close(*g, e, 1e-15), "{g} vs {e}");
        }
    }

    #[test]
    fn single_vertex_goal() {
        let spec = FormationSpec::new(1, 2.0, Vec2::ZERO, 0.0).unwrap();
        assert_eq!(polygon_goals(&spec).unwrap(), vec![Vec2::new(2.0, 0.0)]);
    }

    #[test]
    fn pentagon_side_length() {
        let spec = FormationSpec::new(5, 1.0, Vec2::ZERO, 0.0).unwrap();
        let goals = polygon_goals(&spec).unwrap();
        // chord of a 72 degree arc on the unit circle, evaluated independently
        let side = 2.0 * (36.0f64).to_radians().sin();
        assert!((side - 1.17557).abs() < 1e-5);
        for i in 0..5 {
            let d = goals[i].distance(goals[(i + 1) % 5]);
            assert!((d - side).abs() < 1e-12);
            assert!((goals[i].norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn polygon_rejects_bad_specs() {
        let bad_sides = FormationSpec { sides: 0, ..FormationSpec::default() };
        assert_eq!(polygon_goals(&bad_sides), Err(FormationError::NoSides));
        let bad_radius = FormationSpec { radius: 0.0, ..FormationSpec::default() };
        assert_eq!(polygon_goals(&bad_radius), Err(FormationError::BadRadius(0.0)));
        assert!(FormationSpec::new(3, -1.0, Vec2::ZERO, 0.0).is_err());
    }

    #[test]
    fn two_agent_errors_and_inputs() {
        let g = FormationGraph::complete(2).unwrap();
        let x = [Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0)];
        let goals = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)];
        let e = formation_errors(&x, &goals, &g).unwrap();
        assert_eq!(e.get(0, 1), Some(Vec2::new(1.0, 0.0)));
        assert_eq!(e.get(1, 0), Some(Vec2::new(-1.0, 0.0)));
        let u = control_inputs(&x, &goals, &g, &ControllerConfig::new(1.0, 0.05).unwrap()).unwrap();
        assert_eq!(u, vec![Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0)]);
    }

    #[test]
    fn zero_error_at_goals() {
        let g = FormationGraph::complete(4).unwrap();
        let goals = polygon_goals(&FormationSpec::default().with_sides(4)).unwrap();
        let e = formation_errors(&goals, &goals, &g).unwrap();
        assert!(e.iter().all(|(_, v)| v == Vec2::ZERO));
        assert_eq!(global_error(&e), 0.0);
        let u = control_inputs(&goals, &goals, &g, &ControllerConfig::default()).unwrap();
        assert!(u.iter().all(|&v| v == Vec2::ZERO));
        let next = euler_step(&goals, &u, 0.05).unwrap();
        assert_eq!(next, goals);
    }

    #[test]
    fn length_mismatch_rejected() {
        let g = FormationGraph::complete(3).unwrap();
        let x = [Vec2::ZERO; 2];
        let goals = [Vec2::ZERO; 3];
        assert_eq!(
            formation_errors(&x, &goals, &g),
            Err(FormationError::LengthMismatch { expected: 3, actual: 2 })
        );
        assert!(euler_step(&x, &goals, 0.1).is_err());
    }

    #[test]
    fn euler_arithmetic() {
        let next = euler_step(&[Vec2::new(1.0, 1.0)], &[Vec2::new(2.0, -2.0)], 0.5).unwrap();
        assert_eq!(next, vec![Vec2::new(2.0, 0.0)]);
        let still = euler_step(&[Vec2::new(3.0, 4.0)], &[Vec2::ZERO], 0.5).unwrap();
        assert_eq!(still, vec![Vec2::new(3.0, 4.0)]);
    }

    #[test]
    fn global_error_single_edge() {
        let g = FormationGraph::complete(2).unwrap();
        let x = [Vec2::ZERO, Vec2::new(3.0, 4.0)];
        let goals = [Vec2::ZERO, Vec2::ZERO];
        let e = formation_errors(&x, &goals, &g).unwrap();
        assert_eq!(global_error(&e), 12.5);
    }

    #[test]
    fn stability_guard() {
        let law = LaplacianLaw;
        let g = FormationGraph::complete(10).unwrap();
        assert!(check_stability(&law, &g, &ControllerConfig::default()).is_ok());
        let fast = ControllerConfig::new(1.0, 0.2).unwrap();
        assert!(matches!(check_stability(&law, &g, &fast), Err(FormationError::Unstable { .. })));
        assert!(ControllerConfig::new(0.0, 0.1).is_err());
        assert!(ControllerConfig::new(1.0, -0.1).is_err());
    }
}
