//! Distributed feedback optimisation for a swarm of unicycle robots.
//!
//! Each agent tracks a reference position with a low-level unicycle
//! controller while the references themselves follow a gradient flow on a
//! formation-plus-target cost. The gradient only needs neighbour-relative and
//! target-relative displacements, so the law runs agent by agent.
//!
//! Stacked planar vectors (`r`, `u`, gradients) are laid out agent-major:
//! `[x_1, y_1, x_2, y_2, ...]`.

pub mod analysis;
pub mod cli;
pub mod controller;
pub mod distributed;
pub mod dynamics;
mod error;
pub mod graph;
mod ode;
mod quad;
pub mod sim;

pub use error::{Error, Result};

/// A point or displacement in the plane, meters.
pub type Vec2 = nalgebra::Vector2<f64>;

pub use analysis::{optimal_configuration, steady_state_report, SteadyStateReport};
pub use controller::{cost, cost_gradient, CostBreakdown, GainConfig};
pub use dynamics::{AgentPose, ErrorState, LowLevelCommand};
pub use graph::{FormationSpec, SpectralSummary};
pub use sim::{integrate, Mode, Scenario, SwarmState, Trajectory};

/// Reads agent `i` out of a stacked `2N` vector.
#[inline]
pub fn agent_point(stacked: &nalgebra::DVector<f64>, i: usize) -> Vec2 {
    Vec2::new(stacked[2 * i], stacked[2 * i + 1])
}

/// Stacks `1_N ⊗ q`.
pub fn replicate(point: &Vec2, n: usize) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_fn(2 * n, |k, _| point[k % 2])
}
