//! Agent-by-agent evaluation of the input flow from relative measurements.
//!
//! Every round, each agent receives one [`NeighborMessage`] per incident
//! formation edge carrying `p_self - p_neighbor`, plus its own offset from
//! the target. Absolute positions of other agents never enter an
//! [`AgentView`].

use nalgebra::DVector;

use crate::controller::GainConfig;
use crate::graph::FormationSpec;
use crate::sim::{self, Mode, SwarmState};
use crate::{Error, Result, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborMessage {
    /// One-based edge label.
    pub edge_label: usize,
    /// `p_receiver - p_sender`.
    pub relative_displacement: Vec2,
}

/// Everything agent `agent` may use in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentView {
    pub agent: usize,
    /// `p_i - q`.
    pub self_to_target: Vec2,
    /// Messages over edges where this agent is the head.
    pub in_messages: Vec<NeighborMessage>,
    /// Messages over edges where this agent is the tail.
    pub out_messages: Vec<NeighborMessage>,
}

impl AgentView {
    pub fn degree(&self) -> usize {
        self.in_messages.len() + self.out_messages.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
}

/// An edge as known locally: label, orientation relative to the owner and
/// its desired displacement `d_e` (always `p_tail - p_head`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalEdge {
    pub label: usize,
    pub direction: Direction,
    pub displacement: Vec2,
}

/// The slice of the formation an agent stores: its incident edges in label
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFormation {
    pub agent: usize,
    pub edges: Vec<LocalEdge>,
}

impl LocalFormation {
    pub fn of(spec: &FormationSpec, agent: usize) -> Self {
        let edges = spec
            .edges()
            .iter()
            .zip(spec.displacements())
            .enumerate()
            .filter_map(|(e, (edge, d))| {
                let direction = if edge.tail == agent {
                    Direction::Out
                } else if edge.head == agent {
                    Direction::In
                } else {
                    return None;
                };
                Some(LocalEdge {
                    label: e + 1,
                    direction,
                    displacement: *d,
                })
            })
            .collect();
        LocalFormation { agent, edges }
    }

    pub fn all(spec: &FormationSpec) -> Vec<Self> {
        (0..spec.n_agents()).map(|i| Self::of(spec, i)).collect()
    }
}

/// Snapshots every agent's view at the current instant.
pub fn collect_views(swarm: &SwarmState, spec: &FormationSpec, target: &Vec2) -> Vec<AgentView> {
    let positions: Vec<Vec2> = swarm.poses.iter().map(|p| p.position).collect();
    views_from_positions(&positions, spec, target)
}

pub(crate) fn views_from_positions(
    positions: &[Vec2],
    spec: &FormationSpec,
    target: &Vec2,
) -> Vec<AgentView> {
    let mut views: Vec<AgentView> = positions
        .iter()
        .enumerate()
        .map(|(agent, p)| AgentView {
            agent,
            self_to_target: p - target,
            in_messages: Vec::new(),
            out_messages: Vec::new(),
        })
        .collect();
    for (e, edge) in spec.edges().iter().enumerate() {
        let (pt, ph) = (positions[edge.tail], positions[edge.head]);
        views[edge.tail].out_messages.push(NeighborMessage {
            edge_label: e + 1,
            relative_displacement: pt - ph,
        });
        views[edge.head].in_messages.push(NeighborMessage {
            edge_label: e + 1,
            relative_displacement: ph - pt,
        });
    }
    views
}

/// `u̇_i = -εa Σ_out (p_i - p_j - d_ij) - εa Σ_in (p_i - p_j + d_ji) - εb (p_i - q)`.
pub fn local_input_derivative(
    view: &AgentView,
    local: &LocalFormation,
    gains: &GainConfig,
) -> Result<Vec2> {
    let mut sum = Vec2::zeros();
    for edge in &local.edges {
        let inbox = match edge.direction {
            Direction::Out => &view.out_messages,
            Direction::In => &view.in_messages,
        };
        let msg = inbox.iter().find(|m| m.edge_label == edge.label).ok_or(
            Error::MissingNeighborMessage {
                agent: local.agent,
                edge: edge.label,
            },
        )?;
        sum += match edge.direction {
            Direction::Out => msg.relative_displacement - edge.displacement,
            Direction::In => msg.relative_displacement + edge.displacement,
        };
    }
    Ok((sum * gains.a + view.self_to_target * gains.b) * -gains.epsilon)
}

/// Stacks every agent's local derivative into a `2N` vector.
pub fn stacked_input_derivative(
    views: &[AgentView],
    locals: &[LocalFormation],
    gains: &GainConfig,
) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(2 * views.len());
    for (i, (view, local)) in views.iter().zip(locals).enumerate() {
        let udot = local_input_derivative(view, local, gains)?;
        out[2 * i] = udot.x;
        out[2 * i + 1] = udot.y;
    }
    Ok(out)
}

/// One synchronous RK4 round: every stage snapshots all views, then each
/// agent updates its reference and pose from its own view only.
pub fn step_distributed(
    swarm: &SwarmState,
    spec: &FormationSpec,
    gains: &GainConfig,
    target: &Vec2,
    dt: f64,
) -> Result<SwarmState> {
    sim::step(swarm, spec, gains, target, dt, Mode::Distributed)
}
