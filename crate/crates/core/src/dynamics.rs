//! Unicycle plant, polar tracking-error coordinates and the low-level
//! tracking controller.

use std::f64::consts::{PI, TAU};

use crate::ode::Rk4;
use crate::quad::adaptive_simpson;
use crate::Vec2;

/// Below this distance the bearing to the reference is undefined and `phi` is
/// taken as zero.
pub const RHO_EPS: f64 = 1e-12;

/// Wraps an angle into `(-π, π]`. Values already in range are returned
/// unchanged, which makes the map exactly idempotent.
pub fn wrap_angle(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y <= -PI {
        PI
    } else {
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentPose {
    pub position: Vec2,
    /// Radians, kept in `(-π, π]`.
    pub heading: f64,
}

impl AgentPose {
    pub fn new(position: Vec2, heading: f64) -> Self {
        AgentPose {
            position,
            heading: wrap_angle(heading),
        }
    }
}

/// Distance and bearing error to the reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorState {
    pub rho: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowLevelCommand {
    pub v: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseDerivative {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDerivative {
    pub drho: f64,
    pub dphi: f64,
}

pub fn error_vars(pose: &AgentPose, reference: &Vec2) -> ErrorState {
    let e = reference - pose.position;
    let rho = e.norm();
    if rho < RHO_EPS {
        return ErrorState { rho, phi: 0.0 };
    }
    ErrorState {
        rho,
        phi: wrap_angle(e.y.atan2(e.x) - pose.heading),
    }
}

/// `v = kρ cos φ`, `ω = k (cos φ + 1) sin φ`.
pub fn low_level_control(err: &ErrorState, gain_k: f64) -> LowLevelCommand {
    let (s, c) = err.phi.sin_cos();
    LowLevelCommand {
        v: gain_k * err.rho * c,
        omega: gain_k * (c + 1.0) * s,
    }
}

pub fn plant_derivative(pose: &AgentPose, cmd: &LowLevelCommand) -> PoseDerivative {
    let (s, c) = pose.heading.sin_cos();
    PoseDerivative {
        dx: cmd.v * c,
        dy: cmd.v * s,
        dtheta: cmd.omega,
    }
}

/// Error dynamics under the tracking law with the reference held fixed:
/// `ρ̇ = -kρ cos²φ`, `φ̇ = -k sin φ`.
pub fn closed_loop_error_derivative(err: &ErrorState, gain_k: f64) -> ErrorDerivative {
    let (s, c) = err.phi.sin_cos();
    ErrorDerivative {
        drho: -gain_k * err.rho * c * c,
        dphi: -gain_k * s,
    }
}

/// `ρ(t) = ρ₀ exp(-k ∫₀ᵗ cos²φ(s) ds)` along a given bearing trajectory.
pub fn explicit_rho_solution<F: Fn(f64) -> f64>(rho0: f64, phi: F, gain_k: f64, t: f64) -> f64 {
    let integral = adaptive_simpson(
        &|s| {
            let c = phi(s).cos();
            c * c
        },
        0.0,
        t,
        1e-13 * t.max(1.0),
    );
    rho0 * (-gain_k * integral).exp()
}

/// Closed-loop derivative of one agent tracking `reference`.
pub(crate) fn tracking_derivative(
    pose: &AgentPose,
    reference: &Vec2,
    gain_k: f64,
) -> PoseDerivative {
    let cmd = low_level_control(&error_vars(pose, reference), gain_k);
    plant_derivative(pose, &cmd)
}

/// Simulates one agent tracking a fixed reference with RK4. Returns the pose
/// after every step, starting with `pose0` at `t = 0`.
pub fn track_fixed_reference(
    pose0: AgentPose,
    reference: Vec2,
    gain_k: f64,
    dt: f64,
    t_final: f64,
) -> Vec<(f64, AgentPose)> {
    let steps = (t_final / dt).round() as usize;
    let mut x = [pose0.position.x, pose0.position.y, pose0.heading];
    let mut rk = Rk4::new(3);
    let mut out = Vec::with_capacity(steps + 1);
    out.push((0.0, pose0));
    for i in 1..=steps {
        rk.step(&mut x, dt, |x, dx| {
            let pose = AgentPose {
                position: Vec2::new(x[0], x[1]),
                heading: x[2],
            };
            let d = tracking_derivative(&pose, &reference, gain_k);
            dx.copy_from_slice(&[d.dx, d.dy, d.dtheta]);
            Ok::<_, std::convert::Infallible>(())
        })
        .unwrap();
        x[2] = wrap_angle(x[2]);
        out.push((i as f64 * dt, AgentPose::new(Vec2::new(x[0], x[1]), x[2])));
    }
    out
}

/// Fits an exponential envelope `ρ(t) ≤ M e^{-μ t}` to sampled distances.
///
/// `μ` is the least-squares decay rate of `ln ρ` over the second half of the
/// samples; `M` is the smallest constant making the bound hold at every
/// sample. Returns `None` when the fitted rate is not positive.
pub fn decay_envelope(times: &[f64], rho: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(rho)
        .skip(times.len() / 2)
        .filter(|(_, r)| **r > 0.0)
        .map(|(t, r)| (*t, r.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mt, ml) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, l)| (a + t / n, b + l / n));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (t, l)| {
        (a + (t - mt) * (l - ml), b + (t - mt) * (t - mt))
    });
    let mu = -sxy / sxx;
    if mu.is_nan() || mu <= 0.0 {
        return None;
    }
    let m = times
        .iter()
        .zip(rho)
        .map(|(t, r)| r * (mu * t).exp())
        .fold(0.0, f64::max);
    Some((m, mu))
}
