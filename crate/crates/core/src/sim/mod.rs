//! Fixed-step RK4 integration of the full closed loop: unicycle plants with
//! their tracking controllers, driven by the gradient flow on the references.

pub mod scenarios;

use std::f64::consts::{PI, TAU};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::optimal_configuration;
use crate::controller::{cost, gradient_into, lipschitz_constant, GainConfig};
use crate::distributed::{local_input_derivative, views_from_positions, LocalFormation};
use crate::dynamics::{tracking_derivative, wrap_angle, AgentPose};
use crate::graph::FormationSpec;
use crate::ode::Rk4;
use crate::{agent_point, replicate, Error, Result, Vec2};

pub use scenarios::{builtin_scenario, builtin_scenarios};

/// Samples a convergence window must span.
pub const CONVERGENCE_WINDOW: usize = 100;

pub const DEFAULT_STRIDE: usize = 10;

pub const DEFAULT_CONVERGENCE_TOL: f64 = 1e-6;

/// How the input derivative is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `-ε ∇Φ(r)` from the stacked positions.
    Centralized,
    /// Per-agent law over snapshotted relative views.
    Distributed,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centralized" => Ok(Mode::Centralized),
            "distributed" => Ok(Mode::Distributed),
            other => Err(Error::Parse(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub poses: Vec<AgentPose>,
    /// Stacked reference positions `u`.
    pub inputs: DVector<f64>,
    pub time: f64,
}

impl SwarmState {
    /// Stacked positions `r`.
    pub fn positions(&self) -> DVector<f64> {
        DVector::from_iterator(
            2 * self.poses.len(),
            self.poses.iter().flat_map(|p| [p.position.x, p.position.y]),
        )
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut x: Vec<f64> = self
            .poses
            .iter()
            .flat_map(|p| [p.position.x, p.position.y, p.heading])
            .collect();
        x.extend(self.inputs.iter());
        x
    }

    fn from_flat(x: &[f64], n: usize, time: f64) -> Self {
        SwarmState {
            poses: (0..n)
                .map(|i| AgentPose::new(Vec2::new(x[3 * i], x[3 * i + 1]), x[3 * i + 2]))
                .collect(),
            inputs: DVector::from_column_slice(&x[3 * n..]),
            time,
        }
    }
}

/// Where the agents start.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialPoses {
    /// Uniform in a disc of `radius` around the origin, uniform headings.
    Random {
        radius: f64,
        seed: u64,
    },
    Explicit(Vec<AgentPose>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub spec: FormationSpec,
    pub gains: GainConfig,
    pub target: Vec2,
    pub initial: InitialPoses,
    pub t_final: f64,
    pub dt: f64,
}

impl Scenario {
    /// Checks every scenario invariant, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        self.gains
            .validate()
            .map_err(|e| Error::validation("gains", e))?;
        let n = self.spec.n_agents();
        if self.gains.k.len() != n {
            return Err(Error::validation(
                "gains.k",
                Error::DimensionMismatch {
                    what: "tracking gains",
                    expected: n,
                    found: self.gains.k.len(),
                },
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::validation(
                "dt",
                Error::NonpositiveInput {
                    name: "dt",
                    value: self.dt,
                },
            ));
        }
        if !(self.t_final >= self.dt && self.t_final.is_finite()) {
            return Err(Error::validation(
                "t_final",
                Error::Parse(format!(
                    "t_final {} must be at least dt {}",
                    self.t_final, self.dt
                )),
            ));
        }
        match &self.initial {
            InitialPoses::Random { radius, .. } if !(*radius > 0.0 && radius.is_finite()) => {
                Err(Error::validation(
                    "initial.radius",
                    Error::NonpositiveInput {
                        name: "radius",
                        value: *radius,
                    },
                ))
            }
            InitialPoses::Explicit(poses) if poses.len() != n => Err(Error::validation(
                "initial.poses",
                Error::DimensionMismatch {
                    what: "initial poses",
                    expected: n,
                    found: poses.len(),
                },
            )),
            _ => Ok(()),
        }
    }

    /// Largest step the integrator accepts: `0.1 / max(k_max, ε ℓ)`.
    pub fn max_stable_dt(&self) -> f64 {
        max_stable_dt(&self.spec, &self.gains)
    }

    /// Initial state with `u(0) = r(0)`.
    pub fn initial_state(&self) -> SwarmState {
        let poses = match &self.initial {
            InitialPoses::Explicit(poses) => poses.clone(),
            InitialPoses::Random { radius, seed } => {
                random_poses(self.spec.n_agents(), *radius, *seed)
            }
        };
        let mut state = SwarmState {
            poses,
            inputs: DVector::zeros(0),
            time: 0.0,
        };
        state.inputs = state.positions();
        state
    }
}

pub fn max_stable_dt(spec: &FormationSpec, gains: &GainConfig) -> f64 {
    0.1 / gains
        .k_max()
        .max(gains.epsilon * lipschitz_constant(spec, gains))
}

/// Seeded uniform positions in a disc and headings in `(-π, π)`.
pub fn random_poses(n: usize, radius: f64, seed: u64) -> Vec<AgentPose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let angle = TAU * rng.random::<f64>();
            let heading = loop {
                // PI - TAU * [0, 1) lies in (-π, π]; drop the exact reversal
                let h = PI - TAU * rng.random::<f64>();
                if h != PI {
                    break h;
                }
            };
            AgentPose::new(Vec2::new(r * angle.cos(), r * angle.sin()), heading)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub state: SwarmState,
    pub cost_total: f64,
    pub gradient_norm: f64,
    pub formation_residual: f64,
    pub target_distance: f64,
}

/// Recorded run. Samples are `stride * dt` apart, except that the final
/// state is always recorded even when the step count is not a multiple of
/// the stride.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub stride: usize,
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectorySample {
        self.samples
            .last()
            .expect("trajectories hold at least the initial sample")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceVerdict {
    pub converged: bool,
    pub t_converged: Option<f64>,
    pub final_formation_residual: f64,
    pub final_target_distance: f64,
    /// `|r(t_final) - r∞|`.
    pub r_inf_deviation: f64,
}

/// Closed-loop right-hand side over the flat `[x, y, θ]*N ++ u` layout.
struct ClosedLoop<'a> {
    spec: &'a FormationSpec,
    gains: &'a GainConfig,
    target: Vec2,
    mode: Mode,
    locals: Vec<LocalFormation>,
    positions: Vec<f64>,
    gradient: Vec<f64>,
}

impl<'a> ClosedLoop<'a> {
    fn new(spec: &'a FormationSpec, gains: &'a GainConfig, target: &Vec2, mode: Mode) -> Self {
        let n = spec.n_agents();
        ClosedLoop {
            spec,
            gains,
            target: *target,
            mode,
            locals: match mode {
                Mode::Distributed => LocalFormation::all(spec),
                Mode::Centralized => Vec::new(),
            },
            positions: vec![0.0; 2 * n],
            gradient: vec![0.0; 2 * n],
        }
    }

    fn eval(&mut self, x: &[f64], dx: &mut [f64]) -> Result<()> {
        let n = self.spec.n_agents();
        let (poses, refs) = x.split_at(3 * n);
        let (dposes, drefs) = dx.split_at_mut(3 * n);
        for i in 0..n {
            let pose = AgentPose {
                position: Vec2::new(poses[3 * i], poses[3 * i + 1]),
                heading: poses[3 * i + 2],
            };
            let reference = Vec2::new(refs[2 * i], refs[2 * i + 1]);
            let d = tracking_derivative(&pose, &reference, self.gains.k[i]);
            dposes[3 * i] = d.dx;
            dposes[3 * i + 1] = d.dy;
            dposes[3 * i + 2] = d.dtheta;
            self.positions[2 * i] = pose.position.x;
            self.positions[2 * i + 1] = pose.position.y;
        }
        match self.mode {
            Mode::Centralized => {
                gradient_into(
                    &self.positions,
                    self.spec,
                    self.gains,
                    &self.target,
                    &mut self.gradient,
                );
                for (out, g) in drefs.iter_mut().zip(&self.gradient) {
                    *out = -self.gains.epsilon * g;
                }
            }
            Mode::Distributed => {
                let points: Vec<Vec2> = (0..n)
                    .map(|i| Vec2::new(self.positions[2 * i], self.positions[2 * i + 1]))
                    .collect();
                let views = views_from_positions(&points, self.spec, &self.target);
                for (i, (view, local)) in views.iter().zip(&self.locals).enumerate() {
                    let udot = local_input_derivative(view, local, self.gains)?;
                    drefs[2 * i] = udot.x;
                    drefs[2 * i + 1] = udot.y;
                }
            }
        }
        Ok(())
    }
}

fn check_inputs(state: &SwarmState, spec: &FormationSpec, gains: &GainConfig) -> Result<()> {
    let n = spec.n_agents();
    gains.validate()?;
    for (what, found, expected) in [
        ("poses", state.poses.len(), n),
        ("inputs", state.inputs.len(), 2 * n),
        ("tracking gains", gains.k.len(), n),
    ] {
        if found != expected {
            return Err(Error::DimensionMismatch {
                what,
                expected,
                found,
            });
        }
    }
    Ok(())
}

fn finish_step(x: &mut [f64], n: usize, time: f64) -> Result<()> {
    for i in 0..n {
        x[3 * i + 2] = wrap_angle(x[3 * i + 2]);
    }
    match x.iter().position(|v| !v.is_finite()) {
        Some(component) => Err(Error::UnstableStep { time, component }),
        None => Ok(()),
    }
}

/// Advances the closed loop by one RK4 step. `dt = 0` returns the state
/// unchanged.
pub fn step(
    state: &SwarmState,
    spec: &FormationSpec,
    gains: &GainConfig,
    target: &Vec2,
    dt: f64,
    mode: Mode,
) -> Result<SwarmState> {
    check_inputs(state, spec, gains)?;
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let n = spec.n_agents();
    let mut x = state.to_flat();
    let mut rhs = ClosedLoop::new(spec, gains, target, mode);
    Rk4::new(x.len()).step(&mut x, dt, |x, dx| rhs.eval(x, dx))?;
    let time = state.time + dt;
    finish_step(&mut x, n, time)?;
    Ok(SwarmState::from_flat(&x, n, time))
}

fn sample(
    state: SwarmState,
    spec: &FormationSpec,
    gains: &GainConfig,
    target: &Vec2,
) -> TrajectorySample {
    let r = state.positions();
    let mut grad = vec![0.0; r.len()];
    gradient_into(r.as_slice(), spec, gains, target, &mut grad);
    TrajectorySample {
        time: state.time,
        cost_total: cost(&r, spec, gains, target)
            .map(|c| c.total)
            .unwrap_or(f64::NAN),
        gradient_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
        formation_residual: spec.edge_residuals(&r).norm(),
        target_distance: (&r - replicate(target, spec.n_agents())).norm(),
        state,
    }
}

pub fn integrate(scenario: &Scenario, mode: Mode) -> Result<Trajectory> {
    integrate_with_stride(scenario, mode, DEFAULT_STRIDE)
}

/// Integrates from the scenario's initial state, recording every `stride`-th
/// step.
pub fn integrate_with_stride(scenario: &Scenario, mode: Mode, stride: usize) -> Result<Trajectory> {
    integrate_from(scenario, scenario.initial_state(), mode, stride)
}

/// Integrates `scenario` starting from an arbitrary state, for
/// `t_final` seconds past `initial.time`.
pub fn integrate_from(
    scenario: &Scenario,
    initial: SwarmState,
    mode: Mode,
    stride: usize,
) -> Result<Trajectory> {
    let Scenario {
        spec,
        gains,
        target,
        dt,
        t_final,
        ..
    } = scenario;
    check_inputs(&initial, spec, gains)?;
    if !(*dt > 0.0 && dt.is_finite()) {
        return Err(Error::NonpositiveInput {
            name: "dt",
            value: *dt,
        });
    }
    if !(*t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::NonpositiveInput {
            name: "t_final",
            value: *t_final,
        });
    }
    let limit = max_stable_dt(spec, gains);
    if *dt > limit * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt: *dt, limit });
    }
    let stride = stride.max(1);
    let n = spec.n_agents();
    let steps = (t_final / dt).round() as usize;
    let t0 = initial.time;

    let mut x = initial.to_flat();
    let mut samples = Vec::with_capacity(steps / stride + 2);
    samples.push(sample(initial, spec, gains, target));

    let mut rhs = ClosedLoop::new(spec, gains, target, mode);
    let mut rk = Rk4::new(x.len());
    for s in 1..=steps {
        let time = t0 + s as f64 * dt;
        rk.step(&mut x, *dt, |x, dx| rhs.eval(x, dx))?;
        finish_step(&mut x, n, time)?;
        if s % stride == 0 || s == steps {
            samples.push(sample(
                SwarmState::from_flat(&x, n, time),
                spec,
                gains,
                target,
            ));
        }
    }
    Ok(Trajectory {
        dt: *dt,
        stride,
        samples,
    })
}

/// Finds the first sample from which `|∇Φ| ≤ tol (1 + |r|)` holds for
/// [`CONVERGENCE_WINDOW`] consecutive samples (or for the whole trajectory
/// when it is shorter than that).
pub fn detect_convergence(
    traj: &Trajectory,
    spec: &FormationSpec,
    gains: &GainConfig,
    target: &Vec2,
    tol: f64,
) -> Result<ConvergenceVerdict> {
    let ok: Vec<bool> = traj
        .samples
        .iter()
        .map(|s| s.gradient_norm <= tol * (1.0 + s.state.positions().norm()))
        .collect();
    let window = CONVERGENCE_WINDOW.min(ok.len());
    let mut run = 0;
    let mut t_converged = None;
    for (i, good) in ok.iter().enumerate() {
        run = if *good { run + 1 } else { 0 };
        if window > 0 && run == window {
            t_converged = Some(traj.samples[i + 1 - window].time);
            break;
        }
    }
    let last = traj.last();
    let r_inf = optimal_configuration(spec, gains, target)?;
    Ok(ConvergenceVerdict {
        converged: t_converged.is_some(),
        t_converged,
        final_formation_residual: last.formation_residual,
        final_target_distance: last.target_distance,
        r_inf_deviation: (last.state.positions() - r_inf).norm(),
    })
}

/// Positions of agent `i` in a sample, for plotting and checks.
pub fn agent_position(sample: &TrajectorySample, i: usize) -> Vec2 {
    agent_point(&sample.state.positions(), i)
}
