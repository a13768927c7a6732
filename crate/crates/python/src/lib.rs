//! Python bindings: formation specs, gains, closed-form analysis, scenarios
//! and simulation.
//!
//! Stacked vectors cross the boundary as flat lists `[x1, y1, x2, y2, ...]`;
//! agent indices are zero-based.

use nalgebra::DVector;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use swarmfo::analysis::{formation_error_curve, CurvePoint};
use swarmfo::cli::{parse_scenario_file, parse_scenario_str, scenario_to_json};
use swarmfo::graph::desired_configuration;
use swarmfo::sim::{
    builtin_scenarios, detect_convergence, ConvergenceVerdict, Trajectory, DEFAULT_CONVERGENCE_TOL,
};
use swarmfo::{FormationSpec, GainConfig, Mode, Scenario, Vec2};

fn err(e: swarmfo::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn vec2(p: (f64, f64)) -> Vec2 {
    Vec2::new(p.0, p.1)
}

fn pairs(d: Vec<(f64, f64)>) -> Vec<Vec2> {
    d.into_iter().map(vec2).collect()
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    mode.parse().map_err(err)
}

#[pyclass(name = "FormationSpec", module = "swarmfo", frozen)]
struct PySpec(FormationSpec);

#[pymethods]
impl PySpec {
    /// From an N x M incidence matrix (rows of -1/0/1) and one `(dx, dy)`
    /// per edge.
    #[new]
    fn new(incidence: Vec<Vec<i32>>, displacements: Vec<(f64, f64)>) -> PyResult<Self> {
        FormationSpec::from_incidence(&incidence, pairs(displacements))
            .map(PySpec)
            .map_err(err)
    }

    /// From zero-based `(tail, head)` pairs.
    #[staticmethod]
    fn from_edges(
        n_agents: usize,
        edges: Vec<(usize, usize)>,
        displacements: Vec<(f64, f64)>,
    ) -> PyResult<Self> {
        FormationSpec::from_edges(n_agents, &edges, pairs(displacements))
            .map(PySpec)
            .map_err(err)
    }

    #[getter]
    fn n_agents(&self) -> usize {
        self.0.n_agents()
    }

    #[getter]
    fn n_edges(&self) -> usize {
        self.0.n_edges()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.edges().iter().map(|e| (e.tail, e.head)).collect()
    }

    #[getter]
    fn displacements(&self) -> Vec<(f64, f64)> {
        self.0.displacements().iter().map(|d| (d.x, d.y)).collect()
    }

    fn laplacian(&self) -> Vec<Vec<f64>> {
        let l = self.0.laplacian_matrix();
        l.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    /// Laplacian eigenvalues, ascending.
    fn eigenvalues(&self) -> Vec<f64> {
        self.0.spectrum().eigenvalues
    }

    #[getter]
    fn lambda2(&self) -> f64 {
        self.0.spectrum().lambda2
    }

    #[getter]
    fn lambda_max(&self) -> f64 {
        self.0.spectrum().lambda_max
    }

    /// `(r_star, d_q)`: the exact formation centred on `target` and its
    /// offsets from the target.
    fn desired_configuration(&self, target: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
        let (r, d) = desired_configuration(&self.0, &vec2(target));
        (r.as_slice().to_vec(), d.as_slice().to_vec())
    }

    fn __repr__(&self) -> String {
        format!(
            "FormationSpec(n_agents={}, n_edges={})",
            self.0.n_agents(),
            self.0.n_edges()
        )
    }
}

#[pyclass(name = "GainConfig", module = "swarmfo", frozen)]
struct PyGains(GainConfig);

#[pymethods]
impl PyGains {
    #[new]
    fn new(a: f64, b: f64, epsilon: f64, k: Vec<f64>) -> PyResult<Self> {
        GainConfig::new(a, b, epsilon, k).map(PyGains).map_err(err)
    }

    /// Uniform tracking gain `k` and the default timescale for `spec`.
    #[staticmethod]
    fn with_default_epsilon(spec: PyRef<'_, PySpec>, a: f64, b: f64, k: f64) -> PyResult<Self> {
        GainConfig::with_default_epsilon(&spec.0, a, b, k)
            .map(PyGains)
            .map_err(err)
    }

    #[getter]
    fn a(&self) -> f64 {
        self.0.a
    }

    #[getter]
    fn b(&self) -> f64 {
        self.0.b
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.0.epsilon
    }

    #[getter]
    fn k(&self) -> Vec<f64> {
        self.0.k.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "GainConfig(a={}, b={}, epsilon={}, k={:?})",
            self.0.a, self.0.b, self.0.epsilon, self.0.k
        )
    }
}

#[pyclass(name = "Scenario", module = "swarmfo", frozen)]
struct PyScenario(Scenario);

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        swarmfo::sim::builtin_scenario(name)
            .map(PyScenario)
            .map_err(err)
    }

    #[staticmethod]
    fn from_file(path: std::path::PathBuf) -> PyResult<Self> {
        parse_scenario_file(&path).map(PyScenario).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse_scenario_str(text, "scenario")
            .map(PyScenario)
            .map_err(err)
    }

    fn to_json(&self) -> String {
        scenario_to_json(&self.0)
    }

    /// Copy with any of `t_final`, `dt` or `seed` replaced.
    #[pyo3(signature = (*, t_final=None, dt=None, seed=None))]
    fn with_overrides(
        &self,
        t_final: Option<f64>,
        dt: Option<f64>,
        seed: Option<u64>,
    ) -> PyResult<Self> {
        let mut s = self.0.clone();
        if let Some(t) = t_final {
            s.t_final = t;
        }
        if let Some(dt) = dt {
            s.dt = dt;
        }
        if let (Some(seed), swarmfo::sim::InitialPoses::Random { seed: old, .. }) =
            (seed, &mut s.initial)
        {
            *old = seed;
        }
        s.validate().map_err(err)?;
        Ok(PyScenario(s))
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name.clone()
    }

    #[getter]
    fn spec(&self) -> PySpec {
        PySpec(self.0.spec.clone())
    }

    #[getter]
    fn gains(&self) -> PyGains {
        PyGains(self.0.gains.clone())
    }

    #[getter]
    fn target(&self) -> (f64, f64) {
        (self.0.target.x, self.0.target.y)
    }

    #[getter]
    fn t_final(&self) -> f64 {
        self.0.t_final
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.0.dt
    }

    fn max_stable_dt(&self) -> f64 {
        self.0.max_stable_dt()
    }

    /// Integrates the closed loop; `mode` is "centralized" or "distributed".
    #[pyo3(signature = (mode="centralized"))]
    fn simulate(&self, py: Python<'_>, mode: &str) -> PyResult<PyTrajectory> {
        let mode = parse_mode(mode)?;
        let scenario = self.0.clone();
        let traj = py
            .detach(move || swarmfo::sim::integrate(&scenario, mode))
            .map_err(err)?;
        Ok(PyTrajectory(traj))
    }

    /// Convergence verdict for a trajectory of this scenario.
    #[pyo3(signature = (trajectory, tol=DEFAULT_CONVERGENCE_TOL))]
    fn detect_convergence<'py>(
        &self,
        py: Python<'py>,
        trajectory: PyRef<'_, PyTrajectory>,
        tol: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let s = &self.0;
        let v =
            detect_convergence(&trajectory.0, &s.spec, &s.gains, &s.target, tol).map_err(err)?;
        verdict_dict(py, &v)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario({:?}, n_agents={})",
            self.0.name,
            self.0.spec.n_agents()
        )
    }
}

#[pyclass(name = "Trajectory", module = "swarmfo", frozen)]
struct PyTrajectory(Trajectory);

impl PyTrajectory {
    fn column(&self, f: impl Fn(&swarmfo::sim::TrajectorySample) -> f64) -> Vec<f64> {
        self.0.samples.iter().map(f).collect()
    }
}

#[pymethods]
impl PyTrajectory {
    fn __len__(&self) -> usize {
        self.0.samples.len()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.column(|s| s.time)
    }

    /// Stacked positions per sample.
    #[getter]
    fn positions(&self) -> Vec<Vec<f64>> {
        self.0
            .samples
            .iter()
            .map(|s| s.state.positions().as_slice().to_vec())
            .collect()
    }

    #[getter]
    fn headings(&self) -> Vec<Vec<f64>> {
        self.0
            .samples
            .iter()
            .map(|s| s.state.poses.iter().map(|p| p.heading).collect())
            .collect()
    }

    /// Stacked reference positions per sample.
    #[getter]
    fn inputs(&self) -> Vec<Vec<f64>> {
        self.0
            .samples
            .iter()
            .map(|s| s.state.inputs.as_slice().to_vec())
            .collect()
    }

    #[getter]
    fn cost(&self) -> Vec<f64> {
        self.column(|s| s.cost_total)
    }

    #[getter]
    fn gradient_norm(&self) -> Vec<f64> {
        self.column(|s| s.gradient_norm)
    }

    #[getter]
    fn formation_residual(&self) -> Vec<f64> {
        self.column(|s| s.formation_residual)
    }

    #[getter]
    fn target_distance(&self) -> Vec<f64> {
        self.column(|s| s.target_distance)
    }
}

fn verdict_dict<'py>(py: Python<'py>, v: &ConvergenceVerdict) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("converged", v.converged)?;
    d.set_item("t_converged", v.t_converged)?;
    d.set_item("final_formation_residual", v.final_formation_residual)?;
    d.set_item("final_target_distance", v.final_target_distance)?;
    d.set_item("r_inf_deviation", v.r_inf_deviation)?;
    Ok(d)
}

fn curve_dict<'py>(py: Python<'py>, c: &CurvePoint) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("a", c.a)?;
    d.set_item("gain_ratio", c.gain_ratio)?;
    d.set_item("formation_residual", c.formation_residual)?;
    d.set_item("target_distance", c.target_distance)?;
    d.set_item("in_formation_regime", c.in_formation_regime)?;
    Ok(d)
}

/// `{"formation_term", "target_term", "total"}` at stacked positions `r`.
#[pyfunction]
fn cost<'py>(
    py: Python<'py>,
    r: Vec<f64>,
    spec: PyRef<'_, PySpec>,
    gains: PyRef<'_, PyGains>,
    target: (f64, f64),
) -> PyResult<Bound<'py, PyDict>> {
    let c = swarmfo::cost(&DVector::from_vec(r), &spec.0, &gains.0, &vec2(target)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("formation_term", c.formation_term)?;
    d.set_item("target_term", c.target_term)?;
    d.set_item("total", c.total)?;
    Ok(d)
}

#[pyfunction]
fn cost_gradient(
    r: Vec<f64>,
    spec: PyRef<'_, PySpec>,
    gains: PyRef<'_, PyGains>,
    target: (f64, f64),
) -> PyResult<Vec<f64>> {
    swarmfo::cost_gradient(&DVector::from_vec(r), &spec.0, &gains.0, &vec2(target))
        .map(|g| g.as_slice().to_vec())
        .map_err(err)
}

/// Stacked positions the swarm converges to.
#[pyfunction]
fn optimal_configuration(
    spec: PyRef<'_, PySpec>,
    gains: PyRef<'_, PyGains>,
    target: (f64, f64),
) -> PyResult<Vec<f64>> {
    swarmfo::optimal_configuration(&spec.0, &gains.0, &vec2(target))
        .map(|r| r.as_slice().to_vec())
        .map_err(err)
}

#[pyfunction]
fn steady_state_report<'py>(
    py: Python<'py>,
    spec: PyRef<'_, PySpec>,
    gains: PyRef<'_, PyGains>,
    target: (f64, f64),
) -> PyResult<Bound<'py, PyDict>> {
    let r = swarmfo::steady_state_report(&spec.0, &gains.0, &vec2(target)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("r_inf", r.r_inf)?;
    d.set_item("formation_residual", r.formation_residual)?;
    d.set_item("target_distance", r.target_distance)?;
    d.set_item("d_q_norm", r.d_q_norm)?;
    d.set_item("lambda2", r.lambda2)?;
    d.set_item("gain_ratio", r.gain_ratio)?;
    d.set_item("shrink_factor", r.shrink_factor)?;
    d.set_item("in_formation", r.in_formation)?;
    Ok(d)
}

/// Closed-form residual and target distance for each formation weight.
#[pyfunction]
fn formation_curve<'py>(
    py: Python<'py>,
    spec: PyRef<'_, PySpec>,
    target: (f64, f64),
    b: f64,
    a_values: Vec<f64>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let curve = formation_error_curve(&spec.0, &vec2(target), b, &a_values).map_err(err)?;
    curve.iter().map(|c| curve_dict(py, c)).collect()
}

#[pyfunction]
fn builtin_scenario_names() -> Vec<String> {
    builtin_scenarios().into_iter().map(|s| s.name).collect()
}

#[pymodule]
#[pyo3(name = "swarmfo")]
fn swarmfo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpec>()?;
    m.add_class::<PyGains>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(cost, m)?)?;
    m.add_function(wrap_pyfunction!(cost_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_configuration, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state_report, m)?)?;
    m.add_function(wrap_pyfunction!(formation_curve, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_scenario_names, m)?)?;
    Ok(())
}
