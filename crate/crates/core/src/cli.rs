//! Scenario files, run orchestration and result emission.
//!
//! Every float written by this module carries 17 significant digits, so
//! emitted scenarios parse back bit-for-bit.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::analysis::{formation_error_curve, steady_state_report, CurvePoint, SteadyStateReport};
use crate::controller::{default_epsilon, GainConfig};
use crate::dynamics::AgentPose;
use crate::graph::FormationSpec;
use crate::sim::{
    builtin_scenario, detect_convergence, integrate, ConvergenceVerdict, InitialPoses, Mode,
    Scenario, Trajectory, DEFAULT_CONVERGENCE_TOL,
};
use crate::{Error, Result, Vec2};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CURVE_FILE: &str = "curve.csv";

/// Output artefacts a run may write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Emit {
    TrajectoryCsv,
    SummaryJson,
    CurveCsv,
}

impl std::str::FromStr for Emit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trajectory_csv" => Ok(Emit::TrajectoryCsv),
            "summary_json" => Ok(Emit::SummaryJson),
            "curve_csv" => Ok(Emit::CurveCsv),
            other => Err(Error::Parse(format!("unknown output `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Built-in scenario name or path to a scenario JSON file.
    pub scenario: String,
    pub mode: Mode,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    /// Replaces the seed of randomly initialised scenarios.
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub emit: Vec<Emit>,
    /// Formation weights for a sweep; requires [`Emit::CurveCsv`].
    pub sweep_a: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn new(scenario: impl Into<String>, output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            scenario: scenario.into(),
            mode: Mode::Centralized,
            dt: None,
            t_final: None,
            seed: None,
            output_dir: output_dir.into(),
            emit: vec![Emit::TrajectoryCsv, Emit::SummaryJson],
            sweep_a: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, value) in [("dt", self.dt), ("t_final", self.t_final)] {
            if let Some(v) = value {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::validation(
                        field,
                        Error::NonpositiveInput {
                            name: "override",
                            value: v,
                        },
                    ));
                }
            }
        }
        match (&self.sweep_a, self.emit.contains(&Emit::CurveCsv)) {
            (Some(_), false) => Err(Error::InvalidSweep(
                "--sweep-a needs curve_csv in the outputs".into(),
            )),
            (None, true) => Err(Error::InvalidSweep("curve_csv needs --sweep-a".into())),
            _ => Ok(()),
        }
    }

    /// Loads the scenario and applies the overrides. A horizon shorter than
    /// the scenario's step, with no step override, also shortens the step.
    pub fn resolve_scenario(&self) -> Result<Scenario> {
        let path = Path::new(&self.scenario);
        let mut scenario = if path.extension().is_some_and(|e| e == "json") || path.is_file() {
            parse_scenario_file(path)?
        } else {
            builtin_scenario(&self.scenario)?
        };
        if let Some(dt) = self.dt {
            scenario.dt = dt;
        }
        if let Some(t) = self.t_final {
            scenario.t_final = t;
            if self.dt.is_none() && t < scenario.dt {
                scenario.dt = t;
            }
        }
        if let (Some(seed), InitialPoses::Random { seed: s, .. }) =
            (self.seed, &mut scenario.initial)
        {
            *s = seed;
        }
        scenario.validate()?;
        Ok(scenario)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub mode: Mode,
    pub dt: f64,
    pub t_final: f64,
    pub epsilon: f64,
    pub report: SteadyStateReport,
    pub verdict: ConvergenceVerdict,
}

/// One sweep row: closed form plus the simulated endpoint at that weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub curve: CurvePoint,
    pub epsilon: f64,
    pub sim_formation_residual: f64,
    pub sim_target_distance: f64,
    pub sim_converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub summary: Option<RunSummary>,
    pub sweep: Option<Vec<SweepRow>>,
    pub written: Vec<PathBuf>,
}

impl RunOutcome {
    /// 0 when the main run converged or only a sweep was requested, 2 when
    /// the main run did not converge.
    pub fn exit_code(&self) -> i32 {
        match &self.summary {
            Some(s) if !s.verdict.converged => 2,
            _ => 0,
        }
    }
}

/// Runs `config`, reporting errors on stderr. Returns the process exit code.
pub fn run(config: &RunConfig) -> i32 {
    match run_detailed(config) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run_detailed(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let scenario = config.resolve_scenario()?;
    fs::create_dir_all(&config.output_dir)?;
    let mut outcome = RunOutcome {
        summary: None,
        sweep: None,
        written: Vec::new(),
    };

    let wants_run = config.emit.iter().any(|e| *e != Emit::CurveCsv) || config.sweep_a.is_none();
    if wants_run {
        let traj = integrate(&scenario, config.mode)?;
        let verdict = detect_convergence(
            &traj,
            &scenario.spec,
            &scenario.gains,
            &scenario.target,
            DEFAULT_CONVERGENCE_TOL,
        )?;
        let report = steady_state_report(&scenario.spec, &scenario.gains, &scenario.target)?;
        let summary = RunSummary {
            scenario: scenario.name.clone(),
            mode: config.mode,
            dt: scenario.dt,
            t_final: scenario.t_final,
            epsilon: scenario.gains.epsilon,
            report,
            verdict,
        };
        if config.emit.contains(&Emit::TrajectoryCsv) {
            let path = config.output_dir.join(TRAJECTORY_FILE);
            write_trajectory_csv(&mut io::BufWriter::new(fs::File::create(&path)?), &traj)?;
            outcome.written.push(path);
        }
        if config.emit.contains(&Emit::SummaryJson) {
            let path = config.output_dir.join(SUMMARY_FILE);
            fs::write(&path, to_json_string(&summary)?)?;
            outcome.written.push(path);
        }
        outcome.summary = Some(summary);
    }

    if let Some(a_values) = &config.sweep_a {
        let rows = sweep(&scenario, config.mode, a_values)?;
        let path = config.output_dir.join(CURVE_FILE);
        write_curve_csv(&mut io::BufWriter::new(fs::File::create(&path)?), &rows)?;
        outcome.written.push(path);
        outcome.sweep = Some(rows);
    }
    Ok(outcome)
}

/// Closed-form curve over `a_values` with the scenario's `b`, plus one
/// simulation per weight. Each simulation uses the default timescale for its
/// own gains; rows run on separate threads.
pub fn sweep(scenario: &Scenario, mode: Mode, a_values: &[f64]) -> Result<Vec<SweepRow>> {
    let curve =
        formation_error_curve(&scenario.spec, &scenario.target, scenario.gains.b, a_values)?;
    let results: Vec<Result<SweepRow>> = std::thread::scope(|s| {
        let handles: Vec<_> = curve
            .iter()
            .map(|point| s.spawn(move || sweep_row(scenario, mode, *point)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    results.into_iter().collect()
}

fn sweep_row(base: &Scenario, mode: Mode, curve: CurvePoint) -> Result<SweepRow> {
    let mut scenario = base.clone();
    scenario.gains.a = curve.a;
    scenario.gains.epsilon = default_epsilon(&scenario.spec, &scenario.gains);
    let traj = integrate(&scenario, mode)?;
    let verdict = detect_convergence(
        &traj,
        &scenario.spec,
        &scenario.gains,
        &scenario.target,
        DEFAULT_CONVERGENCE_TOL,
    )?;
    Ok(SweepRow {
        curve,
        epsilon: scenario.gains.epsilon,
        sim_formation_residual: verdict.final_formation_residual,
        sim_target_distance: verdict.final_target_distance,
        sim_converged: verdict.converged,
    })
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trajectory_csv_header(n_agents: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for i in 1..=n_agents {
        cols.extend([
            format!("x_{i}"),
            format!("y_{i}"),
            format!("theta_{i}"),
            format!("u_x{i}"),
            format!("u_y{i}"),
        ]);
    }
    cols.extend(["cost", "grad_norm", "formation_residual", "target_distance"].map(String::from));
    cols.join(",")
}

pub fn write_trajectory_csv<W: Write>(out: &mut W, traj: &Trajectory) -> Result<()> {
    let n = traj.samples.first().map_or(0, |s| s.state.poses.len());
    writeln!(out, "{}", trajectory_csv_header(n))?;
    let mut line = String::new();
    for s in &traj.samples {
        line.clear();
        line.push_str(&fmt_f64(s.time));
        for (i, pose) in s.state.poses.iter().enumerate() {
            for v in [
                pose.position.x,
                pose.position.y,
                pose.heading,
                s.state.inputs[2 * i],
                s.state.inputs[2 * i + 1],
            ] {
                line.push(',');
                line.push_str(&fmt_f64(v));
            }
        }
        for v in [
            s.cost_total,
            s.gradient_norm,
            s.formation_residual,
            s.target_distance,
        ] {
            line.push(',');
            line.push_str(&fmt_f64(v));
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub const CURVE_CSV_HEADER: &str = "a,gain_ratio,formation_residual,target_distance,in_formation_regime,epsilon,sim_formation_residual,sim_target_distance,sim_converged";

pub fn write_curve_csv<W: Write>(out: &mut W, rows: &[SweepRow]) -> Result<()> {
    writeln!(out, "{CURVE_CSV_HEADER}")?;
    for r in rows {
        let c = &r.curve;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(c.a),
            fmt_f64(c.gain_ratio),
            fmt_f64(c.formation_residual),
            fmt_f64(c.target_distance),
            c.in_formation_regime,
            fmt_f64(r.epsilon),
            fmt_f64(r.sim_formation_residual),
            fmt_f64(r.sim_target_distance),
            r.sim_converged,
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Pretty JSON whose floats carry 17 significant digits; non-finite values
/// become `null`.
struct PreciseFormatter(PrettyFormatter<'static>);

impl Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(fmt_f64(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Parse(e.to_string()))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    n_agents: usize,
    edges: Vec<[usize; 2]>,
    displacements: Vec<[f64; 2]>,
    gains: GainsFile,
    target: [f64; 2],
    initial: InitialFile,
    t_final: f64,
    dt: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainsFile {
    a: f64,
    b: f64,
    epsilon: Option<f64>,
    k: TrackingGains,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum TrackingGains {
    Uniform(f64),
    PerAgent(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum InitialFile {
    Random { radius: f64, seed: u64 },
    Explicit { poses: Vec<[f64; 3]> },
}

/// Reads and validates a scenario JSON file. A missing `name` defaults to
/// the file stem.
pub fn parse_scenario_file(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|source| Error::ReadScenario {
        path: path.to_path_buf(),
        source,
    })?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_scenario_str(&text, &stem)
}

pub fn parse_scenario_str(text: &str, default_name: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let n = file.n_agents;

    let mut edges = Vec::with_capacity(file.edges.len());
    for (e, &[tail, head]) in file.edges.iter().enumerate() {
        if tail == 0 || head == 0 {
            return Err(Error::validation(
                format!("edges[{e}]"),
                Error::MalformedIncidence {
                    reason: "agent indices are one-based".into(),
                },
            ));
        }
        edges.push((tail - 1, head - 1));
    }
    let displacements = file
        .displacements
        .iter()
        .map(|&[x, y]| Vec2::new(x, y))
        .collect();
    let spec = FormationSpec::from_edges(n, &edges, displacements).map_err(|e| {
        let field = match e {
            Error::DimensionMismatch { .. } | Error::UnrealizableDisplacements { .. } => {
                "displacements"
            }
            _ => "edges",
        };
        Error::validation(field, e)
    })?;

    let k = match file.gains.k {
        TrackingGains::Uniform(k) => vec![k; n],
        TrackingGains::PerAgent(k) => k,
    };
    let mut gains = GainConfig {
        a: file.gains.a,
        b: file.gains.b,
        epsilon: file.gains.epsilon.unwrap_or(1.0),
        k,
    };
    gains
        .validate()
        .map_err(|e| Error::validation("gains", e))?;
    if file.gains.epsilon.is_none() && gains.k.len() == n {
        gains.epsilon = default_epsilon(&spec, &gains);
    }

    let initial = match file.initial {
        InitialFile::Random { radius, seed } => InitialPoses::Random { radius, seed },
        InitialFile::Explicit { poses } => InitialPoses::Explicit(
            poses
                .iter()
                .map(|&[x, y, theta]| AgentPose::new(Vec2::new(x, y), theta))
                .collect(),
        ),
    };
    let scenario = Scenario {
        name: file.name.unwrap_or_else(|| default_name.to_string()),
        spec,
        gains,
        target: Vec2::new(file.target[0], file.target[1]),
        initial,
        t_final: file.t_final,
        dt: file.dt,
    };
    scenario.validate()?;
    Ok(scenario)
}

fn pair(x: f64, y: f64) -> String {
    format!("[{}, {}]", fmt_f64(x), fmt_f64(y))
}

fn list_block(items: &[String]) -> String {
    if items.is_empty() {
        return "[]".into();
    }
    format!("[\n    {}\n  ]", items.join(",\n    "))
}

/// Serialises a scenario in the file schema; [`parse_scenario_str`] inverts
/// it exactly.
pub fn scenario_to_json(scenario: &Scenario) -> String {
    let spec = &scenario.spec;
    let edges: Vec<String> = spec
        .edges()
        .iter()
        .map(|e| format!("[{}, {}]", e.tail + 1, e.head + 1))
        .collect();
    let displacements: Vec<String> = spec
        .displacements()
        .iter()
        .map(|d| pair(d.x, d.y))
        .collect();
    let g = &scenario.gains;
    let k: Vec<String> = g.k.iter().map(|k| fmt_f64(*k)).collect();
    let initial = match &scenario.initial {
        InitialPoses::Random { radius, seed } => {
            format!(
                "{{\"type\": \"random\", \"radius\": {}, \"seed\": {seed}}}",
                fmt_f64(*radius)
            )
        }
        InitialPoses::Explicit(poses) => {
            let poses: Vec<String> = poses
                .iter()
                .map(|p| {
                    format!(
                        "[{}, {}, {}]",
                        fmt_f64(p.position.x),
                        fmt_f64(p.position.y),
                        fmt_f64(p.heading)
                    )
                })
                .collect();
            format!(
                "{{\n    \"type\": \"explicit\",\n    \"poses\": [\n      {}\n    ]\n  }}",
                poses.join(",\n      ")
            )
        }
    };
    let mut out = String::new();
    let _ = writeln!(out, "{{");
    let _ = writeln!(
        out,
        "  \"name\": {},",
        serde_json::to_string(&scenario.name).expect("strings serialise")
    );
    let _ = writeln!(out, "  \"n_agents\": {},", spec.n_agents());
    let _ = writeln!(out, "  \"edges\": [{}],", edges.join(", "));
    let _ = writeln!(out, "  \"displacements\": {},", list_block(&displacements));
    let _ = writeln!(
        out,
        "  \"gains\": {{\"a\": {}, \"b\": {}, \"epsilon\": {}, \"k\": [{}]}},",
        fmt_f64(g.a),
        fmt_f64(g.b),
        fmt_f64(g.epsilon),
        k.join(", ")
    );
    let _ = writeln!(
        out,
        "  \"target\": {},",
        pair(scenario.target.x, scenario.target.y)
    );
    let _ = writeln!(out, "  \"initial\": {initial},");
    let _ = writeln!(out, "  \"t_final\": {},", fmt_f64(scenario.t_final));
    let _ = writeln!(out, "  \"dt\": {}", fmt_f64(scenario.dt));
    out.push_str("}\n");
    out
}
