//! Built-in formations and scenarios.

use crate::controller::GainConfig;
use crate::graph::{build_spec, FormationSpec};
use crate::sim::{InitialPoses, Scenario};
use crate::{Error, Result, Vec2};

pub const PENTAGON_TARGET: Vec2 = Vec2::new(5.65, 5.03);
pub const E_SHAPE_TARGET: Vec2 = Vec2::new(4.0, 3.0);

/// Five agents, seven edges.
pub fn pentagon_spec() -> FormationSpec {
    let incidence = [
        vec![1, 0, 0, 0, -1, 1, 0],
        vec![-1, 1, 0, 0, 0, 0, -1],
        vec![0, -1, 1, 0, 0, 0, 0],
        vec![0, 0, -1, 1, 0, -1, 1],
        vec![0, 0, 0, -1, 1, 0, 0],
    ];
    let displacements = [
        (-1.0, 0.0),
        (-0.3, -1.0),
        (0.8, -0.3),
        (0.8, 0.3),
        (-0.3, 1.0),
        (-0.5, -1.3),
        (-0.5, 1.3),
    ]
    .map(|(x, y)| Vec2::new(x, y))
    .to_vec();
    build_spec(&incidence, displacements).expect("pentagon is connected and realizable")
}

/// Twelve points drawing a capital E, one meter apart.
pub fn e_shape_points() -> Vec<Vec2> {
    [
        (0.0, 0.0),
        (0.0, 1.0),
        (0.0, 2.0),
        (0.0, 3.0),
        (0.0, 4.0),
        (1.0, 4.0),
        (2.0, 4.0),
        (3.0, 4.0),
        (1.0, 2.0),
        (1.0, 0.0),
        (2.0, 0.0),
        (3.0, 0.0),
    ]
    .map(|(x, y)| Vec2::new(x, y))
    .to_vec()
}

/// The E with an edge between every pair of points at most 3 m apart.
pub fn e_shape_spec() -> FormationSpec {
    let points = e_shape_points();
    let mut edges = Vec::new();
    let mut displacements = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if (points[i] - points[j]).norm() <= 3.0 {
                edges.push((i, j));
                displacements.push(points[i] - points[j]);
            }
        }
    }
    FormationSpec::from_edges(points.len(), &edges, displacements)
        .expect("E shape is connected and realizable")
}

fn scenario(
    name: &str,
    spec: FormationSpec,
    a: f64,
    b: f64,
    target: Vec2,
    seed: u64,
    t_final: f64,
) -> Scenario {
    let gains =
        GainConfig::with_default_epsilon(&spec, a, b, 2.0).expect("built-in gains are positive");
    Scenario {
        name: name.to_string(),
        spec,
        gains,
        target,
        initial: InitialPoses::Random { radius: 1.0, seed },
        t_final,
        dt: 0.05,
    }
}

/// `pentagon`, `e-shape-good` (formation dominates) and `e-shape-bad`
/// (target dominates, the E visibly collapses).
pub fn builtin_scenarios() -> Vec<Scenario> {
    vec![
        scenario(
            "pentagon",
            pentagon_spec(),
            5.0,
            0.2,
            PENTAGON_TARGET,
            7,
            9000.0,
        ),
        scenario(
            "e-shape-good",
            e_shape_spec(),
            4.0,
            0.2,
            E_SHAPE_TARGET,
            11,
            16000.0,
        ),
        scenario(
            "e-shape-bad",
            e_shape_spec(),
            0.43,
            1.0,
            E_SHAPE_TARGET,
            11,
            1000.0,
        ),
    ]
}

pub fn builtin_scenario(name: &str) -> Result<Scenario> {
    builtin_scenarios()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownScenario(name.to_string()))
}
