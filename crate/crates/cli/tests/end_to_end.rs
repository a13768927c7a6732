use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn swarmfo(out: &Path, args: &[&str]) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_swarmfo"))
        .arg("--out")
        .arg(out)
        .args(args)
        .status()
        .expect("binary runs");
    status.code().expect("exited normally")
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/scenarios")
        .join(format!("{name}.json"))
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let idx = lines
        .next()
        .unwrap()
        .split(',')
        .position(|c| c == name)
        .unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().to_string())
        .collect()
}

#[test]
fn pentagon_converges_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(swarmfo(dir.path(), &["--scenario", "pentagon"]), 0);
    let s = summary(dir.path());
    assert_eq!(s["verdict"]["converged"], true);
    assert!(s["verdict"]["r_inf_deviation"].as_f64().unwrap() <= 1e-3);
    assert_eq!(s["report"]["in_formation"], true);
    assert_eq!(s["report"]["r_inf"].as_array().unwrap().len(), 10);

    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("t,x_1,y_1,theta_1,u_x1,u_y1,x_2,"));
    assert!(header.ends_with(",cost,grad_norm,formation_residual,target_distance"));
    assert_eq!(header.split(',').count(), 1 + 5 * 5 + 4);
    // every float carries 17 significant digits
    assert!(csv.lines().nth(1).unwrap().split(',').all(|v| v
        .split('e')
        .next()
        .unwrap()
        .trim_start_matches('-')
        .len()
        == 18));
}

#[test]
fn e_shape_bad_converges_out_of_formation() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        swarmfo(
            dir.path(),
            &["--scenario", "e-shape-bad", "--emit", "summary_json"]
        ),
        0
    );
    let s = summary(dir.path());
    assert_eq!(s["verdict"]["converged"], true);
    assert_eq!(s["report"]["in_formation"], false);
    assert!(!dir.path().join("trajectory.csv").exists());
}

#[test]
fn short_horizon_is_not_converged() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        swarmfo(dir.path(), &["--scenario", "pentagon", "--t-final", "0.01"]),
        2
    );
    assert_eq!(summary(dir.path())["verdict"]["converged"], false);
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["--scenario", "hexagon"][..],
        &["--scenario", "missing.json"],
        &["--dt", "-0.1"],
        &["--dt", "1.0"],
        &["--mode", "both"],
        &["--emit", "plots"],
        &["--emit", "curve_csv"],
        &["--sweep-a", "2,1"],
        &["--no-such-flag"],
    ] {
        assert_eq!(swarmfo(dir.path(), args), 1, "{args:?}");
    }

    let bad = dir.path().join("bad.json");
    let text = fs::read_to_string(shipped("pentagon"))
        .unwrap()
        .replace("\"b\": 0.2", "\"b\": 0.0");
    fs::write(&bad, text).unwrap();
    assert_eq!(
        swarmfo(dir.path(), &["--scenario", bad.to_str().unwrap()]),
        1
    );
}

#[test]
fn identical_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let file = shipped("pentagon");
    let args = [
        "--scenario",
        file.to_str().unwrap(),
        "--mode",
        "distributed",
        "--seed",
        "3",
        "--t-final",
        "200",
    ];
    assert_eq!(swarmfo(a.path(), &args), 2);
    assert_eq!(swarmfo(b.path(), &args), 2);
    for f in ["trajectory.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }

    let c = tempfile::tempdir().unwrap();
    let builtin = [
        "--scenario",
        "pentagon",
        "--mode",
        "distributed",
        "--seed",
        "3",
        "--t-final",
        "200",
    ];
    swarmfo(c.path(), &builtin);
    assert_eq!(
        fs::read(a.path().join("trajectory.csv")).unwrap(),
        fs::read(c.path().join("trajectory.csv")).unwrap()
    );
}

#[test]
fn single_weight_sweep_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        swarmfo(
            dir.path(),
            &["--scenario", "e-shape-bad", "--sweep-a", "0.5"]
        ),
        0
    );
    let csv = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("a,gain_ratio,formation_residual,target_distance,"));
}

#[test]
fn six_decade_sweep_tracks_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let weights = "0.1,1,10,100,1000,10000,100000";
    assert_eq!(
        swarmfo(
            dir.path(),
            &["--scenario", "pentagon", "--sweep-a", weights]
        ),
        0
    );
    let csv = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    let parse = |name| -> Vec<f64> {
        column(&csv, name)
            .iter()
            .map(|v| v.parse().unwrap())
            .collect()
    };
    let closed = parse("formation_residual");
    let simulated = parse("sim_formation_residual");
    assert_eq!(closed.len(), 7);
    assert!(closed.windows(2).all(|w| w[1] < w[0]), "{closed:?}");
    for (c, s) in closed.iter().zip(&simulated) {
        assert!((c - s).abs() <= 1e-3, "closed form {c}, simulated {s}");
    }

    let again = tempfile::tempdir().unwrap();
    swarmfo(
        again.path(),
        &["--scenario", "pentagon", "--sweep-a", weights],
    );
    assert_eq!(
        csv,
        fs::read_to_string(again.path().join("curve.csv")).unwrap()
    );
}

#[test]
fn help_exits_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_swarmfo"))
        .arg("--help")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("--sweep-a"));
}
