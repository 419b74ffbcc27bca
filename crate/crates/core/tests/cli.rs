use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn cavsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cavsim"))
        .args(args)
        .output()
        .expect("run cavsim")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_all_outputs() {
    let dir = TempDir::new().unwrap();
    let out = cavsim(&[
        "simulate",
        "-c",
        s(&scenario("case1.cfg")),
        "-o",
        s(dir.path()),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = read(&dir.path().join("trajectories.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,vehicle_id,lane,zone,p,v,u,arc_kind"));
    assert!(lines.all(|l| l.split(',').count() == 8));
    assert!(read(&dir.path().join("schedule.csv"))
        .starts_with("id,lane,t0,v0,tm_star,vm,binding_case\n"));
    assert!(read(&dir.path().join("events.jsonl")).lines().count() > 20);
    let metrics: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("metrics.json"))).unwrap();
    assert_eq!(metrics["vehicles"], 20);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        let out = cavsim(&[
            "simulate",
            "-c",
            s(&scenario("case1.cfg")),
            "-o",
            s(d.path()),
        ]);
        assert!(out.status.success());
    }
    for f in [
        "trajectories.csv",
        "schedule.csv",
        "events.jsonl",
        "metrics.json",
    ] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn monitor_violation_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let out = cavsim(&[
        "simulate",
        "-c",
        s(&scenario("rear_end_violation.cfg")),
        "-o",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rear-end"));
}

#[test]
fn enforcing_feasibility_keeps_the_gap() {
    let dir = TempDir::new().unwrap();
    let cfg = read(&scenario("rear_end_violation.cfg"))
        .replace("enforce_feasibility = false", "enforce_feasibility = true");
    let path = dir.path().join("rear_end_violation.toml");
    std::fs::write(&path, cfg).unwrap();
    let out = cavsim(&["simulate", "-c", s(&path), "-o", s(dir.path())]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn config_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(
        &bad,
        read(&scenario("case1.cfg")).replace("safe_distance = 10.0", "safe_distance = 40.0"),
    )
    .unwrap();
    let out = cavsim(&["simulate", "-c", s(&bad), "-o", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("safe_distance"));

    let empty = dir.path().join("empty.toml");
    std::fs::write(&empty, "").unwrap();
    let out = cavsim(&["simulate", "-c", s(&empty)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for field in ["geometry", "limits", "arrivals"] {
        assert!(err.contains(field), "{field} missing from: {err}");
    }

    let out = cavsim(&["simulate", "-c", s(&dir.path().join("missing.toml"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn echoed_config_parses_to_the_same_echo() {
    let dir = TempDir::new().unwrap();
    for name in [
        "case1.cfg",
        "rear_end_violation.cfg",
        "cruising_leader.cfg",
        "poisson.cfg",
    ] {
        let first = cavsim(&["echo-config", "-c", s(&scenario(name))]);
        assert!(first.status.success(), "{name}");
        let path = dir.path().join(name);
        std::fs::write(&path, &first.stdout).unwrap();
        let second = cavsim(&["echo-config", "-c", s(&path)]);
        assert_eq!(first.stdout, second.stdout, "{name}");
    }
}

#[test]
fn zero_vehicle_run_gives_header_only_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = read(&scenario("cruising_leader.cfg")).replace(
        "vehicles = [{ t0 = 0.0, v0 = 10.0, lane = \"E\" }]",
        "vehicles = []",
    );
    let path = dir.path().join("empty_run.toml");
    std::fs::write(&path, cfg).unwrap();
    let out = cavsim(&["simulate", "-c", s(&path), "-o", s(dir.path())]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        read(&dir.path().join("trajectories.csv")),
        "t,vehicle_id,lane,zone,p,v,u,arc_kind\n"
    );
}

#[test]
fn solve_prints_arcs_and_samples() {
    let out = cavsim(&[
        "solve",
        "-c",
        s(&scenario("case1.cfg")),
        "--t0",
        "0",
        "--v0",
        "12",
        "--tm",
        "32",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let (arcs, samples) = text.split_once("\n\n").unwrap();
    assert!(arcs.starts_with("arc,kind,start,end,p0,v0,u0,jerk\n0,cubic,0,32,"));
    let mut rows = samples.lines();
    assert_eq!(rows.next(), Some("t,p,v,u,arc_kind"));
    assert_eq!(rows.last(), Some("32,400,12.75,0,cubic"));

    // a horizon too short for the acceleration limit is a numerical failure
    let out = cavsim(&[
        "solve",
        "-c",
        s(&scenario("case1.cfg")),
        "--t0",
        "0",
        "--v0",
        "13",
        "--tm",
        "28",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn feasibility_map_writes_raster() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("map.csv");
    let out = cavsim(&[
        "feasibility-map",
        "-c",
        s(&scenario("cruising_leader.cfg")),
        "--resolution",
        "12",
        "-o",
        s(&path),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = read(&path);
    assert_eq!(csv.lines().next(), Some("tau,upsilon,s_star,feasible"));
    assert_eq!(csv.lines().count(), 1 + 144);
}

#[test]
fn compare_reports_improvements() {
    let dir = TempDir::new().unwrap();
    let out = cavsim(&[
        "compare",
        "-c",
        s(&scenario("poisson.cfg")),
        "-o",
        s(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cmp: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("comparison.json"))).unwrap();
    assert!(cmp["fuel_improvement"].as_f64().unwrap() > 0.0);
    assert!(cmp["travel_time_improvement"].as_f64().unwrap() > 0.0);
}

#[test]
fn seed_flag_overrides_config() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let cfg = scenario("poisson.cfg");
    assert!(cavsim(&["schedule", "-c", s(&cfg), "-o", s(a.path())])
        .status
        .success());
    assert!(
        cavsim(&["schedule", "-c", s(&cfg), "-o", s(b.path()), "--seed", "7"])
            .status
            .success()
    );
    assert_ne!(
        read(&a.path().join("schedule.csv")),
        read(&b.path().join("schedule.csv"))
    );
}
