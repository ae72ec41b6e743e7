use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use robin_ns::calculus;
use robin_ns::fields::GridVector;
use robin_ns::grid::{AxisKind::*, BoxGrid};
use robin_ns::hodge::Projector;
use robin_ns::{CellField, FaceField};
use robin_ns_cli::fieldio::FieldFile;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_robin-ns"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CHANNEL: &str = r#"
[grid]
lengths_m = [1.0, 1.0, 1.0]
cells = [6, 4, 6]
kinds = ["wall", "periodic", "wall"]

[[schedule.walls]]
wall = "all"
segments = [{ scalar_per_m = 1.0 }]

[solver]
tau_s = 0.2
dt_s = 0.05
ensemble_members = 2

[output]
directory = "unused"
snapshot_every_steps = 2
"#;

fn channel(initial: &str) -> String {
    format!("{CHANNEL}\n[initial]\n{initial}\n")
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("time"))
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn zero_initial_condition_gives_zero_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero.toml", &channel("preset = \"zero\""));
    let out = dir.path().join("out");
    let o = run(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert!(csv.starts_with("# config_sha256="));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r[1..].iter().all(|&x| x == 0.0)));
    // endpoints plus every second step
    for n in [0, 2, 4] {
        assert!(out.join(format!("u_{n:06}.mfield")).exists());
    }
    assert!(!out.join("u_000001.mfield").exists());
}

#[test]
fn small_data_run_contracts_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "small.toml",
        &channel("preset = \"random-smooth\"\namplitude_m_per_s = 0.05\nseed = 3"),
    );
    let mut csvs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("out{k}"));
        let o = run(&["picard", "--config", s(&cfg), "--out", s(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        csvs.push(std::fs::read(out.join("diagnostics.csv")).unwrap());
        let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
        assert!(summary.contains("converged = true"));
        let line = summary.lines().find(|l| l.starts_with("contraction_factors")).unwrap();
        let inner = line.split('[').nth(1).unwrap().trim_end_matches(']');
        let factors: Vec<f64> = inner.split(", ").map(|x| x.parse().unwrap()).collect();
        assert!(!factors.is_empty() && factors.iter().all(|&f| f < 1.0), "{factors:?}");
        let u = FieldFile::read(&out.join("u_000004.mfield")).unwrap();
        assert_eq!(u.time, 0.2);
        assert_eq!(u.version, robin_ns_cli::fieldio::version_string());
    }
    assert_eq!(csvs[0], csvs[1]);
    let rows = data_rows(std::str::from_utf8(&csvs[0]).unwrap());
    assert!(rows.iter().all(|r| r[5] < 1e-8));
}

#[test]
fn tes3_violation_exits_with_condition_name() {
    let dir = tempfile::tempdir().unwrap();
    let body = channel("preset = \"zero\"").replace(
        "segments = [{ scalar_per_m = 1.0 }]",
        "segments = [{ matrix_per_m = [[1.0, 0.0, 0.2], [0.0, 1.0, 0.0], [0.2, 0.0, 1.0]] }]",
    );
    let cfg = write_config(dir.path(), "bad.toml", &body);
    for cmd in ["run", "validate-schedule"] {
        let o = run(&[cmd, "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
        assert_eq!(o.status.code(), Some(1));
        assert!(String::from_utf8_lossy(&o.stderr).contains("TES3"));
    }
}

#[test]
fn validate_schedule_accepts_a_good_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ok.toml", &channel("preset = \"zero\""));
    let o = run(&["validate-schedule", "--config", s(&cfg)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("schedule valid"));
}

#[test]
fn large_data_divergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let body = channel("preset = \"random-smooth\"\namplitude_m_per_s = 400.0\nseed = 8")
        .replace("scalar_per_m = 1.0", "scalar_per_m = 0.0")
        .replace("tau_s = 0.2", "tau_s = 1.0")
        .replace("dt_s = 0.05", "dt_s = 0.1");
    let cfg = write_config(dir.path(), "big.toml", &body);
    let out = dir.path().join("out");
    let o = run(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(out.join("summary.txt")).unwrap().contains("contractive = false"));
}

#[test]
fn constants_are_reproducible_and_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &channel("preset = \"zero\""));
    let mut files = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("c{k}"));
        let o = run(&["estimate-constants", "--config", s(&cfg), "--out", s(&out), "--seed", "5"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        files.push(std::fs::read(out.join("constants.toml")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let a = robin_ns_cli::commands::ConstantsArtifact::load(&dir.path().join("c0/constants.toml")).unwrap();
    assert_eq!(a.seed, 5);
    assert!((a.delta * 4.0 * a.c_mr * a.c1 * a.c2 - 0.9).abs() < 1e-12);
    assert!((a.epsilon - a.delta / a.c_mr).abs() < 1e-15);

    // the cache is written once and then reused
    let cache = dir.path().join("cache.toml");
    let out = dir.path().join("run");
    for _ in 0..2 {
        let o = run(&["run", "--config", s(&cfg), "--out", s(&out), "--cache-constants", s(&cache)]);
        assert!(o.status.success());
    }
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("constants = { c_mr ="));
}

fn decompose(dir: &Path, name: &str, g: &BoxGrid, u: &FaceField) -> (FaceField, FaceField, String) {
    let input = dir.join(format!("{name}.mfield"));
    FieldFile::faces(g, u, 0.0, [0; 32]).write(&input).unwrap();
    let out = dir.join(name);
    let o = run(&["decompose", s(&input), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let pu = FieldFile::read(&out.join("pu.mfield")).unwrap().to_face_field().unwrap();
    let gp = FieldFile::read(&out.join("grad_p.mfield")).unwrap().to_face_field().unwrap();
    (pu, gp, std::fs::read_to_string(out.join("decompose.txt")).unwrap())
}

#[test]
fn decompose_splits_fields() {
    let dir = tempfile::tempdir().unwrap();
    let g = BoxGrid::new([1.0, 2.0, 1.0], [8, 6, 8], [Wall, Periodic, Wall]).unwrap();
    let p = CellField::from_fn(&g, |x| (3.0 * x[0]).sin() * x[2] + (std::f64::consts::PI * x[1]).cos());
    let grad = calculus::grad(&g, &p).unwrap();
    let (pu, _, _) = decompose(dir.path(), "gradient", &g, &grad);
    assert!(pu.norm() < 1e-10 * grad.norm());

    let mut w = FaceField::from_fn(&g, |d, x| (d as f64 + 1.0) * (x[0] * 7.0 + x[1] * 3.0 + x[2]).sin());
    let input = dir.path().join("leaky.mfield");
    FieldFile::faces(&g, &w, 0.0, [0; 32]).write(&input).unwrap();
    let o = run(&["decompose", s(&input), "--out", s(&dir.path().join("leaky"))]);
    assert_eq!(o.status.code(), Some(1));
    w.enforce_tangent(&g);
    let free = Projector::new(&g).apply(&w).unwrap();
    let (_, gp, _) = decompose(dir.path(), "free", &g, &free);
    assert!(gp.norm() < 1e-10 * free.norm());

    let (pu, gp, report) = decompose(dir.path(), "random", &g, &w);
    assert!(w.sub(&pu).sub(&gp).norm() <= 1e-10);
    assert!(pu.dot(&gp).abs() <= 1e-10);
    assert!(report.contains("recomposition_error"));
}

#[test]
fn decompose_rejects_malformed_files() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.mfield");
    std::fs::write(&bad, b"MACFIELD but far too short").unwrap();
    let o = run(&["decompose", s(&bad), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
}

const TAYLOR_GREEN: &str = r#"
[grid]
lengths_m = [3.141592653589793, 3.141592653589793, 1.0]
cells = [16, 16, 1]
kinds = ["wall", "wall", "periodic"]

[solver]
tau_s = 0.25
dt_s = 0.01

[initial]
preset = "taylor-green"
amplitude_m_per_s = 0.01
"#;

fn table(csv: &str) -> Vec<(String, Option<f64>)> {
    csv.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("study"))
        .map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            (cols[0].to_string(), cols[7].parse().ok())
        })
        .collect()
}

#[test]
fn convergence_table_orders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tg.toml", TAYLOR_GREEN);
    let out = dir.path().join("out");
    let o = run(&["convergence", "--config", s(&cfg), "--out", s(&out), "--levels", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = table(&std::fs::read_to_string(out.join("convergence.csv")).unwrap());
    assert_eq!(rows.len(), 6);
    for (study, order) in rows {
        let Some(p) = order else { continue };
        match study.as_str() {
            "spatial" => assert!((1.8..=2.2).contains(&p), "spatial order {p}"),
            _ => assert!((0.9..=1.1).contains(&p), "temporal order {p}"),
        }
    }

    let o = run(&["convergence", "--config", s(&cfg), "--out", s(&out), "--levels", "1"]);
    assert!(o.status.success());
    let rows = table(&std::fs::read_to_string(out.join("convergence.csv")).unwrap());
    assert!(rows.iter().all(|r| r.1.is_none()));
}

#[test]
fn convergence_rejects_presets_without_a_solution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "z.toml", &channel("preset = \"zero\""));
    let o = run(&["convergence", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("known solution"));
}
