use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BASE: &str = "\
lattice.r = 19.0
lattice.s = 2.86
drive.omega_hz = 4990
drive.n = 2
drive.a_pm_deg = 4
grid.n_wells = 9
grid.points_per_well = 64
propagation.steps_per_period = 64
scan.tau_points = 4
";

fn washboard(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_washboard"))
        .args(args)
        .current_dir(dir)
        .env_remove("WASHBOARD_OUT_DIR")
        .output()
        .unwrap()
}

fn config(dir: &Path, extra: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, format!("{BASE}{extra}")).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn bad_config_reports_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "drive.colour = red\n");
    let out = washboard(&["spectrum", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error kind=config message="), "{err}");
    assert!(err.contains("line 10") && err.contains("drive.colour"), "{err}");
}

#[test]
fn missing_required_key_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(&path, "lattice.r = 19\nlattice.s = 2.86\n").unwrap();
    let out = washboard(&["propagate", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("drive.omega_hz"));
}

#[test]
fn shallow_lattice_is_a_reported_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "").replace("run.cfg", "shallow.cfg");
    fs::write(&cfg, BASE.replace("lattice.r = 19.0", "lattice.r = 4.0")).unwrap();
    let out = washboard(&["spectrum", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error kind=too_shallow"));
}

#[test]
fn spectrum_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let out = washboard(&["spectrum", "--config", &cfg, "--out-dir", "spec"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("spec/spectrum.csv")).unwrap();
    assert!(csv.lines().count() > 3);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("spec/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "spectrum");
    assert_eq!(manifest["outputs"], serde_json::json!(["spectrum.csv"]));
    let split = manifest["spec"]["qubit_splitting"].as_f64().unwrap();
    assert!((split - 7.5).abs() < 0.1, "{split}");
}

#[test]
fn fringe_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    for out_dir in ["a", "b"] {
        let out = washboard(&["fringe", "--config", &cfg, "--out-dir", out_dir, "--threads", "1"], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["fringe.csv", "fit.json", "manifest.json"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
}

#[test]
fn fringe_without_am_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "drive.a_am = 0\n");
    let out = washboard(&["fringe", "--config", &cfg, "--out-dir", "flat"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("flat/fringe.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "P_L").unwrap();
    let p_l: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    assert_eq!(p_l.len(), 4);
    let spread = p_l.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - p_l.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    assert!(spread < 1e-10, "{p_l:?}");
}

#[test]
fn out_dir_falls_back_to_config_then_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "output.dir = from_config\n");
    assert!(washboard(&["spectrum", "--config", &cfg], dir.path()).status.success());
    assert!(dir.path().join("from_config/manifest.json").exists());

    let cfg = config(dir.path(), "");
    let out = Command::new(env!("CARGO_BIN_EXE_washboard"))
        .args(["spectrum", "--config", &cfg])
        .current_dir(dir.path())
        .env("WASHBOARD_OUT_DIR", dir.path().join("from_env"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from_env/manifest.json").exists());
}
