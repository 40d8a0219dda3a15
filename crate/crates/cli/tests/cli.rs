use std::path::Path;
use std::process::{Command, Output};

use ddrf_core::SweepResult;
use tempfile::TempDir;

fn ddrf(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddrf")).args(args).arg("--out-dir").arg(out).output().expect("binary runs")
}

fn read(path: &Path) -> SweepResult {
    let text = std::fs::read_to_string(path).unwrap();
    SweepResult::read_csv(text.as_bytes()).unwrap()
}

#[test]
fn spectroscopy_grid_and_manifest() {
    let dir = TempDir::new().unwrap();
    let out = ddrf(&["spectroscopy", "--grid", "3x3", "--phase-frequency"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let map = read(&dir.path().join("spectroscopy.csv"));
    assert_eq!(map.shape(), (3, 3));
    assert_eq!(map.metadata["n_pulses"], "24");
    assert_eq!(map.metadata["tau_s"], "0.000029632");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    for o in manifest["outputs"].as_array().unwrap() {
        assert!(Path::new(o.as_str().unwrap()).exists());
    }
    assert_eq!(manifest["command"], "spectroscopy");
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = ddrf(&["spectroscopy", "--config", "/no/such/table.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/table.toml"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[[spin]]\nlabel = \"a\"\ndelta_hz = \"oops\"\n").unwrap();
    let out = ddrf(&["spectroscopy", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta_hz"));

    let out = ddrf(&["spectroscopy", "--grid", "3by3"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let out = ddrf(&["spectroscopy", "--grid", "6x5", "--threads", threads], dir.path());
        assert!(out.status.success());
        let out = ddrf(&["register", "--grid", "4x3", "--threads", threads], dir.path());
        assert!(out.status.success());
    }
    for f in ["spectroscopy.csv", "register_C1.csv", "register_C1_summary.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn rabi_columns() {
    let dir = TempDir::new().unwrap();
    let out = ddrf(&["rabi", "--n", "48,24", "--grid", "41x1"], dir.path());
    assert!(out.status.success());
    let scan = read(&dir.path().join("rabi.csv"));
    assert_eq!(scan.y.values, vec![24.0, 48.0]);
    let num = &scan.layer("p0").unwrap().values;
    let ana = &scan.layer("p0_analytic").unwrap().values;
    assert!(num.iter().zip(ana).all(|(a, b)| (a - b).abs() < 0.02));

    let out = ddrf(&["rabi", "--spin", "C99"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sensitivity_single_cell() {
    let dir = TempDir::new().unwrap();
    let out = ddrf(&["sensitivity", "--delta-hz", "115", "--grid", "1x1", "--maps"], dir.path());
    assert!(out.status.success());
    let s = read(&dir.path().join("sensitivity_vs_delta.csv"));
    assert_eq!(s.shape(), (1, 2));
    assert!(s.value("v_min", 0, 1).unwrap().is_finite());
    assert!(dir.path().join("sensitivity_detuned_115.000Hz.csv").exists());

    let out = ddrf(&["sensitivity", "--delta-hz", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn register_variants() {
    let dir = TempDir::new().unwrap();
    let out = ddrf(&["register", "--register", "C1", "--target", "C1", "--grid", "3x3", "--contributions"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let map = read(&dir.path().join("register_C1.csv"));
    assert_eq!(map.metadata["register"], "C1");
    for name in ["a_single_qubit", "b_register", "c_bath", "d_t2", "e_t2_star", "f_echo"] {
        assert!(dir.path().join(format!("register_C1_{name}.csv")).exists());
    }

    let out = ddrf(&["register", "--target", "C3", "--grid", "2x2"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let args =
        ["register", "--n-min", "2", "--n-max", "2", "--tau-min-us", "1", "--tau-max-us", "1.5", "--grid", "1x2"];
    let out = ddrf(&args, dir.path());
    assert_eq!(out.status.code(), Some(3));
}
