//! End-to-end checks of the `theta-wave` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_theta-wave"));
    c.env_remove("THETA_WAVE_OUT");
    c
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn completed_run_exits_zero_and_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write_config(
        tmp.path(),
        "run.json",
        &format!(
            r#"{{"theta": 0.6, "t_end": 0.5, "n": 128, "L": 40, "seeds": [0, 1],
                "scenario": {{"kind": "from_momentum", "amplitude": 1, "width": 2}},
                "outputs": {{"dir": {:?}}}}}"#,
            out
        ),
    );
    let o = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("Completed"));
    for f in ["manifest.json", "report.json", "diagnostics.csv", "paths.csv", "snapshots/000000.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }

    // A snapshot feeds back in as custom initial data.
    let again = tmp.path().join("again");
    let cfg = write_config(
        tmp.path(),
        "custom.json",
        &format!(
            r#"{{"theta": 0.6, "t_end": 0.1, "n": 128, "L": 40,
                "scenario": {{"kind": "custom", "path": {:?}}},
                "outputs": {{"dir": {:?}}}}}"#,
            out.join("snapshots/000000.csv"),
            again
        ),
    );
    let o = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let o = bin()
        .args(["transform-b", "--c0", "0.5", "--gamma", "0.2", "--alpha", "1"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("b-transform/summary.json").exists());
}

#[test]
fn blowup_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "odd.json",
        &format!(
            r#"{{"theta": 0.3, "t_end": 10, "n": 1024, "L": 10, "slope_blowup_threshold": 5,
                "scenario": {{"kind": "odd_blowup", "width": 1, "target_slope": -1}},
                "outputs": {{"dir": {:?}}}}}"#,
            tmp.path().join("odd")
        ),
    );
    let o = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("blow-up"));
}

#[test]
fn bad_config_exits_one_with_key_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", r#"{"theta": 0.5, "t_end": 1, "n": 64, "L": 10, "cfl": -1}"#);
    let o = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cfl"));

    let cfg = write_config(tmp.path(), "typo.json", r#"{"theta": 0.5, "t_end": 1, "n": 64, "L": 10, "tend": 2}"#);
    let o = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tend"));

    let o = bin().arg("run").arg(tmp.path().join("missing.json")).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_writes_sorted_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sweep.json",
        &format!(
            r#"{{"theta_values": [1, "1/3", 0.6], "workers": 2, "t_end": 0.3, "n": 64, "L": 20,
                "scenario": {{"kind": "from_momentum", "amplitude": 1, "width": 2}},
                "outputs": {{"dir": {:?}}}}}"#,
            tmp.path().join("sweep")
        ),
    );
    let o = bin().arg("sweep").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(tmp.path().join("sweep/sweep.csv")).unwrap();
    let thetas: Vec<f64> = table
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(thetas.len(), 3);
    assert!(thetas.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn verify_peakon_honours_output_override() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .env("THETA_WAVE_OUT", tmp.path())
        .args(["verify-peakon", "--c", "-1", "--theta", "1/3,1"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("peakon/report.json").exists());

    let o = bin().args(["verify-peakon", "--c", "1", "--theta", "x/2"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}
