//! End-to-end checks of the command-line interface: exit codes, file
//! outputs, and byte-for-byte determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ergodicity-lab"))
}

fn write_spec(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ergodicity-lab-test-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

const CONSTANT_SPEC: &str = r#"{"grid": {"dim": 1, "n": 8},
  "gallery": {"id": "constant_cost", "params": {"ell0": 1.0}}}"#;

const EIKONAL_SPEC: &str = r#"{"grid": {"dim": 1, "n": 8},
  "gallery": {"id": "eikonal_f", "params": {}}}"#;

/// a = b = 0 with point-dependent cost: discretely non-ergodic (each point
/// is its own recurrent class).
fn disconnected_spec() -> String {
    let f: Vec<f64> = (0..4)
        .map(|x| 1.0 - (2.0 * std::f64::consts::PI * x as f64 / 4.0).cos())
        .collect();
    format!(
        r#"{{"grid": {{"dim": 1, "n": 4}},
            "controls": {{"points": [[0.0]], "k0": [true]}},
            "coefficients": {{"a": [0,0,0,0], "b": [0,0,0,0],
                              "L": [{},{},{},{}]}}}}"#,
        f[0], f[1], f[2], f[3]
    )
}

#[test]
fn solve_constant_cost_writes_solution() {
    let dir = tmpdir("solve");
    let spec = write_spec(&dir, "spec.json", CONSTANT_SPEC);
    let out = dir.join("out");
    let status = bin()
        .args(["solve", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(&out)
        .args(["--lambda", "0.5"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let dump = fs::read_to_string(out.join("solution.txt")).unwrap();
    assert!(dump.contains("# discounted solution"));
    // v = 2 at every point
    for line in dump.lines().filter(|l| !l.starts_with('#') && l.split(' ').count() == 3) {
        let mut it = line.split(' ');
        let _idx = it.next().unwrap();
        let v: f64 = it.next().unwrap().parse().unwrap();
        assert!((v - 2.0).abs() < 1e-9);
    }
}

#[test]
fn solve_rejects_bad_inputs() {
    let dir = tmpdir("badinput");
    let spec = write_spec(&dir, "spec.json", CONSTANT_SPEC);
    let garbage = write_spec(&dir, "bad.json", "{\"grid\": {\"dim\": 1");
    let out = dir.join("out");

    // malformed spec -> exit 1
    let status = bin()
        .args(["solve", "--spec"])
        .arg(&garbage)
        .arg("--out")
        .arg(&out)
        .args(["--lambda", "0.5"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // lambda = 0 -> exit 1
    let status = bin()
        .args(["solve", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(&out)
        .args(["--lambda", "0"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn certify_ergodic_and_discounted() {
    let dir = tmpdir("certify");
    let spec = write_spec(&dir, "spec.json", EIKONAL_SPEC);
    let out = dir.join("out");
    let status = bin()
        .args(["certify", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let cert = fs::read_to_string(out.join("certificate.txt")).unwrap();
    assert!(cert.contains("context ergodic"));
    let measure = fs::read_to_string(out.join("measure.txt")).unwrap();
    assert!(measure.contains("total_mass 1.0000000000000000e0"));

    let out2 = dir.join("out2");
    let status = bin()
        .args(["certify", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(&out2)
        .args(["--lambda", "0.1", "--z", "0", "--dump-lp"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out2.join("lp.txt").exists());
    let cert = fs::read_to_string(out2.join("certificate.txt")).unwrap();
    assert!(cert.contains("context discounted z=0"));
}

#[test]
fn certify_reports_gap_exit_code() {
    // an impossible tolerance forces exit 3 without touching the solvers;
    // the elliptic gallery's discounted gap is structurally nonzero (~1e-15)
    let dir = tmpdir("gap");
    let spec = write_spec(
        &dir,
        "spec.json",
        r#"{"grid": {"dim": 1, "n": 8},
            "gallery": {"id": "uniformly_elliptic", "params": {}}}"#,
    );
    let out = dir.join("out");
    let status = bin()
        .args(["certify", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(&out)
        .args(["--lambda", "0.25", "--z", "2", "--tol", "1e-300"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn vanish_converges_on_gallery_and_flags_disconnected() {
    let dir = tmpdir("vanish");
    let spec = write_spec(&dir, "spec.json", EIKONAL_SPEC);
    let out = dir.join("out");
    let status = bin()
        .args(["vanish", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = fs::read_to_string(out.join("schedule.csv")).unwrap();
    assert!(csv.starts_with("lambda,c_hat,spread,gap_to_prev,residual"));
    assert_eq!(csv.lines().count(), 15); // header + k = 0..13
    assert!(out.join("u0.txt").exists());
    let sel = fs::read_to_string(out.join("selection.txt")).unwrap();
    assert!(sel.contains("ok true"));

    // disconnected dynamics: spread stays at osc(f), exit 4
    let bad_spec = write_spec(&dir, "disconnected.json", &disconnected_spec());
    let out_bad = dir.join("out-bad");
    let status = bin()
        .args(["vanish", "--spec"])
        .arg(&bad_spec)
        .arg("--out")
        .arg(&out_bad)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tmpdir("determinism");
    let spec = write_spec(&dir, "spec.json", EIKONAL_SPEC);
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out in [&out_a, &out_b] {
        let status = bin()
            .args(["certify", "--spec"])
            .arg(&spec)
            .arg("--out")
            .arg(out)
            .args(["--lambda", "0.25", "--z", "5"])
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    }
    for name in ["certificate.txt", "measure.txt"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs across identical runs");
    }
}

#[test]
fn thread_cap_env_is_validated() {
    let dir = tmpdir("threads");
    let spec = write_spec(&dir, "spec.json", CONSTANT_SPEC);
    let out = dir.join("out");
    let status = bin()
        .env("ERGODICITY_LAB_THREADS", "not-a-number")
        .args(["solve", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(&out)
        .args(["--lambda", "0.5"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let status = bin()
        .env("ERGODICITY_LAB_THREADS", "2")
        .args(["solve", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(&out)
        .args(["--lambda", "0.5"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
}
