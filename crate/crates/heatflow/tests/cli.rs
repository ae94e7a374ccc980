//! End-to-end tests of the command-line binary: exit codes, CSV output and
//! bit-for-bit determinism.

use std::path::Path;
use std::process::Command;

fn heatflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_heatflow"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const EXTREMAL_QCURVE: &str = "\
name = flat
mode = qcurve
p_list = 4/3 4/3
N = 2048
L = 32
count = 8

[flow]
atom = 1.0 0.0

[flow]
atom = 1.0 0.0
";

const RESIDUAL_BASE: &str = "\
name = closure
mode = residual
p_list = 4/3 4/3
N = 2048
L = 24
t_min = 0.5
t_max = 1.0
count = 2

[flow]
gaussian = 1.0 3.14159265358979 -0.5
gaussian = 0.8 6.28318530717959 0.6

[flow]
gaussian = 1.2 3.14159265358979 0.2
";

#[test]
fn constants_mode_exits_zero_and_prints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", "mode = constants\np_list = 4/3 4/3\n");
    let out = heatflow()
        .args(["constants", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("p = 2"), "{stdout}");
    assert!(stdout.contains("young_constant"), "{stdout}");
    assert!(dir.path().join("experiment.constants.csv").exists());
}

#[test]
fn extremal_qcurve_exits_zero_with_flat_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "q.cfg", EXTREMAL_QCURVE);
    let out = heatflow()
        .args(["qcurve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("flat.qcurve.csv")).unwrap();
    let values: Vec<f64> = text
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 8);
    let expected = 2.0 * 3.0f64.powf(-0.75);
    for v in values {
        assert!((v - expected).abs() < 1e-4 * expected, "{v} vs {expected}");
    }
}

#[test]
fn corrupted_sigma_residual_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let broken = format!("sigma_list = 0.20625 0.1875\n{RESIDUAL_BASE}");
    let cfg = write_config(dir.path(), "r.cfg", &broken);
    let out = heatflow()
        .args(["residual", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    // The balanced version of the same data passes.
    let cfg = write_config(dir.path(), "ok.cfg", RESIDUAL_BASE);
    let out = heatflow()
        .args(["residual", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "mode = qcurve\np_list = 4/3 oops\n");
    let out = heatflow()
        .args(["qcurve", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2"), "{stderr}");
}

#[test]
fn verify_list_prints_names_without_running() {
    let out = heatflow().args(["verify", "--list"]).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let names: Vec<&str> = stdout.lines().collect();
    assert_eq!(names.len(), 13);
    assert!(names.contains(&"forward_monotonicity"));
    assert!(names.contains(&"algebraic_identities"));
}

#[test]
fn identical_config_gives_bit_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "q.cfg", EXTREMAL_QCURVE);
    let run = |out_dir: &Path| -> Vec<u8> {
        let out = heatflow()
            .args(["qcurve", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out_dir)
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read(out_dir.join("flat.qcurve.csv")).unwrap()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run(a.path()), run(b.path()));
}
