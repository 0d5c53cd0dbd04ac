use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cavlock::io;
use cavlock::linalg::Mat;
use cavlock::DiscreteStateSpace;

fn cavlock(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cavlock"))
        .current_dir(dir)
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("run cavlock")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn stages_run_one_by_one() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["cavity", "identify", "design", "reduce", "discretize", "analyze", "simulate"] {
        let o = cavlock(dir.path(), &[cmd, "--out-dir", "run"]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["plant_model.json", "controller_reduced.json", "loop_bode.csv", "margins.json", "step_trace.csv"] {
        assert!(dir.path().join("run").join(f).exists(), "{f}");
    }
    let reduced = io::read_model(&dir.path().join("run/controller_reduced.json")).unwrap().into_continuous().unwrap();
    assert_eq!(reduced.order(), 6);
    let trace = fs::read_to_string(dir.path().join("run/step_trace.csv")).unwrap();
    assert!(trace.starts_with("t_s,r,u,y,z\n"));
}

#[test]
fn textbook_loop_margins() {
    let dir = tempfile::tempdir().unwrap();
    let o = cavlock(dir.path(), &["analyze", "--num", "1", "--den", "1,2,1,0"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("gain margin 6.02"), "{out}");
    assert!(out.contains("at 1.000000 rad/s"), "{out}");
    assert!(out.contains("phase margin 21.38"), "{out}");

    let o = cavlock(dir.path(), &["analyze", "--num", "1", "--den", "1,0"]);
    let out = stdout(&o);
    assert!(out.contains("gain margin inf"), "{out}");
    assert!(out.contains("phase margin 90.0000 deg"), "{out}");
}

#[test]
fn cavity_prints_corner_and_gain() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&cavlock(dir.path(), &["cavity"]));
    assert!(out.contains("kappa/2 = 6.283185e5 rad/s"), "{out}");
    fs::write(dir.path().join("phi0.toml"), "[cavity]\nphi = 0.0\n").unwrap();
    let out = stdout(&cavlock(dir.path(), &["cavity", "--config", "phi0.toml"]));
    assert!(out.contains("DC gain = 0.000000000e0"), "{out}");
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.csv"), "").unwrap();
    let o = cavlock(dir.path(), &["identify", "--data", "empty.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty.csv:1"));

    fs::write(dir.path().join("bad.csv"), "freq_hz,mag_db,phase_deg\n10,0,0\n20,zero,0\n").unwrap();
    let o = cavlock(dir.path(), &["identify", "--data", "bad.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.csv:3"));

    let o = cavlock(dir.path(), &["design", "--out-dir", "nothing"]);
    assert_eq!(o.status.code(), Some(2));

    fs::write(dir.path().join("typo.toml"), "[design]\nqbar = 1.0\n").unwrap();
    assert_eq!(cavlock(dir.path(), &["cavity", "--config", "typo.toml"]).status.code(), Some(2));
    assert_eq!(cavlock(dir.path(), &["cavity", "--config", "missing.toml"]).status.code(), Some(2));
    assert_eq!(cavlock(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn unrejected_disturbance_is_a_verification_failure() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cavlock(dir.path(), &["identify", "--out-dir", "o"]).status.code(), Some(0));
    let zero = DiscreteStateSpace::new(Mat::zeros(0, 0), Mat::zeros(0, 2), Mat::zeros(1, 0), Mat::zeros(1, 2), 2e-5).unwrap();
    io::write_discrete_model(&dir.path().join("o/controller_discrete.json"), &zero).unwrap();
    let o = cavlock(dir.path(), &["simulate", "--out-dir", "o"]);
    assert_eq!(o.status.code(), Some(4), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL step disturbance rejected"));
}

#[test]
fn heavier_control_weight_lowers_regulator_gain() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cavlock(dir.path(), &["identify", "--out-dir", "o"]).status.code(), Some(0));
    let gain = |cfg: &str| -> f64 {
        fs::write(dir.path().join("c.toml"), cfg).unwrap();
        let o = cavlock(dir.path(), &["design", "--config", "c.toml", "--out-dir", "o"]);
        assert_eq!(o.status.code(), Some(0));
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("o/design_report.json")).unwrap()).unwrap();
        report["regulator_gain_norm"].as_f64().unwrap()
    };
    let base = gain("");
    let heavy = gain("[design]\nr = 1e5\n");
    assert!(heavy < base, "{heavy} !< {base}");
}

#[test]
fn simulate_is_repeatable_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cavlock(dir.path(), &["pipeline", "run", "--out-dir", "o"]).status.code(), Some(0));
    let first = fs::read(dir.path().join("o/noise_trace.csv")).unwrap();
    assert_eq!(cavlock(dir.path(), &["simulate", "--seed", "42", "--out-dir", "o"]).status.code(), Some(0));
    assert_eq!(fs::read(dir.path().join("o/noise_trace.csv")).unwrap(), first);
    assert_eq!(cavlock(dir.path(), &["simulate", "--seed", "43", "--out-dir", "o"]).status.code(), Some(0));
    assert_ne!(fs::read(dir.path().join("o/noise_trace.csv")).unwrap(), first);
}

#[test]
fn pipeline_artifacts_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = cavlock(dir.path(), &["pipeline", "run", "--seed", "42", "--out-dir", out]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        assert!(stdout(&o).trim_end().ends_with("PASS"));
    }
    let mut names: Vec<_> = fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 18);
    for name in names.iter().filter(|n| *n != "metadata.json") {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert!(a == b, "{name:?} differs");
    }
}
