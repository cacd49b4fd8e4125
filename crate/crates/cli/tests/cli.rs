use std::process::{Command, Output};

fn qtur(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtur")).args(args).env_remove("QTUR_THREADS").output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn steady_state_of_equal_rate_model() {
    let out = qtur(&["steady-state", "--model", "da"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let re = &v["rho"]["re"];
    assert!((re[0][0].as_f64().unwrap() - 0.6).abs() < 1e-10);
    assert!((re[1][2].as_f64().unwrap() - 0.2).abs() < 1e-10);
}

#[test]
fn moments_agree_with_and_without_h() {
    let args = ["moments", "--model", "da", "--rates", "0.2,0.7,0.4,0.9", "--weights", "1,-0.5,0.3,2", "--tau", "3", "--initial-state", "basis:1"];
    let mean = |flag: &str| -> f64 {
        let mut a = args.to_vec();
        a.push(flag);
        let v: serde_json::Value = serde_json::from_str(&stdout(&qtur(&a))).unwrap();
        v["mean"].as_f64().unwrap()
    };
    let (a, b) = (mean("--coherent"), mean("--incoherent"));
    assert!((a - b).abs() <= 1e-8 * a.abs());
}

#[test]
fn sweep_writes_identical_csv_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, name: &str| {
        let path = dir.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_qtur"))
            .args(["sweep-ep", "--draws", "20", "--seed", "8", "--out", path.to_str().unwrap()])
            .env("QTUR_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read_to_string(path).unwrap()
    };
    let a = run("1", "a.csv");
    assert_eq!(a, run("3", "b.csv"));
    assert_eq!(a.lines().count(), 21);
    assert!(a.starts_with("draw_index,gamma_1"));
}

#[test]
fn sweep_reads_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    std::fs::write(&cfg, r#"{"n_draws": 7, "seed": 3, "tau_low": 0.5, "tau_high": 2.0}"#).unwrap();
    let out = qtur(&["sweep-kur", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 8);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"n_draws": 0}"#).unwrap();
    assert_eq!(qtur(&["sweep-kur", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn trajectories_dump_and_reproduce() {
    let args = ["trajectories", "--model", "ep", "--trajectories", "30", "--seed", "11", "--tau", "2"];
    let a = qtur(&args);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&qtur(&args)));
    let text = stdout(&a);
    assert!(text.starts_with("run_index,K,"));
    assert!(text.lines().next().unwrap().ends_with("N_value,entropy_value"));
    assert_eq!(text.lines().count(), 31);
}

#[test]
fn verify_cic_passes_on_paired_model() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("cic.json");
    let out = qtur(&[
        "verify-cic", "--model", "ep", "--rates", "0.9,0.2,0.3,0.6,0.5,0.1", "--tau", "1.5", "--trajectories", "2000",
        "--out", report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).lines().all(|l| l.starts_with("PASS")));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v["checks"].as_array().unwrap().len(), 8);
}

#[test]
fn bounds_emit_csv() {
    let out = qtur(&["bounds", "--model", "poisson", "--tau", "2", "--trajectories", "0"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("name,lhs,rhs"));
    assert!(text.lines().any(|l| l.starts_with("kur,")));
}

#[test]
fn bad_input_exits_with_error() {
    assert_eq!(qtur(&["moments", "--model", "da", "--rates", "1,2"]).status.code(), Some(2));
    assert_eq!(qtur(&["moments", "--model", "da", "--tau", "-1"]).status.code(), Some(2));
    assert!(!qtur(&["evolve", "--bogus"]).status.success());
}
