use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_safe-bandit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, edit: impl FnOnce(&mut serde_json::Value)) -> String {
    let out = run(&["preset", "unit_disk"]);
    assert!(out.status.success());
    let mut cfg: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    edit(&mut cfg);
    let path = dir.join(name);
    std::fs::write(&path, cfg.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn preset_lists_names_and_prints_json() {
    let out = run(&["preset"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("unit_disk") && text.contains("five_disks"));

    let out = run(&["preset", "five_disks"]);
    let cfg: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg["decision_set"].as_array().unwrap().len(), 5);
}

#[test]
fn run_writes_artifacts_and_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("run");
    let out = run(&[
        "run",
        "--preset",
        "unit_disk",
        "--horizon",
        "15",
        "--algorithm",
        "l1_oplb",
        "--seed",
        "5",
        "--plot",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "ledger.csv",
        "trajectory.csv",
        "summary.json",
        "config.json",
        "regret.svg",
        "trajectory.svg",
    ] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
    let ledger = std::fs::read_to_string(out_dir.join("ledger.csv")).unwrap();
    assert!(ledger.starts_with(
        "t,optimal_value,policy_value,regret_increment,cumulative_regret,cost_1,violation,branch"
    ));
    assert_eq!(ledger.lines().count(), 16);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["algorithm"], "l1_oplb");
    assert_eq!(summary["seed"], 5);
}

#[test]
fn replicate_then_compare_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let mut dirs = Vec::new();
    for alg in ["l1_oplb", "ubm_oplb"] {
        let dir = tmp.path().join(alg);
        let out = run(&[
            "replicate",
            "--preset",
            "unit_disk",
            "--algorithm",
            alg,
            "--horizon",
            "10",
            "--replicates",
            "3",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        for f in [
            "regret_band.csv",
            "terminal_regret.csv",
            "terminal_histogram.csv",
            "aggregate.json",
        ] {
            assert!(dir.join(f).is_file(), "missing {f}");
        }
        let out = run(&["plot", dir.to_str().unwrap()]);
        assert!(out.status.success());
        assert!(dir.join("regret_band.svg").is_file());
        assert!(dir.join("terminal_histogram.svg").is_file());
        dirs.push(dir);
    }
    let cmp = tmp.path().join("cmp");
    let out = run(&[
        "plot",
        "--compare",
        dirs[0].to_str().unwrap(),
        dirs[1].to_str().unwrap(),
        "--out",
        cmp.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(cmp.join("regret_comparison.svg").is_file());
    assert!(cmp.join("terminal_histogram_comparison.svg").is_file());
}

#[test]
fn oracle_prints_the_optimal_policy() {
    let out = run(&["oracle", "--preset", "unit_disk"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let mean: Vec<f64> = serde_json::from_value(v["mean"].clone()).unwrap();
    // the cost line 0.5(x + y) = 0.5 is active at the optimum
    assert!((0.5 * (mean[0] + mean[1]) - 0.5).abs() < 1e-6);
    assert!(v["optimal_value"].as_f64().unwrap() > 2.5);
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    let out = run(&["run", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["run", "--preset", "unit_disk", "--algorithm", "greedy"]);
    assert_eq!(out.status.code(), Some(2));

    let unknown = write_config(tmp.path(), "unknown.json", |c| c["extra"] = 1.into());
    let out = run(&["oracle", "--config", &unknown]);
    assert_eq!(out.status.code(), Some(2));

    let unsafe_start = write_config(tmp.path(), "unsafe.json", |c| {
        c["tau"] = serde_json::json!([-1.0])
    });
    let out = run(&["oracle", "--config", &unsafe_start]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["preset", "nowhere"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solver_failures_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let overflow = write_config(tmp.path(), "overflow.json", |c| {
        c["theta_star"] = serde_json::json!([1e300, 1e300])
    });
    let out = run(&["oracle", "--config", &overflow]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
