use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_percycle")).args(args).output().expect("spawn percycle")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn closed_sample_has_no_open_edges() {
    let o = run(&["sample", "--d", "2", "--r", "4", "--p", "0"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["open"].as_array().unwrap().len(), 0);
    assert_eq!(v["edges"], 32);
}

#[test]
fn usage_errors_exit_one() {
    let o = run(&["sample", "--r", "4", "--p", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("percycle:error:usage"));
    assert_eq!(run(&["estimate", "nonsense", "--d", "2", "--r", "4", "--p", "0.5"]).status.code(), Some(1));
    assert_eq!(run(&["sample", "--d", "2", "--r", "4", "--p", "1.5"]).status.code(), Some(1));
    assert_eq!(run(&["sample", "--d", "2", "--r", "2", "--p", "0.5"]).status.code(), Some(1));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# small run\nd=2\nr=4\np=1\nseed=5\n").unwrap();
    let from_file = run(&["sample", "--config", cfg.to_str().unwrap()]);
    assert!(from_file.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&from_file).trim()).unwrap();
    assert_eq!(v["open"].as_array().unwrap().len(), 32);
    assert_eq!(v["seed"], 5);

    let overridden = run(&["sample", "--config", cfg.to_str().unwrap(), "--p", "0"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&overridden).trim()).unwrap();
    assert_eq!(v["open"].as_array().unwrap().len(), 0);

    std::fs::write(&cfg, "colour=blue\n").unwrap();
    assert_eq!(run(&["sample", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn estimate_csv_is_identical_across_thread_counts() {
    let args = |t: &'static str| {
        vec!["estimate", "vertex-long-cycle", "--d", "3", "--r", "4,5", "--p", "0.25", "--replicas", "24", "--seed", "9", "--no-header-meta", "--threads", t]
    };
    let base = run(&args("1"));
    assert!(base.status.success());
    let text = stdout(&base);
    assert!(text.lines().any(|l| l.starts_with("quantity,d,r,L,p")));
    assert!(text.lines().any(|l| l.starts_with("long_cycle_vertices,3,4,")));
    for t in ["4", "8"] {
        assert_eq!(stdout(&run(&args(t))), text);
    }
}

#[test]
fn estimate_writes_jsonl_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("est.jsonl");
    let o = run(&[
        "estimate",
        "ball-boundary-sum",
        "--d",
        "3",
        "--n",
        "2,3",
        "--pc-ref",
        "--replicas",
        "30",
        "--format",
        "jsonl",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(rows.iter().any(|r| r["quantity"] == "ball_boundary_sum" && r["r"] == 3));
}

#[test]
fn failed_band_exits_three() {
    // a closed system has mean cluster size 1, so the scaled means spread by (r2/r1)^(d/3)
    let o = run(&["estimate", "mean-cluster-size", "--d", "3", "--r", "3,30", "--p", "0", "--replicas", "2", "--check", "--no-header-meta"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn explore_and_oracle_and_pc() {
    let o = run(&["explore", "--d", "2", "--r", "5", "--p", "0.5", "--check"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(v["special"].is_array());

    let o = run(&["oracle", "--replicas", "20"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().all(|l| l.starts_with("PASS")));

    let o = run(&["pc"]);
    assert!(stdout(&o).lines().any(|l| l.starts_with("7\tnn\t")));
}
