use std::fs;
use std::process::{Command, Output};

fn ecasim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecasim"))
        .args(args)
        .env_remove("ECASIM_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_reports_convergence_for_small_eca() {
    let out = ecasim(&["run", "--variant", "eca", "--nodes", "8", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("converged    yes"), "{text}");
}

#[test]
fn run_json_line_is_parseable() {
    let out = ecasim(&["run", "--variant", "ca", "--nodes", "3", "--duration", "0.5", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let last = stdout(&out).lines().last().unwrap().to_string();
    let v: serde_json::Value = serde_json::from_str(&last).unwrap();
    assert_eq!(v["variant"], "ca");
    assert_eq!(v["nodes"], 3);
}

#[test]
fn fair_share_with_fifty_nodes_is_fair() {
    let out = ecasim(&["run", "--variant", "eca-hys-fs", "--nodes", "50", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let last = stdout(&out).lines().last().unwrap().to_string();
    let v: serde_json::Value = serde_json::from_str(&last).unwrap();
    assert!(v["jfi"].as_f64().unwrap() >= 0.95);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["run", "--nodes", "0"],
        vec!["run", "--variant", "dcf"],
        vec!["run", "--cw-min", "30"],
        vec!["run", "--duration", "-1"],
        vec!["bogus"],
        vec![],
        vec!["sweep", "--nodes-from", "10", "--nodes-to", "5"],
        vec!["trace", "--slots", "0"],
    ] {
        let out = ecasim(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    assert_eq!(ecasim(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_config_file_is_a_runtime_error() {
    let out = ecasim(&["run", "--config", "/nonexistent/ecasim.conf"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("sim.conf");
    fs::write(&conf, "variant = ca\nnodes = 4\nduration_s = 0.2\nseed = 3\n").unwrap();
    let out = ecasim(&["run", "--config", conf.to_str().unwrap(), "--nodes", "6", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&out).lines().last().unwrap()).unwrap();
    assert_eq!(v["variant"], "ca");
    assert_eq!(v["nodes"], 6);
    assert_eq!(v["seed"], 3);
}

#[test]
fn trace_emits_one_line_per_slot() {
    let out = ecasim(&["trace", "--variant", "eca", "--nodes", "2", "--slots", "200"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 200);
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 5);
        assert_eq!(fields[0], i.to_string());
        assert!(["E", "S", "C"].contains(&fields[1]));
    }
}

#[test]
fn crowded_csma_ca_trace_has_collisions() {
    for seed in ["1", "2", "3"] {
        let out = ecasim(&["trace", "--variant", "ca", "--nodes", "30", "--seed", seed]);
        assert!(stdout(&out).lines().any(|l| l.split('\t').nth(1) == Some("C")));
    }
}

#[test]
fn trace_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.txt");
    let out = ecasim(&["trace", "--nodes", "4", "--slots", "50", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_to_string(path).unwrap().lines().count(), 50);
}

#[test]
fn sweep_writes_identical_files_for_same_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = ecasim(&[
            "sweep", "--replications", "5", "--nodes-from", "2", "--nodes-to", "6",
            "--duration", "0.5", "--seed", "4", "--out-dir", out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push((
            fs::read(out_dir.join("fig1_throughput.csv")).unwrap(),
            fs::read(out_dir.join("fig2_hysteresis_fairshare.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(String::from_utf8_lossy(&outputs[0].0).lines().count(), 11);
}

#[test]
fn sweep_honours_output_env_var() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ecasim"))
        .args(["sweep", "--variants", "eca", "--replications", "2", "--nodes-from", "3", "--nodes-to", "3", "--duration", "0.2"])
        .env("ECASIM_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("fig1_throughput.csv").exists());
    assert!(!dir.path().join("fig2_hysteresis_fairshare.csv").exists());
}

#[test]
fn sweep_into_unwritable_path_fails() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("f");
    fs::write(&file, "x").unwrap();
    let out = ecasim(&["sweep", "--replications", "2", "--out-dir", file.join("x").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
