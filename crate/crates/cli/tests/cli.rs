use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cnflab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cnflab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn payload(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let env: Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    for key in ["config", "tool_version", "prng", "wall_time_ms"] {
        assert!(env.get(key).is_some(), "envelope lacks {key}");
    }
    env["payload"].clone()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_cnf(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    path_str(&p).to_owned()
}

#[test]
fn generate_writes_dimacs_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.cnf");
    let o = cnflab(&["generate", "--family", "gadget", "--k", "3", "--ell", "2", "--restricted", "--out", path_str(&out)]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("p cnf 6 "));
    let side: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("g.cnf.json")).unwrap()).unwrap();
    assert_eq!(side["payload"]["n"], 6);
    assert_eq!(side["config"]["args"]["restricted"], true);
}

#[test]
fn generate_without_seed_is_a_usage_error() {
    let o = cnflab(&["generate", "--family", "random", "--k", "3", "--n", "10", "--alpha", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));
}

#[test]
fn generate_is_deterministic() {
    let args = ["generate", "--family", "linear", "--k", "3", "--d", "2", "--n", "12", "--seed", "9"];
    assert_eq!(cnflab(&args).stdout, cnflab(&args).stdout);
}

#[test]
fn count_marginal_and_enumerate_agree() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_cnf(dir.path(), "f.cnf", "p cnf 3 2\n1 2 0\n-1 3 0\n");
    assert_eq!(payload(&cnflab(&["count", &f]))["count"], 4);
    let e = payload(&cnflab(&["enumerate", &f]));
    assert_eq!(e["solutions"].as_array().unwrap().len(), 4);
    let m = payload(&cnflab(&["marginal", &f]));
    // Solutions: 010, 011, 101, 111 over (x1, x2, x3).
    assert_eq!(m["marginals"][0], serde_json::json!({"num": "1", "den": "2"}));
    assert_eq!(m["marginals"][2], serde_json::json!({"num": "3", "den": "4"}));
}

#[test]
fn marginal_of_unsat_formula_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_cnf(dir.path(), "u.cnf", "p cnf 1 2\n1 0\n-1 0\n");
    assert_eq!(cnflab(&["marginal", &f]).status.code(), Some(1));
}

#[test]
fn tv_rejects_mismatched_variable_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_cnf(dir.path(), "a.cnf", "p cnf 3 1\n1 2 0\n");
    let b = write_cnf(dir.path(), "b.cnf", "p cnf 4 1\n1 2 0\n");
    let o = cnflab(&["tv", &a, &b]);
    assert_eq!(o.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("n = 3") && msg.contains("n = 4"), "{msg}");
}

#[test]
fn tv_between_identical_formulas_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_cnf(dir.path(), "a.cnf", "p cnf 3 1\n1 2 0\n");
    let p = payload(&cnflab(&["tv", &a, &a]));
    assert_eq!(p["tv"], serde_json::json!({"num": "0", "den": "1"}));
}

#[test]
fn missing_arguments_and_files_exit_two() {
    assert_eq!(cnflab(&["count"]).status.code(), Some(2));
    assert_eq!(cnflab(&["count", "/nonexistent/x.cnf"]).status.code(), Some(2));
    assert_eq!(cnflab(&["--jobs", "0", "gadget-verify", "--k", "3", "--ell", "1"]).status.code(), Some(2));
}

#[test]
fn sweep_csv_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.json");
    fs::write(
        &cfg,
        r#"{"family":{"kind":"disjoint","k":2},"n_values":[6,8],"t_grid":[2,8,32],"trials":10,"delta":0.2,"seed_base":5}"#,
    )
    .unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    payload(&cnflab(&["sweep", path_str(&cfg), "--out", path_str(&a)]));
    payload(&cnflab(&["--jobs", "1", "sweep", path_str(&cfg), "--out", path_str(&b)]));
    let csv = fs::read(&a).unwrap();
    assert_eq!(csv, fs::read(&b).unwrap());
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("family,n,k,T,trials,successes,t_star_flag,seed_base\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 3);
}

#[test]
fn sweep_config_errors_name_each_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"family":{"kind":"disjoint","k":2},"n_values":[4,"x"],"t_grid":[1],"trials":0,"delta":2,"seed_base":1,"extra":true}"#).unwrap();
    let o = cnflab(&["sweep", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&o.stderr);
    for path in ["$.n_values[1]", "$.trials", "$.delta", "$.extra"] {
        assert!(msg.contains(path), "{path} missing from {msg}");
    }
}

#[test]
fn learn_writes_learned_formula() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_cnf(dir.path(), "f.cnf", "p cnf 4 2\n1 2 0\n3 4 0\n");
    let learned = dir.path().join("l.cnf");
    let p = payload(&cnflab(&["learn", &f, "--k", "2", "--t", "200", "--seed", "1", "--tv", "--learned-out", path_str(&learned)]));
    assert_eq!(p["success"], true);
    assert_eq!(p["tv"], serde_json::json!({"num": "0", "den": "1"}));
    let o = cnflab(&["tv", &f, path_str(&learned)]);
    assert_eq!(payload(&o)["tv_f64"], 0.0);
}

#[test]
fn resilience_reports_exact_theta() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_cnf(dir.path(), "f.cnf", "p cnf 4 2\n1 2 0\n3 4 0\n");
    let p = payload(&cnflab(&["resilience", &f, "--k", "2"]));
    // Killing one of 9 solutions is the least any new 2-clause can do.
    assert_eq!(p["theta"], serde_json::json!({"num": "1", "den": "9"}));
}

#[test]
fn gadget_verify_passes_small_cases() {
    for (k, ell) in [("3", "1"), ("3", "2"), ("4", "2")] {
        let p = payload(&cnflab(&["gadget-verify", "--k", k, "--ell", ell]));
        assert_eq!(p["pass"], true);
        assert_eq!(p["extra"].as_array().unwrap().len(), 1);
    }
}

#[test]
fn props_and_reveal_sim_run() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("r.cnf");
    assert!(cnflab(&["generate", "--family", "random", "--k", "5", "--n", "14", "--alpha", "2", "--seed", "4", "--out", path_str(&f)])
        .status
        .success());
    let p = payload(&cnflab(&["props", path_str(&f), "--k", "5"]));
    assert_eq!(p["preset"], "asymptotic");
    assert_eq!(cnflab(&["props", path_str(&f), "--k", "5", "--preset", "other"]).status.code(), Some(2));

    let cfg = dir.path().join("rv.json");
    fs::write(
        &cfg,
        r#"{"clause":[1,-2,3,-4,5],"position":0,"trials":10,"seed":3,"params":{"k":5,"alpha":2.0,"p_hd":1e9,"eps_bd":0.4,"zeta":0.4}}"#,
    )
    .unwrap();
    let a = payload(&cnflab(&["reveal-sim", path_str(&f), path_str(&cfg)]));
    let b = payload(&cnflab(&["reveal-sim", path_str(&f), path_str(&cfg)]));
    assert_eq!(a, b);
    assert_eq!(a["estimate"]["trials"], 10);
}
