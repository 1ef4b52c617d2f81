use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fedelastic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedelastic"))
        .args(args)
        .env_remove("FEDELASTIC_OUT_DIR")
        .output()
        .unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_outputs_and_manifest_hash_matches_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("exp.toml");
    let text =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../presets/synth_convex.toml")).unwrap();
    std::fs::write(&config, &text).unwrap();
    let out = tmp.path().join("out");
    let res = fedelastic(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--rounds",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let stdout: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(stdout["summary"]["rounds"], 4);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["status"], "completed");
    assert_eq!(
        manifest["config_sha256"].as_str().unwrap(),
        fedelastic_core::harness::manifest::sha256_hex(text.as_bytes())
    );
    assert_eq!(manifest["effective_config"]["rounds"], 4);
    let files: Vec<&str> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["path"].as_str().unwrap())
        .collect();
    assert_eq!(
        files,
        ["diagnostics.csv", "histogram.csv", "rounds.csv", "summary.json"]
    );
    let csv = std::fs::read_to_string(out.join("rounds.csv")).unwrap();
    assert!(csv.starts_with("# fedelastic rounds v1\nround,variant,nnz_cum,bits_cum,H_round,elements_round,"));
}

#[test]
fn config_errors_are_json_on_stderr_with_exit_2() {
    let res = fedelastic(&[
        "run",
        "--config",
        "synth_convex",
        "--lambda2",
        "0",
        "--out",
        "/nonexistent/never",
    ]);
    assert_eq!(res.status.code(), Some(2));
    let err = stderr_json(&res);
    assert_eq!(err["kind"], "config");
    assert!(err["errors"][0].as_str().unwrap().contains("lambda2"));
    assert!(res.stdout.is_empty());
}

#[test]
fn unknown_keys_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.toml");
    std::fs::write(&config, "seed = 1\nrounds = 2\nwarp_speed = 9\n").unwrap();
    let res = fedelastic(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr_json(&res)["message"].as_str().unwrap().contains("warp_speed"));
}

#[test]
fn usage_errors_are_json_too() {
    let res = fedelastic(&["run", "--config", "synth_convex", "--variant", "fedfancy"]);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(stderr_json(&res)["kind"], "usage");
}

#[test]
fn runtime_failures_exit_1_and_finalize_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let res = fedelastic(&[
        "run",
        "--config",
        "synth_mlp",
        "--rounds",
        "2",
        "--out",
        out.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert!(res.status.success());
    let bad = tmp.path().join("bad.toml");
    let text = fedelastic(&["presets", "--show", "synth_convex"]).stdout;
    let text = String::from_utf8(text)
        .unwrap()
        .replace("local_lr = 0.05", "local_lr = 1e6");
    std::fs::write(&bad, text).unwrap();
    let res = fedelastic(&["run", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    let err = stderr_json(&res);
    assert_eq!(err["kind"], "diverged");
    assert!(err["message"].as_str().unwrap().contains("local_lr"));
    assert_eq!(read_json(&out.join("manifest.json"))["status"], "failed");
}

#[test]
fn output_directory_comes_from_the_environment_unless_out_is_given() {
    let tmp = tempfile::tempdir().unwrap();
    let env_dir = tmp.path().join("from_env");
    let res = Command::new(env!("CARGO_BIN_EXE_fedelastic"))
        .args(["run", "--config", "synth_convex", "--rounds", "1"])
        .env("FEDELASTIC_OUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(env_dir.join("summary.json").is_file());

    let flag_dir = tmp.path().join("from_flag");
    let res = Command::new(env!("CARGO_BIN_EXE_fedelastic"))
        .args([
            "run",
            "--config",
            "synth_convex",
            "--rounds",
            "1",
            "--out",
            flag_dir.to_str().unwrap(),
        ])
        .env("FEDELASTIC_OUT_DIR", tmp.path().join("ignored"))
        .output()
        .unwrap();
    assert!(res.status.success());
    assert!(flag_dir.join("summary.json").is_file());
    assert!(!tmp.path().join("ignored").exists());
}

#[test]
fn seed_flag_reproduces_and_changes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let dir = tmp.path().join(name);
        let res = fedelastic(&[
            "run",
            "--config",
            "synth_convex",
            "--rounds",
            "5",
            "--seed",
            seed,
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(res.status.success());
        std::fs::read(dir.join("rounds.csv")).unwrap()
    };
    let (a, b, c) = (run("a", "7"), run("b", "7"), run("c", "8"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn compare_writes_a_joint_report() {
    let tmp = tempfile::tempdir().unwrap();
    let res = fedelastic(&[
        "compare",
        "--configs",
        "synth_mlp",
        "synth_mlp",
        "--rounds",
        "3",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report = read_json(&tmp.path().join("compare.json"));
    assert_eq!(report["nnz_ratio"], 1.0);
    assert_eq!(report["bits_ratio"], 1.0);
    assert_eq!(report["accuracy_difference_pp"], 0.0);
    assert!(tmp.path().join("first/rounds.csv").is_file());
    assert!(tmp.path().join("second/rounds.csv").is_file());
}

#[test]
fn diagnose_writes_verdict_and_averaged_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let res = fedelastic(&[
        "diagnose",
        "--config",
        "synth_quadratic",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let verdict = read_json(&tmp.path().join("verdict.json"));
    assert_eq!(verdict["passed"], true);
    assert_eq!(verdict["convergence"]["rate"]["passed"], true);
    assert_eq!(verdict["sign_concentration"].as_array().unwrap().len(), 6);
    let csv = std::fs::read_to_string(tmp.path().join("diagnostics.csv")).unwrap();
    assert_eq!(
        csv.lines().nth(1).unwrap(),
        "round,gamma_gap,risk_gap,C_t,eps_t,sign_term,h_identity_dev,iterate_gap,C_t_unsquared"
    );
    assert_eq!(csv.lines().count(), 2 + 200);
}

#[test]
fn diagnose_rejects_non_convex_models() {
    let res = fedelastic(&["diagnose", "--config", "synth_mlp", "--out", "/nonexistent/x"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr_json(&res)["errors"][0].as_str().unwrap().contains("convex_mode"));
}

#[test]
fn presets_are_listed_and_printable() {
    let res = fedelastic(&["presets"]);
    assert!(res.status.success());
    let listing = String::from_utf8(res.stdout).unwrap();
    assert_eq!(
        listing.lines().count(),
        fedelastic_core::harness::presets::PRESETS.len()
    );
    assert!(listing.contains("mnist_alg3"));
    let shown = String::from_utf8(fedelastic(&["presets", "--show", "mnist_alg3"]).stdout).unwrap();
    assert!(shown.contains("lambda1 = 1e-4") && shown.contains("epsilon = 5e-3"));
}

#[test]
fn degenerate_elastic_run_matches_baseline_via_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, variant: &str| {
        let dir = tmp.path().join(name);
        let res = fedelastic(&[
            "run",
            "--config",
            "synth_convex",
            "--variant",
            variant,
            "--lambda1",
            "0",
            "--rounds",
            "8",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        std::fs::read(dir.join("rounds.csv")).unwrap()
    };
    assert_eq!(run("en", "feddyn_en"), run("base", "feddyn"));
}
