//! End-to-end subcommand tests driving the compiled binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use forkjoin::{solve_gamma, DistributionSpec, ForkJoinConfig, SampleManifest, ServerClass};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fjcli_{name}_{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn forkjoin_cmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forkjoin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("bad stdout `{text}`: {e}"))
}

#[test]
fn gamma_reports_the_root() {
    let dir = scratch("gamma_root");
    let cfg = write_config(
        &dir,
        "gamma.json",
        r#"{"service": {"family": "exponential", "rate": 2.0}, "lambda": 1.0}"#,
    );
    let out = forkjoin_cmd(&["gamma", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert!((report["gamma"].as_f64().unwrap() - 1.593_624_26).abs() < 1e-6);
    assert!(report["lambda_prime"].as_f64().unwrap() > 0.0);
    assert!(report["c_hat"].as_f64().unwrap() > 0.0);
    assert_eq!(report["interior"], serde_json::Value::Bool(true));
}

#[test]
fn gamma_domain_failures_exit_two_with_a_reason() {
    let dir = scratch("gamma_domain");
    let no_root = write_config(
        &dir,
        "noroot.json",
        r#"{"service": {"family": "deterministic", "value": 0.4}, "lambda": 1.0}"#,
    );
    let out = forkjoin_cmd(&["gamma", "--config", no_root.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["reason"], "NoRoot");

    let unstable = write_config(
        &dir,
        "unstable.json",
        r#"{"service": {"family": "exponential", "rate": 0.5}, "lambda": 1.0}"#,
    );
    let out = forkjoin_cmd(&["gamma", "--config", unstable.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["reason"], "Unstable");
}

#[test]
fn config_mistakes_exit_one() {
    let dir = scratch("config_mistakes");
    let out = forkjoin_cmd(&["gamma"]);
    assert_eq!(out.status.code(), Some(1));

    let out = forkjoin_cmd(&["gamma", "--config", "/does/not/exist.json"]);
    assert_eq!(out.status.code(), Some(1));

    let bad = write_config(
        &dir,
        "typo.json",
        r#"{"service": {"family": "exponential", "rate": 2.0}, "lamda": 1.0}"#,
    );
    let out = forkjoin_cmd(&["gamma", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_is_reproducible_and_seed_flag_overrides() {
    let dir = scratch("simulate_repro");
    let cfg = write_config(
        &dir,
        "sim.json",
        r#"{
            "arrival": {"family": "exponential", "rate": 1.0},
            "servers": [{"service": {"family": "exponential", "rate": 2.0}, "count": 3}],
            "statistic": {"kind": "max-wait-lindley"},
            "replications": 4,
            "master_seed": 42,
            "horizon": 100
        }"#,
    );
    let cfg = cfg.to_str().unwrap();
    let out1 = dir.join("a");
    let out2 = dir.join("b");
    let out3 = dir.join("c");
    for (out_dir, extra) in [(&out1, None), (&out2, None), (&out3, Some("43"))] {
        let mut args = vec!["simulate", "--config", cfg, "--out", out_dir.to_str().unwrap()];
        if let Some(seed) = extra {
            args.extend(["--seed", seed]);
        }
        let out = forkjoin_cmd(&args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let csv = |d: &Path| fs::read(d.join("max_wait_lindley.csv")).unwrap();
    assert_eq!(csv(&out1), csv(&out2));
    assert_ne!(csv(&out1), csv(&out3));

    let manifest: SampleManifest = serde_json::from_str(
        &fs::read_to_string(out1.join("max_wait_lindley.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest.replications, 4);
    assert_eq!(manifest.master_seed, 42);
    let system = ForkJoinConfig {
        arrival: DistributionSpec::Exponential { rate: 1.0 },
        servers: vec![ServerClass {
            service: DistributionSpec::Exponential { rate: 2.0 },
            count: 3,
        }],
    };
    assert_eq!(manifest.config_digest, system.digest());
}

#[test]
fn compare_accepts_perfect_samples_under_a_point_mass_law() {
    let dir = scratch("compare_point_mass");
    let n = 10usize;
    let system = ForkJoinConfig {
        arrival: DistributionSpec::Deterministic { value: 1.0 },
        servers: vec![ServerClass {
            service: DistributionSpec::Exponential { rate: 2.0 },
            count: n,
        }],
    };
    let gamma = solve_gamma(&DistributionSpec::Exponential { rate: 2.0 }, 1.0)
        .unwrap()
        .gamma;
    let center = (n as f64).ln() / gamma;
    let mut csv = String::from("replication,value,censored\n");
    for i in 0..5 {
        csv.push_str(&format!("{i},{center},false\n"));
    }
    fs::write(dir.join("perfect.csv"), csv).unwrap();
    let manifest = serde_json::json!({
        "statistic": {"kind": "max_wait_sup"},
        "master_seed": 1,
        "replications": 5,
        "horizon": 100,
        "n_servers": n,
        "config_digest": system.digest(),
        "censored": 0,
    });
    fs::write(dir.join("perfect.manifest.json"), manifest.to_string()).unwrap();
    let cfg = write_config(
        &dir,
        "cmp.json",
        &format!(
            r#"{{
                "arrival": {{"family": "deterministic", "value": 1.0}},
                "servers": [{{"service": {{"family": "exponential", "rate": 2.0}}, "count": {n}}}],
                "law": "wait",
                "samples": "{}"
            }}"#,
            dir.join("perfect.csv").display()
        ),
    );
    let out = forkjoin_cmd(&[
        "compare",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let verdict = stdout_json(&out);
    assert_eq!(verdict["degenerate"], serde_json::Value::Bool(true));
    assert_eq!(verdict["pass"], serde_json::Value::Bool(true));
    assert!(verdict["max_abs_z"].as_f64().unwrap() < 1e-12);
}

#[test]
fn compare_rejects_a_mismatched_law() {
    // Queue law against waiting-time samples. At rate 10 the two centers
    // differ by 9/γ per log-server, so the standardized samples sit far in
    // the law's lower tail and the KS distance approaches one.
    let dir = scratch("compare_mismatch");
    let cfg = write_config(
        &dir,
        "cmp.json",
        r#"{
            "arrival": {"family": "exponential", "rate": 10.0},
            "servers": [{"service": {"family": "exponential", "rate": 20.0}, "count": 50}],
            "law": "queue",
            "statistic": {"kind": "max_wait_sup"},
            "replications": 200,
            "master_seed": 5,
            "horizon": 200
        }"#,
    );
    let out = forkjoin_cmd(&[
        "compare",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let verdict = stdout_json(&out);
    assert_eq!(verdict["pass"], serde_json::Value::Bool(false));
    assert!(verdict["ks"].as_f64().unwrap() > 0.5);
}

#[test]
fn compare_writes_a_qq_table() {
    let dir = scratch("compare_qq");
    let cfg = write_config(
        &dir,
        "cmp.json",
        r#"{
            "arrival": {"family": "exponential", "rate": 1.0},
            "servers": [{"service": {"family": "exponential", "rate": 2.0}, "count": 50}],
            "law": "wait",
            "statistic": {"kind": "max_wait_sup"},
            "replications": 300,
            "master_seed": 6,
            "horizon": 200,
            "threshold": 0.5,
            "label": "qq_check"
        }"#,
    );
    let out_dir = dir.join("out");
    let out = forkjoin_cmd(&[
        "compare",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let qq = fs::read_to_string(out_dir.join("qq_check.qq.csv")).unwrap();
    let mut lines = qq.lines();
    assert_eq!(lines.next(), Some("p,empirical_quantile,predicted_quantile"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 99);
    assert!(rows[0].starts_with("0.01,"));
    assert!(rows[98].starts_with("0.99,"));
    // quantiles never decrease in p
    let emp: Vec<f64> = rows
        .iter()
        .map(|r| r.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(emp.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn hetero_selects_the_slower_class() {
    let dir = scratch("hetero_select");
    let cfg = write_config(
        &dir,
        "het.json",
        r#"{
            "classes": [
                {"service": {"family": "exponential", "rate": 2.0}, "alpha": 0.5},
                {"service": {"family": "exponential", "rate": 4.0}, "alpha": 0.5}
            ],
            "arrival": {"family": "exponential", "rate": 1.0}
        }"#,
    );
    let out = forkjoin_cmd(&["hetero", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["selected"], 0);
    let g0 = report["classes"][0]["gamma"].as_f64().unwrap();
    let g1 = report["classes"][1]["gamma"].as_f64().unwrap();
    assert!(g0 < g1);
    assert_eq!(report["law"]["kind"], "Normal");
}

#[test]
fn hetero_duplicate_classes_are_ambiguous() {
    let dir = scratch("hetero_dup");
    let cfg = write_config(
        &dir,
        "het.json",
        r#"{
            "classes": [
                {"service": {"family": "exponential", "rate": 2.0}, "alpha": 0.5},
                {"service": {"family": "exponential", "rate": 2.0}, "alpha": 0.5}
            ],
            "lambda": 1.0,
            "sigma_a": 1.0
        }"#,
    );
    let out = forkjoin_cmd(&["hetero", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["reason"], "AmbiguousMinimum");
}

#[test]
fn verify_passes_with_defaults() {
    let dir = scratch("verify_defaults");
    let out_dir = dir.join("out");
    let out = forkjoin_cmd(&["verify", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["pass"], serde_json::Value::Bool(true));
    assert_eq!(report["checks"].as_array().unwrap().len(), 6);
    assert!(out_dir.join("verify.json").is_file());
}

#[test]
fn verify_skips_root_checks_when_no_root_exists() {
    let dir = scratch("verify_skip");
    let cfg = write_config(
        &dir,
        "verify.json",
        r#"{
            "service": {"family": "deterministic", "value": 0.4},
            "n_servers": 10,
            "horizon": 100,
            "replications": 400
        }"#,
    );
    let out = forkjoin_cmd(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    let checks = report["checks"].as_array().unwrap();
    let skipped: Vec<&str> = checks
        .iter()
        .filter(|c| c["status"] == "skip")
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        skipped,
        ["root_residual", "duality", "derivative_consistency"]
    );
    for check in checks {
        if check["status"] == "skip" {
            assert!(check["reason"].as_str().unwrap().contains("NoRoot"));
        } else {
            assert_eq!(check["status"], "pass", "{check}");
        }
    }
}
