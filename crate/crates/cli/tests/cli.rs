// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

type Mutations<'a> = &'a [(&'a str, Value)];

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tvcert"));
    c.env_remove("TVCERT_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn tvcert")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stable(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with("# generated_unix=")).collect::<Vec<_>>().join("\n")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn nonpositive_gamma_exits_2_naming_the_field() {
    let o = run(&[
        "certify",
        "--config",
        r#"{"regularity":{"d":1,"gamma":-0.5,"c_phi":1,"delta":1,"c_f":1},"fm_upper":0.1}"#,
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gamma"), "{}", stderr(&o));
}

#[test]
fn unknown_key_exits_2_with_position() {
    let o = run(&["certify", "--config", "{\"fm_upper\": 0.1,\n \"bogus\": 1}"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("bogus") && e.contains(":2:"), "{e}");
}

#[test]
fn clt_csv_has_declared_columns_and_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = run(&["--out", out.to_str().unwrap(), "clt", "--base", "laplace", "--n-list", "4,16,64"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "n,tv,tv_trunc_err,supdist,slope_so_far");
    assert_eq!(body.len(), 4);
    let ns: Vec<&str> = body[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ns, ["4", "16", "64"]);
    assert!(text.lines().any(|l| l.starts_with("# tvcert ") && l.contains("seed=0")));
}

#[test]
fn dynsys_reruns_are_identical_across_thread_counts() {
    let cfg = configs().join("recursion.json");
    let args = ["dynsys", "--config", cfg.to_str().unwrap(), "--horizon", "4", "--paths", "4000"];
    let mut seen = Vec::new();
    for threads in ["1", "3", "1"] {
        let o = bin().args(["--seed", "11", "--threads", threads]).args(args).output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        seen.push(stable(&String::from_utf8(o.stdout).unwrap()));
    }
    assert_eq!(seen[0], seen[1]);
    assert_eq!(seen[0], seen[2]);
    let other = bin().args(["--seed", "12"]).args(args).output().unwrap();
    assert_ne!(stable(&String::from_utf8(other.stdout).unwrap()), seen[0]);
}

#[test]
fn json_report_echoes_config_without_threads() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    let cfg = configs().join("metrics.json");
    let o = run(&["--threads", "2", "--out", out.to_str().unwrap(), "metrics", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(!text.contains("threads"));
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["command"], "metrics");
    assert_eq!(v["config"]["config"]["pair"][0]["family"], "laplace");
    let w1 = v["result"]["w1"].as_f64().unwrap();
    assert!(v["result"]["fm"]["upper"].as_f64().unwrap() <= w1);
    assert!(v["result"]["dcf"]["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn certify_renders_and_writes_matching_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let o = run(&[
        "--out",
        out.to_str().unwrap(),
        "certify",
        "--config",
        r#"{"regularity":{"d":1,"gamma":1,"c_phi":1,"delta":1,"c_f":1},"fm_upper":1e-9}"#,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let bound = text.lines().find(|l| l.contains("TV bound")).unwrap();
    assert!(bound.ends_with("≤ 2 enforced: no"), "{bound}");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let tv = v["result"]["certificate"]["tv_bound"].as_f64().unwrap();
    assert!(bound.contains(&format!("TV bound = {tv} ")), "{bound} vs {tv}");
    assert!((v["result"]["certificate"]["G"].as_f64().unwrap() - 25.198).abs() < 1e-3);
}

#[test]
fn variants_and_modes_parse() {
    let cfg = r#"{"regularity":{"d":1,"gamma":1,"c_phi":1,"delta":1,"c_f":1},"fm_upper":1e-6}"#;
    for v in ["fm", "cf", "dk:2"] {
        for m in ["paper", "tight"] {
            let o = run(&["--variant", v, "--mode", m, "certify", "--config", cfg]);
            assert!(o.status.success(), "{v} {m}: {}", stderr(&o));
        }
    }
    assert_eq!(run(&["--variant", "dk:0", "certify", "--config", cfg]).status.code(), Some(2));
    assert_eq!(run(&["--mode", "loose", "certify", "--config", cfg]).status.code(), Some(2));
    assert_eq!(run(&["--threads", "zero", "certify", "--config", cfg]).status.code(), Some(2));
}

#[test]
fn exp_regime_from_pair() {
    let cfg = r#"{"pair":[{"family":"gaussian","mean":[0],"cov":[[1]]},{"family":"gaussian","mean":[1e-8],"cov":[[1]]}],"exp":{"r":1}}"#;
    let o = run(&["certify", "--config", cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout).unwrap().contains("enforced:"));
    let lap = cfg.replace(r#""gaussian","mean":[1e-8],"cov":[[1]]"#, r#""laplace","lambda":1"#);
    assert_eq!(run(&["certify", "--config", &lap]).status.code(), Some(1));
}

#[test]
fn check_dominated_verdicts() {
    let o = run(&["check-dominated"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["verdict"], "dominated");
    assert_eq!(v["result"]["converges_tv"], true);
    let o = run(&["check-dominated", "--sequence", "cos_modulated", "--n-list", "1,2,4,8"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["converges_tv"], false);
    assert_eq!(run(&["check-dominated", "--sequence", "nope"]).status.code(), Some(2));
}

/// Every shipped config runs; each single-field mutation to an illegal
/// value is rejected with exit 2.
#[test]
fn example_configs_and_mutations() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &str, Mutations); 3] = [
        (
            "certify",
            "pair.json",
            &[("/delta", Value::from(-1.0)), ("/pair/0/cov/0/0", Value::from(0.0)), ("/fm_upper", Value::from(-1.0))],
        ),
        (
            "metrics",
            "metrics.json",
            &[("/pair/0/lambda", Value::from(0.0)), ("/pair/1/mean", Value::from(vec![0.0, 0.0]))],
        ),
        (
            "dynsys",
            "recursion.json",
            &[("/kappa", Value::from(1.5)), ("/coeffs/ratio", Value::from(2.0)), ("/nu/A/0/0", Value::from(0.9))],
        ),
    ];
    for (cmd, file, mutations) in cases {
        let path = configs().join(file);
        let extra: &[&str] = if cmd == "dynsys" { &["--horizon", "2", "--paths", "500"] } else { &[] };
        let o = bin().args([cmd, "--config", path.to_str().unwrap()]).args(extra).output().unwrap();
        assert!(o.status.success(), "{file}: {}", stderr(&o));
        let base: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        for (ptr, bad) in mutations {
            let mut v = base.clone();
            match v.pointer_mut(ptr) {
                Some(slot) => *slot = bad.clone(),
                None => v[ptr.trim_start_matches('/')] = bad.clone(),
            }
            let p = dir.path().join(file);
            std::fs::write(&p, v.to_string()).unwrap();
            let o = bin().args([cmd, "--config", p.to_str().unwrap()]).args(extra).output().unwrap();
            assert_eq!(o.status.code(), Some(2), "{file} {ptr}: {}", stderr(&o));
        }
    }
}
