use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use serde_json::Value;

fn fibdirac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fibdirac"))
        .args(args)
        .env_remove("FIBDIRAC_SEED")
        .env_remove("FIBDIRAC_CONFIG")
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    fibdirac(args).status.code().unwrap()
}

fn report(dir: &Path, check: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{check}.json"))).unwrap()).unwrap()
}

#[test]
fn configuration_errors_exit_two() {
    assert_eq!(code(&["verify", "no_such_check"]), 2);
    assert_eq!(code(&["verify", "symmetry", "--geometry", "klein_bottle"]), 2);
    assert_eq!(code(&["verify", "symmetry", "--resolution", "2"]), 2);
    assert_eq!(code(&["verify", "symmetry", "--resolution", "8", "--resolutions", "8,16"]), 2);
    assert_eq!(code(&["verify", "closure", "--geometry", "torus4"]), 2);
    assert_eq!(code(&["verify", "symmetry", "--format", "xml"]), 2);
    assert_eq!(code(&["verify", "symmetry", "--config", "/nonexistent/run.ini"]), 2);
    assert_eq!(code(&["checks", "describe", "nothing"]), 2);
    assert_eq!(code(&["--bogus"]), 2);
}

#[test]
fn pass_and_fail_codes() {
    assert_eq!(code(&["verify", "symmetry", "--geometry", "torus4", "--resolution", "4"]), 0);
    assert_eq!(code(&["verify", "symmetry", "--geometry", "torus4", "--resolution", "4", "--tolerance", "1e-30"]), 1);
}

#[test]
fn reports_are_written_and_echo_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = fibdirac(&["verify", "symmetry,ellipticity", "--geometry", "torus4", "--resolution", "4", "--seed", "11", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let rep = report(dir.path(), "symmetry");
    assert_eq!(rep["schema_version"], 1);
    assert_eq!(rep["seed"], 11);
    assert_eq!(rep["details"]["config"]["geometry"], "torus4");
    assert_eq!(rep["details"]["config"]["resolutions"][0], 4);
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("symmetry") && summary.contains("ellipticity"));
    assert_eq!(String::from_utf8_lossy(&o.stdout), summary);
}

#[test]
fn csv_reports_have_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["verify", "clifford", "--format", "csv", "--out", out];
    assert_eq!(code(&args), 0);
    let csv = fs::read_to_string(dir.path().join("clifford.csv")).unwrap();
    assert!(csv.starts_with("check,geometry,kind,key,value\n"));
    assert!(csv.contains("clifford,algebraic,verdict,all,pass"));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let args = [
            "verify",
            "factorization,commutator,symmetry",
            "--geometry",
            "kodaira_thurston",
            "--resolutions",
            "4,8",
            "--seed",
            "3",
            "--out",
            d.path().to_str().unwrap(),
        ];
        fibdirac(&args);
    }
    for check in ["factorization", "commutator", "symmetry"] {
        let x = fs::read(a.path().join(format!("{check}.json"))).unwrap();
        let y = fs::read(b.path().join(format!("{check}.json"))).unwrap();
        assert_eq!(x, y, "{check}");
    }
}

#[test]
fn file_then_env_then_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    fs::write(&cfg, "seed = 5\ngeometry = torus4\nresolution = 4\n\n[ellipticity]\nseed = 8\n").unwrap();
    let out = dir.path().join("out");
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_fibdirac"));
        c.args(["verify", "symmetry", "ellipticity", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        c.args(extra).env_remove("FIBDIRAC_SEED");
        if let Some(s) = env {
            c.env("FIBDIRAC_SEED", s);
        }
        assert!(c.output().unwrap().status.success());
        (report(&out, "symmetry")["seed"].clone(), report(&out, "ellipticity")["seed"].clone())
    };
    assert_eq!(run(None, &[]), (5.into(), 8.into()));
    assert_eq!(run(Some("6"), &[]), (6.into(), 6.into()));
    assert_eq!(run(Some("6"), &["--seed", "7"]), (7.into(), 7.into()));
}

#[test]
fn listing_commands() {
    let o = fibdirac(&["models", "list"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains("kodaira_thurston") && text.contains("Ω≠0: yes"));
    let o = fibdirac(&["checks", "list"]);
    assert!(String::from_utf8(o.stdout).unwrap().lines().count() >= 9);
    let o = fibdirac(&["checks", "describe", "factorization"]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("(D_M)₀ − (i/8) c(Ω)"));
}

#[test]
fn tensor_export_has_cotangent_column() {
    let o = fibdirac(&["tensors", "--geometry", "punctured_sphere", "--resolution", "64", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let (t, k) = (header.iter().position(|c| *c == "theta").unwrap(), header.iter().position(|c| *c == "k_1").unwrap());
    let mut rows = 0;
    for l in lines {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        let theta: f64 = v[t];
        assert!((v[k] - theta.cos() / theta.sin()).abs() <= 1e-12 * (1.0 + v[k].abs()));
        rows += 1;
    }
    assert_eq!(rows, 64 * 64);
    let o = fibdirac(&["tensors", "--geometry", "torus4", "--resolution", "4", "--format", "json"]);
    let table: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(table["rows"].as_array().unwrap().len(), 256);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn exit_code_follows_config(exp in -30i32..-6, bad_key in any::<bool>()) {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.ini");
        let mut body = format!("tolerance = 1e{exp}\n");
        if bad_key {
            body.push_str("colour = blue\n");
        }
        fs::write(&cfg, body).unwrap();
        let got = code(&["verify", "clifford", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        let want = if bad_key { 2 } else if exp >= -15 { 0 } else { 1 };
        prop_assert_eq!(got, want);
    }
}
