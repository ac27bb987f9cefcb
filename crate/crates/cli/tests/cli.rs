use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use spectral_trickle::complex::{is_connected, quarantine_predicate};
use spectral_trickle::trickle::path_complex_certify;
use spectral_trickle::SpinSystem;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spectral-trickle"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn gen(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut full = vec!["gen"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["-o", path.to_str().unwrap()]);
    let out = run(&full);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn report(dir: &Path, stem: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.report.json"))).unwrap()).unwrap()
}

const PRODUCT: &str = r#"{
  "sites": [{"name": "a", "spins": ["0", "1"]}, {"name": "b", "spins": ["0", "1"]}, {"name": "c", "spins": ["0", "1"]}],
  "facets": [
    {"assignment": {"a": "0", "b": "0", "c": "0"}, "weight": 0.048},
    {"assignment": {"a": "0", "b": "0", "c": "1"}, "weight": 0.072},
    {"assignment": {"a": "0", "b": "1", "c": "0"}, "weight": 0.032},
    {"assignment": {"a": "0", "b": "1", "c": "1"}, "weight": 0.048},
    {"assignment": {"a": "1", "b": "0", "c": "0"}, "weight": 0.192},
    {"assignment": {"a": "1", "b": "0", "c": "1"}, "weight": 0.288},
    {"assignment": {"a": "1", "b": "1", "c": "0"}, "weight": 0.128},
    {"assignment": {"a": "1", "b": "1", "c": "1"}, "weight": 0.192}
  ]
}"#;

fn product(dir: &Path) -> PathBuf {
    let p = dir.join("product.json");
    fs::write(&p, PRODUCT).unwrap();
    p
}

#[test]
fn gen_random_is_loadable_connected_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let p = gen(dir.path(), "r.json", &["random", "--d", "3", "--spins", "3", "--seed", "1"]);
    let text = fs::read_to_string(&p).unwrap();
    let sys = SpinSystem::from_json(&text).unwrap();
    assert!(is_connected(&sys).connected);
    let again = sys.to_document().to_json_pretty() + "\n";
    assert_eq!(again, text);
    let reloaded = SpinSystem::from_json(&again).unwrap();
    assert_eq!(reloaded.weights(), sys.weights());
    assert_eq!(reloaded.facets(), sys.facets());
}

#[test]
fn gen_quarantine_respects_constraints() {
    let dir = TempDir::new().unwrap();
    let p = gen(dir.path(), "q.json", &["quarantine", "--graph", "cycle", "--n", "4", "--q", "5"]);
    let sys = SpinSystem::from_json(&fs::read_to_string(p).unwrap()).unwrap();
    assert!(sys.num_facets() > 0);
    for f in sys.facets() {
        for i in 0..4 {
            let j = (i + 1) % 4;
            assert!(quarantine_predicate(f[i], f[j]) && quarantine_predicate(f[j], f[i]));
        }
    }
}

#[test]
fn gen_path_meets_path_preconditions() {
    let dir = TempDir::new().unwrap();
    let p = gen(dir.path(), "p.json", &["path", "--d", "4"]);
    let sys = SpinSystem::from_json(&fs::read_to_string(p).unwrap()).unwrap();
    let r = path_complex_certify(&sys, &[0, 1, 2, 3]).unwrap();
    assert!(r.top_link_ok && r.sums_ok);
}

#[test]
fn gen_rejects_bad_parameters() {
    let out = run(&["gen", "random", "--density", "0"]);
    assert_eq!(code(&out), 1);
    let out = run(&["gen", "quarantine", "--q", "1"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn analyze_product_has_zero_influence() {
    let dir = TempDir::new().unwrap();
    let p = product(dir.path());
    let out = run(&["analyze", p.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "product");
    for row in r["influence"]["i"].as_array().unwrap() {
        for x in row.as_array().unwrap() {
            assert!(x.as_f64().unwrap().abs() < 1e-12);
        }
    }
    assert!(dir.path().join("product.certificates.csv").exists());
    assert_eq!(r["tolerances"]["certificate"].as_f64(), Some(1e-9));
}

#[test]
fn analyze_quarantine_shows_small_spectral_influence() {
    let dir = TempDir::new().unwrap();
    let p = gen(dir.path(), "q.json", &["quarantine", "--graph", "matching", "--n", "1", "--q", "16"]);
    let out = run(&["analyze", p.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "q");
    let inf = &r["influence"];
    assert!(inf["lambda_max_ci"].as_f64().unwrap() <= 0.5);
    assert!(inf["max_influence"].as_f64().unwrap() >= 1.0 - 4.0 / 16.0);
    assert!(inf["rho_i"].as_f64().unwrap() >= 0.75);
}

#[test]
fn corrupted_input_exits_one() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("bad.json");
    fs::write(&p, r#"{"sites": [{"name": "a", "spins": []}], "facets": []}"#).unwrap();
    let out = run(&["analyze", p.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let out = run(&["analyze", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn certify_path_fixture_with_path_walk() {
    let dir = TempDir::new().unwrap();
    let p = gen(dir.path(), "p.json", &["path", "--d", "5", "--seed", "3"]);
    let out = run(&["certify", p.to_str().unwrap(), "--walk", "path", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("p.certificates.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("face,codim,bound_M,bound_distinct,bound_main,actual,hypothesis_ok,pass")
    );
    let mut rows = 0;
    for line in lines {
        // faces are quoted because labels contain commas
        let tail: Vec<&str> = line.rsplitn(7, ',').collect();
        let bound_m: f64 = tail[5].parse().unwrap();
        let actual: f64 = tail[2].parse().unwrap();
        assert!(bound_m <= 0.5 + 1e-9);
        assert!(actual <= 0.5 + 1e-9);
        assert_eq!(tail[0], "pass");
        rows += 1;
    }
    assert!(rows > 0);
}

#[test]
fn certify_auto_passes_on_random_fixture() {
    let dir = TempDir::new().unwrap();
    let p = gen(dir.path(), "r.json", &["random", "--d", "3", "--spins", "3", "--seed", "1"]);
    let out = run(&["certify", p.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "r");
    let certs = r["certificates"].as_array().unwrap();
    assert!(!certs.is_empty());
    assert!(certs.iter().all(|c| c["verdict"] == "pass" && c["hypothesis_ok"] == true));
    assert_eq!(r["walk"]["kind"], "auto");
}

#[test]
fn certify_codim_filter() {
    let dir = TempDir::new().unwrap();
    let p = gen(dir.path(), "p.json", &["path", "--d", "4"]);
    let out = run(&[
        "certify",
        p.to_str().unwrap(),
        "--walk",
        "path",
        "--codim",
        "3",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let r = report(dir.path(), "p");
    assert!(r["certificates"].as_array().unwrap().iter().all(|c| c["codim"] == 3));
    let out = run(&["certify", p.to_str().unwrap(), "--codim", "9", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn certify_walk_file() {
    let dir = TempDir::new().unwrap();
    let p = gen(dir.path(), "p.json", &["path", "--d", "3"]);
    let good = r#"{"boundary": ["start", "end"], "edges": [
        {"from": "s0", "to": "start", "p": 0.5}, {"from": "s0", "to": "s1", "p": 0.5},
        {"from": "s1", "to": "s0", "p": 0.5}, {"from": "s1", "to": "s2", "p": 0.5},
        {"from": "s2", "to": "s1", "p": 0.5}, {"from": "s2", "to": "end", "p": 0.5}]}"#;
    let w = dir.path().join("walk.json");
    fs::write(&w, good).unwrap();
    let args = |w: &Path| {
        vec![
            "certify".to_string(),
            p.to_str().unwrap().into(),
            "--walk".into(),
            "file".into(),
            "--walk-file".into(),
            w.to_str().unwrap().into(),
            "--out-dir".into(),
            dir.path().to_str().unwrap().into(),
        ]
    };
    let out = bin().args(args(&w)).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(dir.path(), "p")["walk"]["kind"], "file");

    let bad = good.replace(r#""to": "start", "p": 0.5"#, r#""to": "start", "p": 0.7"#);
    fs::write(&w, bad).unwrap();
    let out = bin().args(args(&w)).output().unwrap();
    assert_eq!(code(&out), 1);

    // no walk anywhere
    let out = run(&["certify", p.to_str().unwrap(), "--walk", "file", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn bound_violation_exits_two() {
    let dir = TempDir::new().unwrap();
    let p = gen(dir.path(), "p.json", &["path", "--d", "3"]);
    let out = run(&[
        "certify",
        p.to_str().unwrap(),
        "--walk",
        "path",
        "--tol=-10",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let csv = fs::read_to_string(dir.path().join("p.certificates.csv")).unwrap();
    assert!(csv.contains(",fail"));
}

#[test]
fn sample_zero_steps_echoes_start() {
    let dir = TempDir::new().unwrap();
    let p = product(dir.path());
    let out = run(&[
        "sample",
        p.to_str().unwrap(),
        "--steps",
        "0",
        "--start",
        "5",
        "--chains",
        "2",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let r = report(dir.path(), "product");
    for run in r["sample"]["runs"].as_array().unwrap() {
        assert_eq!(run["start"], 5);
        assert_eq!(run["final_state"], 5);
    }
}

#[test]
fn sample_product_marginals_within_bands() {
    let dir = TempDir::new().unwrap();
    let p = product(dir.path());
    let out = run(&["sample", p.to_str().unwrap(), "--steps", "100000", "--seed", "11", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let r = report(dir.path(), "product");
    let exact = &r["sample"]["exact_marginals"];
    let run = &r["sample"]["runs"][0];
    for v in 0..3 {
        for s in 0..2 {
            let m = run["marginals"][v][s].as_f64().unwrap();
            let se = run["standard_errors"][v][s].as_f64().unwrap();
            let e = exact[v][s].as_f64().unwrap();
            assert!((m - e).abs() <= 3.0 * se, "site {v} spin {s}: {m} vs {e} (se {se})");
        }
    }
}

#[test]
fn sample_chains_are_distinct_and_deterministic() {
    let dir = TempDir::new().unwrap();
    let p = gen(dir.path(), "r.json", &["random", "--d", "3", "--spins", "3", "--seed", "2"]);
    let go = |name: &str| {
        let out = run(&[
            "sample",
            p.to_str().unwrap(),
            "--steps",
            "2000",
            "--chains",
            "8",
            "--seed",
            "100",
            "--name",
            name,
            "--out-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
        fs::read_to_string(dir.path().join(format!("{name}.report.json"))).unwrap()
    };
    let a = go("a");
    assert_eq!(a, go("b"));
    let r: Value = serde_json::from_str(&a).unwrap();
    let runs = r["sample"]["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 8);
    let seeds: std::collections::BTreeSet<u64> = runs.iter().map(|x| x["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds.len(), 8);
    let traces: std::collections::BTreeSet<String> = runs.iter().map(|x| x["marginals"].to_string()).collect();
    assert_eq!(traces.len(), 8);
}

#[test]
fn reports_are_byte_stable_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let p = gen(dir.path(), "r.json", &["random", "--d", "3", "--spins", "2", "--seed", "4"]);
    let mut texts = Vec::new();
    for threads in ["1", "4"] {
        let out = bin()
            .env("SPECTRAL_TRICKLE_THREADS", threads)
            .args(["analyze", p.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()])
            .output()
            .unwrap();
        assert_eq!(code(&out), 0);
        texts.push((
            fs::read_to_string(dir.path().join("r.report.json")).unwrap(),
            fs::read_to_string(dir.path().join("r.certificates.csv")).unwrap(),
        ));
    }
    assert_eq!(texts[0], texts[1]);
    let out = bin().env("SPECTRAL_TRICKLE_THREADS", "many").args(["gen", "random"]).output().unwrap();
    assert_eq!(code(&out), 1);
}
