use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn doeblin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_doeblin")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(kind: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![kind, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    doeblin(&args)
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

const REFERENCE: &str = r#"{"kernels": [[[0.9, 0.1], [0.2, 0.8]]]}"#;

#[test]
fn analyze_kernel_reports_certificate() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "k.json", r#"{"kind": "analyze-kernel", "kernel": [[0.9, 0.1], [0.2, 0.8]]}"#);
    let out = dir.path().join("out");
    let o = run("analyze-kernel", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("analysis.json")).unwrap()).unwrap();
    assert!((v["gamma"].as_f64().unwrap() - 0.3).abs() < 1e-12);
    for key in ["minorizer", "stationary"] {
        let m = v[key].as_array().unwrap();
        assert!((m[0].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((m[1].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["files"][0]["name"], "analysis.json");
}

#[test]
fn kernel_from_csv_file() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "k.csv", "# reference kernel\n0.9,0.1\n0.2,0.8\n");
    let cfg = write(dir.path(), "k.json", r#"{"kind": "analyze-kernel", "kernel": {"file": "k.csv"}}"#);
    let o = run("analyze-kernel", &cfg, &dir.path().join("out"), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn malformed_config_exits_2_with_field() {
    let dir = TempDir::new().unwrap();
    let text = format!(r#"{{"kind": "clt-rate", "chain": {REFERENCE}, "observable": {{"values": [[1, 0]]}}, "paths": 100}}"#);
    let cfg = write(dir.path(), "c.json", &text);
    let o = run("clt-rate", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("horizons"));

    let cfg = write(dir.path(), "k.json", r#"{"kind": "analyze-kernel", "kernel": [[0.9, 0.1], [0.2, 0.8]]}"#);
    let o = run("ledger", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn math_and_io_failures_have_distinct_codes() {
    let dir = TempDir::new().unwrap();
    let text = format!(r#"{{"kind": "clt-rate", "chain": {REFERENCE}, "observable": {{"values": [[1, 1]]}}, "horizons": [4, 8], "paths": 10}}"#);
    let cfg = write(dir.path(), "c.json", &text);
    assert_eq!(run("clt-rate", &cfg, &dir.path().join("out"), &[]).status.code(), Some(3));

    let blocker = write(dir.path(), "blocker", "");
    let cfg = write(dir.path(), "k.json", r#"{"kind": "analyze-kernel", "kernel": [[1.0]]}"#);
    assert_eq!(run("analyze-kernel", &cfg, &blocker.join("sub"), &[]).status.code(), Some(4));
    assert_eq!(run("analyze-kernel", &dir.path().join("missing.json"), &dir.path().join("o"), &[]).status.code(), Some(4));
}

#[test]
fn verify_reports_issues() {
    let dir = TempDir::new().unwrap();
    let good = write(dir.path(), "g.json", &format!(r#"{{"kind": "ledger", "chain": {REFERENCE}, "target": 0, "max_length": 5}}"#));
    let o = doeblin(&["verify", "--config", good.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["issues"].as_array().unwrap().is_empty());

    let bad = write(
        dir.path(),
        "b.json",
        r#"{"kind": "ledger", "chain": {"kernels": [[[0.5, 0.5], [0.5, 0.5]], [[1.0], [1.0], [1.0]]], "periodic": false}, "target": 1, "max_length": 1}"#,
    );
    let o = doeblin(&["verify", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["issues"][0]["path"], "chain.kernels[1]");

    let tele = write(
        dir.path(),
        "t.json",
        &format!(r#"{{"kind": "clt-rate", "chain": {REFERENCE}, "observable": {{"telescoping": [[1, -1]]}}, "horizons": [8, 16], "paths": 10}}"#),
    );
    let o = doeblin(&["verify", "--config", tele.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["issues"][0]["severity"], "warning");
    assert!(v["issues"][0]["message"].as_str().unwrap().contains("degenerate"));
}

#[test]
fn runs_are_byte_identical_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let clt = write(
        dir.path(),
        "clt.json",
        &format!(
            r#"{{"kind": "clt-rate", "chain": {REFERENCE}, "observable": {{"values": [[1, 0]]}}, "horizons": [16, 32, 64, 128],
                "paths": 5000, "seed": 7, "weighted_s": [1, 2], "mdp": {{"rho": 0.25, "lower": 1.0}}}}"#
        ),
    );
    let env = r#""environment": {"alphabet": ["g", "b"], "base": {"iid": [0.5, 0.5]}},
        "assignment": {"kernels": {"g": [[0.9, 0.1], [0.2, 0.8]], "b": [[1, 0], [0, 1]]}, "observables": {"g": [1, 0], "b": [1, 0]}},
        "good_set": {"delta": 0.3, "m": 1, "good_symbols": ["g"]},
        "ensemble": {"size": 40, "horizon": 64, "past": 256}"#;
    let random = write(
        dir.path(),
        "re.json",
        &format!(r#"{{"kind": "random-env", {env}, "regime": {{"stretched": 0.5}}, "seed": 3, "clt": {{"environments": 2, "horizons": [8, 16, 32], "paths": 2000}}}}"#),
    );
    let mixing = write(
        dir.path(),
        "mt.json",
        &format!(r#"{{"kind": "mixing-times", {env}, "regime": {{"stretched": 0.5}}, "seed": 3, "epsilons": [0.1, 0.05]}}"#),
    );
    let skew = write(
        dir.path(),
        "sk.json",
        &format!(r#"{{"kind": "skew-corr", {env}, "seed": 3, "f": {{"g": [1, 0], "b": [1, 0]}}, "g": {{"g": [1, 0], "b": [1, 0]}}, "max_lag": 16}}"#),
    );
    for (kind, cfg) in [("clt-rate", &clt), ("random-env", &random), ("mixing-times", &mixing), ("skew-corr", &skew)] {
        let a = dir.path().join(format!("{kind}-a"));
        let b = dir.path().join(format!("{kind}-b"));
        let c = dir.path().join(format!("{kind}-c"));
        for (out, threads) in [(&a, "1"), (&b, "3"), (&c, "1")] {
            let o = run(kind, cfg, out, &["--threads", threads]);
            assert!(o.status.success(), "{kind}: {}", String::from_utf8_lossy(&o.stderr));
        }
        let fa = files(&a);
        assert!(fa.len() >= 2);
        assert_eq!(fa, files(&b), "{kind}");
        assert_eq!(fa, files(&c), "{kind}");
    }
    let other = dir.path().join("clt-seed");
    assert!(run("clt-rate", &clt, &other, &["--seed", "8"]).status.success());
    assert_ne!(std::fs::read(other.join("distances.csv")).unwrap(), std::fs::read(dir.path().join("clt-rate-a/distances.csv")).unwrap());
}

#[test]
fn csv_outputs_document_their_columns() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "l.json", &format!(r#"{{"kind": "ledger", "chain": {REFERENCE}, "target": 0, "max_length": 5}}"#));
    let out = dir.path().join("out");
    assert!(run("ledger", &cfg, &out, &[]).status.success());
    let text = std::fs::read_to_string(out.join("ledger.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with('#'));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "n,bound,log_bound,accumulated_mass,consistency_residual,tv_to_limit");
    let row5: Vec<&str> = text.lines().last().unwrap().split(',').collect();
    assert_eq!(row5[0], "5");
    assert!((row5[1].parse::<f64>().unwrap() - 0.7f64.powi(5)).abs() < 1e-12);
    assert!((row5[5].parse::<f64>().unwrap() - 2.0 / 3.0 * 0.7f64.powi(5)).abs() < 1e-10);

    let cfg = write(
        dir.path(),
        "d.json",
        &format!(r#"{{"kind": "decompose", "chain": {REFERENCE}, "observable": {{"values": [[1, 0]]}}, "first": 1, "last": 3, "variance_horizon": 200}}"#),
    );
    let out = dir.path().join("dec");
    assert!(run("decompose", &cfg, &out, &[]).status.success());
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["variance_class"], "growing");
    assert!((summary["asymptotic_slope"].as_f64().unwrap() - 34.0 / 27.0).abs() < 1e-6);
    let h = std::fs::read_to_string(out.join("h.csv")).unwrap();
    let first: Vec<&str> = h.lines().find(|l| l.starts_with("0,0,")).unwrap().split(',').collect();
    assert!((first[2].parse::<f64>().unwrap() - 7.0 / 9.0).abs() < 1e-8);
}
