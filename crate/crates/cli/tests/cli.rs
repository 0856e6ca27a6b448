use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_errasym"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn entries(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn generate_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "generate",
        "--oracle",
        "exp:a=1,norm",
        "--sigma",
        "0.1",
        "--n",
        "1000",
        "--seed",
        "7",
        "--out",
        "d.csv",
    ];
    let out = run(dir.path(), &args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("c,e"));
    assert_eq!(lines.count(), 1000);
    let sidecar = json(&dir.path().join("d.json"));
    assert_eq!(sidecar["config"]["seed"], 7);
    assert_eq!(sidecar["config"]["n"], 1000);

    let first = (
        fs::read(dir.path().join("d.csv")).unwrap(),
        fs::read(dir.path().join("d.json")).unwrap(),
    );
    assert_eq!(run(dir.path(), &args).status.code(), Some(0));
    let second = (
        fs::read(dir.path().join("d.csv")).unwrap(),
        fs::read(dir.path().join("d.json")).unwrap(),
    );
    assert_eq!(first, second);
}

#[test]
fn invalid_arguments_exit_2_without_output() {
    let cases: &[&[&str]] = &[
        &[
            "generate", "--oracle", "linear", "--sigma", "-1", "--out", "x.csv",
        ],
        &[
            "generate", "--oracle", "linear", "--n", "1", "--out", "x.csv",
        ],
        &["generate", "--oracle", "pow:a=-2", "--out", "x.csv"],
        &["generate", "--oracle", "nope", "--out", "x.csv"],
        &["theory", "--oracle", "exp:a=0", "--out", "x.json"],
        &[
            "bench",
            "known",
            "--oracles",
            "linear",
            "--sigmas",
            "0.1,-0.2",
            "--out",
            "x",
        ],
        &[
            "bench",
            "known",
            "--oracles",
            "linear",
            "--sigmas",
            "0.1",
            "--runs",
            "0",
            "--out",
            "x",
        ],
        &[
            "bench",
            "unknown",
            "--oracles",
            "linear",
            "--sigmas",
            "0.1",
            "--n",
            "-5",
            "--out",
            "x",
        ],
        &[
            "bench",
            "unknown",
            "--oracles",
            "linear",
            "--sigmas",
            "0.1",
            "--lambda",
            "-1",
            "--out",
            "x",
        ],
        &[
            "bench",
            "known",
            "--oracles",
            "linear",
            "--sigmas",
            "0.1",
            "--noise-policy",
            "bogus",
        ],
        &["bench", "known", "--oracles", "linear"],
        &["frobnicate"],
    ];
    for args in cases {
        let dir = tempfile::tempdir().unwrap();
        let out = run(dir.path(), args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stderr.is_empty(), "{args:?}");
        assert!(
            entries(dir.path()).is_empty(),
            "{args:?} left {:?}",
            entries(dir.path())
        );
    }
}

#[test]
fn runtime_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    fs::write(corpus.join("pair0001.txt"), "0.1 0.2\n0.3 0.4\n").unwrap();
    fs::write(dir.path().join("meta.txt"), "0001 one 1\n").unwrap();
    let out = run(
        dir.path(),
        &["bench", "pairs", "--dir", "corpus", "--meta", "meta.txt"],
    );
    assert_eq!(
        out.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(entries(dir.path()), ["corpus", "meta.txt"]);

    let out = run(
        dir.path(),
        &["bench", "pairs", "--dir", "missing", "--meta", "meta.txt"],
    );
    assert_eq!(out.status.code(), Some(2));

    let out = run(
        dir.path(),
        &["fit", "--data", "missing.csv", "--model", "linear"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_known_has_one_row_per_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "bench",
        "known",
        "--oracles",
        "linear,exp:a=5",
        "--sigmas",
        "0,0.1,0.5",
        "--runs",
        "100",
        "--seed",
        "1",
    ];
    let out = run(dir.path(), &args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(entries(dir.path()), ["known.csv", "known.json"]);
    let csv = fs::read_to_string(dir.path().join("known.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "id,sigma,b,rmse_causal,rmse_anticausal,gap,verdict"
    );
    assert_eq!(lines.len(), 7);
    let summary = json(&dir.path().join("known.json"));
    assert_eq!(summary["reports"].as_array().unwrap().len(), 6);
    assert_eq!(summary["config"]["runs"], 100);
    assert_eq!(summary["config"]["noise_policy"], "resample");
}

#[test]
fn bench_unknown_exp_prefers_causal() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "bench",
        "unknown",
        "--oracles",
        "exp:a=1",
        "--sigmas",
        "0.01",
        "--runs",
        "100",
        "--seed",
        "1",
    ];
    let out = run(dir.path(), &args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = json(&dir.path().join("unknown.json"));
    let r = &summary["reports"][0];
    assert!(r["rmse_causal_mean"].as_f64().unwrap() < r["rmse_anticausal_mean"].as_f64().unwrap());
    assert_eq!(r["verdict"], "causal_smaller");
}

fn theory(oracle: &str, sigma: &str) -> Value {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["theory", "--oracle", oracle, "--sigma", sigma],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn theory_reports() {
    let v = theory("linear,norm", "0.1");
    let r = &v["report"];
    assert!((r["anticausal_integral"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!((r["expected_causal_error"].as_f64().unwrap() - 0.01).abs() < 1e-12);
    assert!((r["expected_anticausal_error"].as_f64().unwrap() - 0.01).abs() < 1e-12);

    let v = theory("exp:a=1,norm", "0.1");
    assert!((v["report"]["anticausal_integral"].as_f64().unwrap() - 1.27646).abs() < 5e-6);

    let v = theory("pow:a=0.2,norm", "0.05");
    assert!(v["report"]["anticausal_integral"]
        .as_f64()
        .unwrap()
        .is_finite());
    assert!((v["report"]["anticausal_lower_bound"].as_f64().unwrap() - 0.0025).abs() < 1e-12);

    let v = theory("pow:a=2,norm", "0.05");
    assert!(v["report"].is_null());
    assert!(v["divergence"].is_string());
}

#[test]
fn fit_reports_power_law() {
    let dir = tempfile::tempdir().unwrap();
    let gen = [
        "generate", "--oracle", "pow:a=2", "--sigma", "0", "--n", "200", "--out", "d.csv",
    ];
    assert_eq!(run(dir.path(), &gen).status.code(), Some(0));
    let out = run(
        dir.path(),
        &["fit", "--data", "d.csv", "--model", "power", "--invert"],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let text = v.to_string();
    assert!(text.contains("power_law"), "{text}");
}
