//! End-to-end CLI behavior: exit codes, gating, override handling and
//! artifact layout.

use std::path::{Path, PathBuf};
use std::process::Command;

fn subflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_subflow"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("subflow-test-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn analyze_reports_even_when_hypotheses_fail() {
    let dir = tmp_dir("fib-analyze");
    let out = dir.join("out");
    let cfg = write_config(
        &dir,
        "fib.json",
        &format!(
            r#"{{"substitution": "1->12; 2->1", "output_dir": "{}"}}"#,
            out.display()
        ),
    );
    let status = subflow()
        .args(["analyze", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["second_eigenvalue_expanding"], false);
    assert_eq!(report["all_hypotheses_hold"], false);
}

#[test]
fn spectrum_rejects_fibonacci_with_exit_2() {
    let dir = tmp_dir("fib-spectrum");
    let cfg = write_config(
        &dir,
        "fib.json",
        &format!(
            r#"{{"substitution": "1->12; 2->1", "output_dir": "{}"}}"#,
            dir.join("out").display()
        ),
    );
    let output = subflow()
        .args(["spectrum", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    // Failure leaves no partial artifacts behind.
    assert!(!dir.join("out").join("mass.csv").exists());
}

#[test]
fn config_errors_exit_4() {
    let dir = tmp_dir("config-errors");
    let cfg = write_config(
        &dir,
        "zs.json",
        &format!(
            r#"{{"substitution": "a->abbb; b->a", "output_dir": "{}"}}"#,
            dir.join("out").display()
        ),
    );
    let path = cfg.to_str().unwrap();
    // Unknown command.
    let output = subflow().args(["frobnicate", "--config", path]).output().unwrap();
    assert_eq!(output.status.code(), Some(4));
    // Simplex violation.
    let output = subflow()
        .args([
            "analyze",
            "--config",
            path,
            r#"--roof={"mode":"explicit","s":[0.5,0.6]}"#,
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&output.stderr).contains("SchemaError"));
    // c1 out of range.
    let output = subflow()
        .args(["analyze", "--config", path, "--constants.c1=1.5"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
    // Missing config flag.
    let output = subflow().args(["analyze"]).output().unwrap();
    assert_eq!(output.status.code(), Some(4));
    // Malformed JSON reports the line.
    let bad = write_config(&dir, "bad.json", "{\n  \"substitution\": oops\n}");
    let output = subflow()
        .args(["analyze", "--config", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&output.stderr).contains("line"));
}

#[test]
fn minimal_config_uses_defaults_and_command_from_cli() {
    let dir = tmp_dir("minimal");
    let out = dir.join("out");
    let cfg = write_config(
        &dir,
        "min.json",
        &format!(
            r#"{{"substitution": "a->abbb; b->a", "output_dir": "{}"}}"#,
            out.display()
        ),
    );
    let output = subflow()
        .args(["analyze", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let resolved: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out.join("resolved_config.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(resolved["roof"]["mode"], "perron");
    assert_eq!(resolved["seeds"]["master"], 0);
    assert_eq!(resolved["command"], "analyze");
}

#[test]
fn return_word_artifact() {
    let dir = tmp_dir("rw");
    let out = dir.join("out");
    let cfg = write_config(
        &dir,
        "zs.json",
        &format!(
            r#"{{"substitution": "a->abbb; b->a", "output_dir": "{}"}}"#,
            out.display()
        ),
    );
    let output = subflow()
        .args(["return-word", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("return_word.json")).unwrap())
            .unwrap();
    assert_eq!(doc["v"], "a");
    assert_eq!(doc["c"], "a");
    assert_eq!(doc["ell"], 3);
}

#[test]
fn csv_artifacts_carry_header_and_hash_trailer() {
    let dir = tmp_dir("csvshape");
    let out = dir.join("out");
    let cfg = write_config(
        &dir,
        "zs.json",
        &format!(
            r#"{{"substitution": "a->abbb; b->a", "output_dir": "{}"}}"#,
            out.display()
        ),
    );
    let output = subflow()
        .args(["analyze", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let text = std::fs::read_to_string(out.join("eigen.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "j,re,im,abs");
    assert!(lines.last().unwrap().starts_with("# config-hash: "));
}

#[test]
fn certify_zeta_star_with_defaults() {
    let dir = tmp_dir("certify-defaults");
    let out = dir.join("out");
    let cfg = write_config(
        &dir,
        "zs.json",
        &format!(
            r#"{{"substitution": "a->abbb; b->a", "output_dir": "{}"}}"#,
            out.display()
        ),
    );
    let output = subflow()
        .args(["certify", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(
        output.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    for artifact in [
        "resolved_config.json",
        "report.json",
        "eigen.csv",
        "mass.csv",
        "sup.csv",
        "certificate.json",
        "budget.json",
        "certify.json",
    ] {
        assert!(out.join(artifact).exists(), "missing {artifact}");
    }
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("certificate.json")).unwrap())
            .unwrap();
    assert!(cert["gamma"].as_f64().unwrap() > 0.0);
}
