use std::path::Path;
use std::process::{Command, Output};

fn voa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voa"))
        .args(args)
        .env_remove("VOA_OUTPUT_DIR")
        .env_remove("VOA_JOBS")
        .output()
        .unwrap()
}

const SMALL: &str = r#"
schema = "voa-suite/1"

[models.h]
kind = "heisenberg"
truncation = 6

[[checks]]
kind = "axioms"
model = "h"
tuples = 40

[[checks]]
kind = "unitarity"
model = "h"

[[checks]]
kind = "norm_table"
model = "h"
state = "a0"
m_max = 2
n_max = 4
"#;

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("suite.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn small_suite_exits_zero_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = voa(&["suite", "--config", &config, "--output-dir", out.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("report.json").exists());
    assert!(out.join("summary.csv").exists());
    assert!(out.join("norm_table_002.csv").exists());

    let again = dir.path().join("again");
    let o = voa(&[
        "export",
        out.join("report.json").to_str().unwrap(),
        "--format",
        "json",
        "--output-dir",
        again.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(out.join("report.json")).unwrap(), std::fs::read(again.join("report.json")).unwrap());
}

#[test]
fn mutated_model_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL.replace(
        "truncation = 6\n",
        "truncation = 6\n\n[[models.h.mutations]]\ngenerator = 0\nmode = -1\nsource = 0\ntarget = 1\ndelta = \"1/3\"\n",
    );
    let config = write_config(dir.path(), &body);
    let o = voa(&["suite", "--config", &config, "--output-dir", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn invalid_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let config = write_config(dir.path(), "schema = \"voa-suite/1\"\nunknown = 3\n");
    assert_eq!(voa(&["suite", "--config", &config, "--output-dir", out]).status.code(), Some(2));

    let config = write_config(dir.path(), &SMALL.replace("model = \"h\"\nstate", "model = \"missing\"\nstate"));
    assert_eq!(voa(&["suite", "--config", &config, "--output-dir", out]).status.code(), Some(2));

    assert_eq!(voa(&["certify", "primary-bound", "--kind", "heisenberg", "-N", "6"]).status.code(), Some(2));
}

#[test]
fn norms_prints_ladder_values() {
    let o = voa(&["norms", "--kind", "heisenberg", "-N", "5", "--state", "a0", "--m-max", "1", "--n-max", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let row = text.lines().find(|l| l.starts_with("1,3,")).unwrap();
    let norm: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert!((norm - 3f64.sqrt()).abs() < 1e-9);
}

#[test]
fn build_uses_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap();
    let args = ["build", "--kind", "lattice", "-N", "5", "--cache-dir", cache];
    let first = String::from_utf8(voa(&args).stdout).unwrap();
    let second = String::from_utf8(voa(&args).stdout).unwrap();
    assert!(first.contains("stored"));
    assert!(second.contains("hit"));
}
