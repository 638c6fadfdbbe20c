//! End-to-end tests of the `ltlab` binary: config parsing, exit codes,
//! reproducibility, and the run ledger.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ltlab"))
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run_config(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SIMULATE_BM: &str = r#"
experiment = "simulate"
master_seed = 7
replicas = 2

[process]
class = "fbm"
hurst = 0.5
dim = 1

[grid]
t_end = 1.0
n_steps = 4096
"#;

#[test]
fn simulate_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "sim.toml", SIMULATE_BM);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_config(&cfg, &a, &[]).status.success());
    assert!(run_config(&cfg, &b, &[]).status.success());
    for name in ["paths.csv", "simulate-summary.json"] {
        let left = fs::read(a.join(name)).unwrap();
        let right = fs::read(b.join(name)).unwrap();
        assert_eq!(left, right, "{name} differs between identical runs");
    }
    // a second run in the same directory must append a record, not mutate
    assert!(run_config(&cfg, &a, &[]).status.success());
    let records = fs::read_dir(&a)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("run-")
        })
        .count();
    assert_eq!(records, 2, "each invocation appends one run record");
}

#[test]
fn json_and_toml_configs_hash_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let toml_cfg = write(tmp.path(), "sim.toml", SIMULATE_BM);
    let json_cfg = write(
        tmp.path(),
        "sim.json",
        r#"{
  "experiment": "simulate",
  "master_seed": 7,
  "replicas": 2,
  "process": {"class": "fbm", "hurst": 0.5, "dim": 1},
  "grid": {"t_end": 1.0, "n_steps": 4096}
}"#,
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_config(&toml_cfg, &a, &[]).status.success());
    assert!(run_config(&json_cfg, &b, &[]).status.success());
    assert_eq!(
        fs::read(a.join("paths.csv")).unwrap(),
        fs::read(b.join("paths.csv")).unwrap(),
        "equivalent TOML and JSON configs must produce identical bytes"
    );
}

#[test]
fn thread_count_never_changes_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "scal.toml",
        r#"
experiment = "scaling"
master_seed = 9
replicas = 12

[process]
class = "fbm"
hurst = 0.5
dim = 1

[grid]
t_end = 1.0
n_steps = 4096
"#,
    );
    let (a, b) = (tmp.path().join("t1"), tmp.path().join("t3"));
    assert!(run_config(&cfg, &a, &["--threads", "1"]).status.success());
    assert!(run_config(&cfg, &b, &["--threads", "3"]).status.success());
    for name in ["scaling.csv", "scaling.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name} depends on the thread count"
        );
    }
}

#[test]
fn supercritical_scaling_config_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.toml",
        r#"
experiment = "scaling"
master_seed = 3

[process]
class = "fbm"
hurst = 0.6
dim = 2

[grid]
t_end = 1.0
n_steps = 4096
"#,
    );
    let out = run_config(&cfg, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1), "regime violation is a config error");
    let err = stderr_of(&out);
    assert!(
        err.contains("alpha in (0, 1/d)"),
        "rejection must cite the admissible exponent range, got: {err}"
    );
    assert!(
        !tmp.path().join("out").exists(),
        "rejected configs must not produce output"
    );
}

#[test]
fn unknown_keys_are_rejected_with_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let top = write(
        tmp.path(),
        "top.toml",
        "experiment = \"analytics\"\nmaster_seed = 1\nbogus = 2\n",
    );
    let out = run_config(&top, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("bogus"));

    // keys hidden inside the flattened process payload are caught too
    let nested = write(
        tmp.path(),
        "nested.toml",
        r#"
experiment = "simulate"
master_seed = 1

[process]
class = "fbm"
hurst = 0.5
hursts = 0.7
dim = 1

[grid]
t_end = 1.0
n_steps = 64
"#,
    );
    let out = run_config(&nested, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr_of(&out).contains("process.hursts"),
        "nested unknown keys get a dotted path: {}",
        stderr_of(&out)
    );
}

#[test]
fn missing_required_section_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "nogrid.toml",
        r#"
experiment = "simulate"
master_seed = 1

[process]
class = "fbm"
hurst = 0.5
dim = 1
"#,
    );
    let out = run_config(&cfg, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("grid"));
}

#[test]
fn analytics_run_passes_oracle_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "ana.toml",
        r#"
experiment = "analytics"
master_seed = 21

[params]
k_max = 12
beta_draws = 40
simplex_n = 3
mc_samples = 40000
gamma_n_max = 50
"#,
    );
    let out_dir = tmp.path().join("out");
    let out = run_config(&cfg, &out_dir, &[]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("analytics.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["recursion"]["matches_oracle"], true);
    assert_eq!(report["report"]["recursion"]["growth_bound_holds"], true);
    assert!(report["config_hash"].as_str().unwrap().len() == 64);
    assert!(report["claims"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c == "recursion"));
    // the CSV table embeds the same hash in its comment header
    let csv = fs::read_to_string(out_dir.join("alpha-table.csv")).unwrap();
    assert!(csv.starts_with(&format!(
        "# config_hash: {}",
        report["config_hash"].as_str().unwrap()
    )));
}

#[test]
fn seed_flag_overrides_config_and_changes_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "sim.toml", SIMULATE_BM);
    let out_dir = tmp.path().join("out");
    assert!(run_config(&cfg, &out_dir, &[]).status.success());
    assert!(run_config(&cfg, &out_dir, &["--seed", "8"]).status.success());
    let listed = bin()
        .arg("list-runs")
        .arg("--dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(listed.status.success());
    let text = String::from_utf8_lossy(&listed.stdout).into_owned();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].contains("seed 7"));
    assert!(lines[1].contains("seed 8"));
    // line layout: started  experiment  [pass]  seed  N  hash  summary...
    let hash = |line: &str| {
        line.split_whitespace()
            .nth(5)
            .map(str::to_string)
            .unwrap_or_default()
    };
    assert_ne!(hash(lines[0]), hash(lines[1]), "seed must enter the config hash");
}

#[test]
fn failed_verdict_exits_two_and_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    // alpha d = 0.99 < 1 predicts convergence, but the shell ratios sit at
    // 2^(1 - 1/0.99) ~ 0.993, inside the inconclusive band: the run
    // completes and the verdict check fails.
    let cfg = write(
        tmp.path(),
        "ber.toml",
        r#"
experiment = "berman"
master_seed = 2

[process]
class = "fbm"
hurst = 0.99
dim = 1

[grid]
t_end = 1.0
n_steps = 128

[params]
n_shells = 8
"#,
    );
    let out_dir = tmp.path().join("out");
    let out = run_config(&cfg, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(2), "failed verdict is exit 2");
    let listed = bin()
        .arg("list-runs")
        .arg("--dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&listed.stdout).into_owned();
    assert!(text.contains("[FAIL]"), "failure lands in the ledger: {text}");
}

#[test]
fn list_runs_handles_empty_and_corrupted() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = bin().arg("list-runs").arg("--dir").arg(&empty).output().unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty(), "empty directory lists nothing");

    let cfg = write(tmp.path(), "ana.toml", "experiment = \"analytics\"\nmaster_seed = 1\n[params]\nk_max = 6\ngamma_n_max = 20\nbeta_draws = 10\nsimplex_n = 2\nmc_samples = 20000\n");
    let out_dir = tmp.path().join("out");
    assert!(run_config(&cfg, &out_dir, &[]).status.success());
    fs::write(out_dir.join("run-00000000T000000000Z-dead.json"), "not json").unwrap();
    let out = bin()
        .arg("list-runs")
        .arg("--dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "one bad record must not break the listing");
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert_eq!(text.lines().count(), 1, "intact records still listed");
    assert!(stderr_of(&out).contains("corrupted run record"));
}
