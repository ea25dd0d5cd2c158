use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rwre(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rwre"))
        .args(args)
        .env_remove("RWRE_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn assert_single_line_error(o: &Output, code: i32, kind: &str) {
    assert_eq!(o.status.code(), Some(code), "stderr: {}", stderr(o));
    let err = stderr(o);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with(&format!("error kind={kind} code={code} message=\"")), "{err}");
}

#[test]
fn estimate_prints_one_report_row() {
    let o = rwre(&["estimate", "--law", "two_point:1,4,0.5", "--d", "2", "--t", "40", "--n", "160000", "--seed", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "t,n,a_hat,p_hat,ahom_direction,ci_halfwidth,seed");
    let f: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(f.len(), 7);
    assert_eq!((f[0], f[1], f[6]), ("40", "160000", "7"));
    let a_hat: f64 = f[2].parse().unwrap();
    let p_hat: f64 = f[3].parse().unwrap();
    let ahom: f64 = f[4].parse().unwrap();
    let hw: f64 = f[5].parse().unwrap();
    assert!((ahom - 5.0 * a_hat).abs() < 1e-12);
    assert!((p_hat - 1.0).abs() < 0.01);
    assert!(hw > 0.0 && hw < 0.01);
    assert!((ahom - 2.0).abs() < 0.1);
}

#[test]
fn invalid_law_has_its_own_exit_code() {
    let o = rwre(&["estimate", "--law", "two_point:4,1,0.5", "--t", "4", "--seed", "1"]);
    assert_single_line_error(&o, 3, "invalid_law");
    let o = rwre(&["estimate", "--law", "uniform:0,1", "--t", "4", "--seed", "1"]);
    assert_single_line_error(&o, 3, "invalid_law");
}

#[test]
fn usage_errors() {
    assert_single_line_error(&rwre(&["estimate", "--bogus"]), 2, "usage");
    assert_single_line_error(&rwre(&["estimate", "--seed", "1"]), 2, "usage");
    assert_single_line_error(&rwre(&["estimate", "--t", "4", "--law", "gamma:1"]), 2, "parse");
    assert_single_line_error(&rwre(&["frobnicate"]), 2, "usage");
    assert!(rwre(&["--help"]).status.success());
}

#[test]
fn budget_guard_refuses_before_running() {
    let o = rwre(&["sweep", "--t", "10,20", "--seed", "1", "--budget-draws", "1000", "--out-dir", "/nonexistent/never"]);
    assert_single_line_error(&o, 4, "budget_exceeded");
}

#[test]
fn write_failure_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = rwre(&["sweep", "--t", "2,4,8", "--seed", "1", "--out-dir", blocker.to_str().unwrap()]);
    assert_single_line_error(&o, 5, "io");
}

#[test]
fn oracle_check_passes_and_writes_kernels() {
    let dir = tempfile::tempdir().unwrap();
    let o = rwre(&["oracle-check", "--seed", "11", "--t", "3,6", "--n", "50000", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().filter(|l| l.ends_with(",true") || l.ends_with(",false")).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
    let kernel = fs::read_to_string(dir.path().join("oracle_t3.csv")).unwrap();
    assert!(kernel.starts_with("x1,x2,probability\n"));
}

#[test]
fn seed_sources() {
    let from_env = Command::new(env!("CARGO_BIN_EXE_rwre"))
        .args(["estimate", "--t", "4", "--n", "50"])
        .env("RWRE_SEED", "0x2a")
        .output()
        .unwrap();
    assert!(stdout(&from_env).lines().nth(1).unwrap().ends_with(",42"));
    let flag = rwre(&["estimate", "--t", "4", "--n", "50", "--seed", "42"]);
    assert_eq!(stdout(&flag), stdout(&from_env));
    let generated = rwre(&["estimate", "--t", "4", "--n", "50"]);
    assert!(generated.status.success());
    let note = stderr(&generated);
    let seed = note.split("generated seed ").nth(1).unwrap().split_whitespace().next().unwrap();
    assert!(stdout(&generated).lines().nth(1).unwrap().ends_with(&format!(",{seed}")));
}

fn provenance(path: &Path) -> serde_json::Value {
    let text = fs::read_to_string(path).unwrap();
    let first = text.lines().next().unwrap();
    serde_json::from_str(first.strip_prefix("# provenance: ").unwrap()).unwrap()
}

#[test]
fn config_file_is_overridden_by_flags_and_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"law": "constant:2", "t": [4, 8, 16], "k": 3, "seed": 5, "xi": "1,1"}"#).unwrap();
    let out = dir.path().join("out");
    let o = rwre(&["sweep", "--config", cfg.to_str().unwrap(), "--seed", "6", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let p = provenance(&out.join("sweep.csv"));
    assert_eq!(p["master_seed"], 6);
    assert_eq!(p["config"]["seed"], 6);
    assert_eq!(p["config"]["law"]["alpha"], 2.0);
    assert_eq!(p["plan"]["replication"]["8"], 3);
    let xi = p["config"]["xi"].as_array().unwrap();
    assert!((xi[0].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["provenance"]["master_seed"], 6);

    fs::write(&cfg, r#"{"law": "constant:2", "unknown_key": 1}"#).unwrap();
    assert_single_line_error(&rwre(&["sweep", "--config", cfg.to_str().unwrap()]), 2, "usage");
}

#[test]
fn reruns_and_worker_counts_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let o = rwre(&["sweep", "--t", "5,10,20", "--k", "30", "--seed", "99", "--workers", workers, "--out-dir", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "8");
    for f in ["sweep.csv", "fit.json"] {
        let x = fs::read(a.join(f)).unwrap();
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(x, fs::read(c.join(f)).unwrap(), "{f}");
    }
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(c.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["workers"], 8);
    assert_eq!(meta["wall_seconds"].as_array().unwrap().len(), 3);
}

#[test]
fn table1_sweep_has_seven_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = rwre(&["sweep", "--table1", "--scale", "0.01", "--seed", "1", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 9);
    assert!(lines[1].starts_with("t,k,n,a_hat,ahom_direction,systematic_error"));
    let ts: Vec<&str> = lines[2..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ts, ["10", "20", "40", "80", "160", "320", "640"]);
    for l in &lines[2..] {
        assert_eq!(l.split(',').count(), 10);
        assert!(l.split(',').all(|f| !f.is_empty()));
    }
}

#[test]
fn fluctuations_and_diagnostics_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = rwre(&["fluctuations", "--t", "4,6", "--seed", "2", "--repetitions", "100", "--out-dir", d]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("fluct.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 2 * 61);
    let total: u64 = rows.iter().filter(|r| r.starts_with("4,")).map(|r| r.split(',').nth(6).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 100);
    let few = rwre(&["fluctuations", "--t", "4", "--seed", "2", "--repetitions", "10", "--out-dir", d]);
    assert_single_line_error(&few, 3, "not_enough_samples");

    let o = rwre(&["diagnostics", "--t", "8", "--n", "1000", "--seed", "2", "--lambda", "0.1", "--out-dir", d]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("diag.json")).unwrap()).unwrap();
    assert_eq!(v["horizons"][0]["tail"][0]["probability"], 1.0);
    assert_eq!(v["horizons"][0]["lambda"], 0.1);
    assert_eq!(v["concentration"].as_array().unwrap().len(), 3);
    assert_eq!(v["provenance"]["plan"]["mode"], "diagnostics");
}

#[test]
fn continuous_process_estimates_twice_the_coefficient() {
    let o = rwre(&["estimate", "--law", "constant:1.5", "--t", "8", "--n", "20000", "--seed", "3", "--process", "continuous"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    let f: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
    assert!((f[2] - 3.0).abs() < 5.0 * f[5] / 1.96, "{row}");
    assert_eq!(f[4], f[2] / 2.0);
    assert_single_line_error(&rwre(&["sweep", "--t", "4", "--seed", "1", "--process", "continuous"]), 2, "usage");
}
