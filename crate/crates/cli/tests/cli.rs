use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn histsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_histsel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn help_succeeds_and_bad_flags_fail() {
    assert_eq!(histsel(&["--help"]).status.code(), Some(0));
    assert_eq!(histsel(&["simulate", "--help"]).status.code(), Some(0));
    assert_eq!(histsel(&["simulate", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(histsel(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(histsel(&[]).status.code(), Some(1));
}

#[test]
fn invalid_configuration_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = histsel(&["simulate", "--d1", "4", "--d2", "3", "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    let o = histsel(&["simulate", "--epsilon-mode", "percentile", "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "speed = 3\n").unwrap();
    let o = histsel(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("speed"));
}

#[test]
fn simulate_writes_reproducible_bundle() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |dir: &str| {
        vec![
            "simulate", "--d1", "3", "--d2", "15", "--rank", "1", "--criterion", "medium-dhc", "--epsilon", "0.15",
            "--delta", "1e-8", "--delta-mode", "relative", "--t-max", "2", "--max-histories", "30", "--seed", "42",
            "--out",
        ]
        .into_iter()
        .map(String::from)
        .chain([dir.to_string()])
        .collect::<Vec<_>>()
    };
    let run = |dir: &Path| {
        let owned = args(dir.to_str().unwrap());
        let refs: Vec<&str> = owned.iter().map(String::as_str).collect();
        let o = histsel(&refs);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    };
    run(a.path());
    run(b.path());
    for f in ["tree.csv", "consistency.csv", "projections.csv", "metadata.txt"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
    let hash = read(a.path(), "tree.csv").lines().next().unwrap().to_string();
    assert!(hash.starts_with("# config_hash="));
    for f in ["consistency.csv", "projections.csv", "metadata.txt"] {
        assert_eq!(read(a.path(), f).lines().next().unwrap(), hash);
    }
    let consistency = read(a.path(), "consistency.csv");
    assert_eq!(consistency.lines().nth(1), Some("t,min_dhp,epsilon,leaf_count,projection"));
    assert_eq!(consistency.lines().count(), 2 + 201);

    // The metadata file doubles as a configuration file.
    let c = tempfile::tempdir().unwrap();
    let o = histsel(&[
        "simulate",
        "--config",
        a.path().join("metadata.txt").to_str().unwrap(),
        "--out",
        c.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read(a.path(), "tree.csv"), read(c.path(), "tree.csv"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "seed = 3\nt-max = 0.5\nepsilon = 0.2\n").unwrap();
    let out = dir.path().join("out");
    let o = histsel(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let meta = read(&out, "metadata.txt");
    assert!(meta.contains("seed = 9"));
    assert!(meta.contains("t-max = 0.5"));
    assert!(meta.contains("epsilon = 0.2"));
}

#[test]
fn percentile_table_drives_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("eps.csv");
    let o = histsel(&[
        "percentiles",
        "--d1",
        "3",
        "--d2",
        "15",
        "--k",
        "1..6",
        "--samples",
        "1000",
        "--p",
        "0.01,0.5,0.99",
        "--seed",
        "7",
        "--out",
        table.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&table).unwrap();
    assert!(text.lines().any(|l| l == "k,p,epsilon,samples,seed"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 6 * 3);

    let out = dir.path().join("run");
    let o = histsel(&[
        "simulate",
        "--epsilon-mode",
        "percentile",
        "--percentile-p",
        "0.5",
        "--percentile-table",
        table.to_str().unwrap(),
        "--t-max",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("percentiles.csv").exists());
    let o = histsel(&[
        "simulate",
        "--epsilon-mode",
        "percentile",
        "--percentile-p",
        "0.3",
        "--percentile-table",
        table.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn percentiles_reject_too_few_samples() {
    let o = histsel(&["percentiles", "--k", "2", "--samples", "500", "--p", "0.01"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_gue_passes() {
    let o = histsel(&["verify-gue", "--dim", "6", "--samples", "20000", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5);
}

#[test]
fn analytic_queries() {
    let o = histsel(&["analytic", "beta", "--lambda", "0.5", "--r", "2"]);
    assert_eq!(stdout(&o).trim().parse::<f64>().unwrap(), 0.5);
    let o = histsel(&["analytic", "cdf", "--lambda", "2", "--k", "4"]);
    assert_eq!(stdout(&o).trim(), "1");
    let o = histsel(&["analytic", "asymptotic", "--d", "45", "--k", "20"]);
    assert!(stdout(&o).contains("large_k = 0.258"));
    let o = histsel(&["analytic", "thresholds", "--epsilon", "0.05", "--r", "2", "--delta", "0.02"]);
    assert!(stdout(&o).contains("initial delta floor (absolute): 7.500000e-3"));
    let o = histsel(&["analytic", "beta", "--lambda", "0.5", "--r", "1"]);
    assert_eq!(o.status.code(), Some(1));
}
