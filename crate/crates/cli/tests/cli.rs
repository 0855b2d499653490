use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_resetfreq"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn resetfreq")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(p: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(p).unwrap();
    let head = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse::<f64>().unwrap_or(f64::NAN)).collect())
        .collect();
    (head, rows)
}

fn column(head: &[String], name: &str) -> usize {
    head.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

const R4: &str = r#"
[reset]
kind = "cglp"
preset = "R4"

[loop]
tau_mode = "optimal"
"#;

const GCI_LINEAR: &str = r#"
[reset]
kind = "gci"
gamma = 1.0

[loop]
tau_mode = "none"
"#;

#[test]
fn effective_config_round_trips() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "r4.toml", R4);
    let eff = dir.path().join("eff.toml");
    let a = run(&["tune", "--config", s(&cfg), "--emit-config", s(&eff)]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = run(&["tune", "--config", s(&eff)]);
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);

    let pa = dir.path().join("pa");
    let pb = dir.path().join("pb");
    assert_eq!(run(&["predict", "--config", s(&cfg), "--freq", "20", "--out", s(&pa)]).status.code(), Some(0));
    assert_eq!(run(&["predict", "--config", s(&eff), "--freq", "20", "--out", s(&pb)]).status.code(), Some(0));
    for f in ["time.csv", "harmonics.csv", "report.csv"] {
        assert_eq!(fs::read(pa.join(f)).unwrap(), fs::read(pb.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bad.toml", &format!("{R4}\n[analysis]\nbogus = 1\n"));
    let out = run(&["tune", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn tau_mode_and_seconds_are_exclusive() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "both.toml",
        "[reset]\nkind = \"gci\"\n[loop]\ntau_mode = \"full\"\ntau = 0.001\n",
    );
    assert_eq!(run(&["tune", "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn missing_config_file_is_reported() {
    let out = run(&["tune", "--config", "/nonexistent/resetfreq.toml"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn bode_plant_and_reset_element() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "r4.toml", R4);
    let csv = dir.path().join("bode.csv");
    let out = run(&["bode", "--config", s(&cfg), "--out", s(&csv), "--band", "0.001", "0.01", "--points", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (head, rows) = read_csv(&csv);
    let db = column(&head, "plant_db");
    for r in &rows {
        assert!((r[db] - 41.9).abs() < 0.1, "plant dc {}", r[db]);
    }
}

#[test]
fn bode_gci_describing_function_phase() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "gci.toml", "[reset]\nkind = \"gci\"\ngamma = 0.0\n[loop]\ntau_mode = \"none\"\n");
    let csv = dir.path().join("bode.csv");
    let out = run(&["bode", "--config", s(&cfg), "--out", s(&csv), "--band", "1", "100", "--points", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (head, rows) = read_csv(&csv);
    let rl = column(&head, "rl_deg");
    let rdf = column(&head, "rdf_deg");
    for r in &rows {
        assert!((r[rl] + 90.0).abs() < 1e-9);
        assert!((r[rdf] + 38.146).abs() < 0.01, "ci phase {}", r[rdf]);
    }
}

#[test]
fn bode_linear_reset_matches_base_linear() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "lin.toml", GCI_LINEAR);
    let csv = dir.path().join("bode.csv");
    assert_eq!(
        run(&["bode", "--config", s(&cfg), "--out", s(&csv), "--band", "1", "100", "--points", "7"]).status.code(),
        Some(0)
    );
    let (head, rows) = read_csv(&csv);
    let (a, b) = (column(&head, "rl_db"), column(&head, "rdf_db"));
    let (c, d) = (column(&head, "rl_deg"), column(&head, "rdf_deg"));
    for r in &rows {
        assert!((r[a] - r[b]).abs() < 1e-9);
        assert!((r[c] - r[d]).abs() < 1e-9);
    }
}

#[test]
fn predict_linear_reset_is_sinusoidal() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "lin.toml", GCI_LINEAR);
    let od = dir.path().join("pred");
    let out = run(&["predict", "--config", s(&cfg), "--freq", "10", "--out", s(&od)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (head, rows) = read_csv(&od.join("harmonics.csv"));
    let (n, mag) = (column(&head, "n"), column(&head, "mag"));
    let first = rows.iter().find(|r| r[n] == 1.0).unwrap()[mag];
    assert!(first > 0.0);
    for r in rows.iter().filter(|r| r[n] > 1.0) {
        assert!(r[mag] <= 1e-12 * first, "harmonic {} = {}", r[n], r[mag]);
    }
}

#[test]
fn predict_and_simulate_agree_on_first_harmonic() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "r4.toml", R4);
    let p = dir.path().join("p");
    let q = dir.path().join("q");
    assert_eq!(run(&["predict", "--config", s(&cfg), "--freq", "20", "--out", s(&p)]).status.code(), Some(0));
    let out = run(&["simulate", "--config", s(&cfg), "--freq", "20", "--out", s(&q)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("converged = true"));
    let (hp, rp) = read_csv(&p.join("harmonics.csv"));
    let (hq, rq) = read_csv(&q.join("harmonics.csv"));
    let mp = rp[0][column(&hp, "mag")];
    let mq = rq[0][column(&hq, "mag")];
    assert!((mp - mq).abs() < 1e-2 * mq, "{mp} vs {mq}");
    let (he, re) = read_csv(&q.join("events.csv"));
    assert_eq!(he[0], "t_s");
    assert!(!re.is_empty());
}

#[test]
fn unstable_interconnection_is_an_analytic_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "unstable.toml",
        r#"
[plant]
num = [1.0]
den = [1.0, -1.0]

[controller]
kind = "tf"
num = [0.1]
den = [1.0]

[reset]
kind = "gci"
gamma = 0.0

[loop]
tau_mode = "none"
"#,
    );
    let od = dir.path().join("pred");
    let out = run(&["predict", "--config", s(&cfg), "--freq", "10", "--out", s(&od)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn validate_without_configs_is_empty_and_passes() {
    let dir = TempDir::new().unwrap();
    let od = dir.path().join("val");
    let out = run(&["validate", "--tau", "optimal", "--out", s(&od)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&od.join("rows.csv"));
    assert!(rows.is_empty());
}

#[test]
fn validate_single_config_orders_methods() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "r4.toml", R4);
    let od = dir.path().join("val");
    let out = run(&[
        "validate", "--config", s(&cfg), "--tau", "optimal", "--band", "20", "60", "--points", "2", "--out", s(&od),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("ordering ok"));
    for f in ["rows.csv", "summary.csv", "failures.csv", "cells.csv"] {
        assert!(od.join(f).exists(), "{f}");
    }
}

#[test]
fn tune_reports_margins() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "r4.toml", R4);
    let out = run(&["tune", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let get = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(key).and_then(|r| r.trim().strip_prefix('=')))
            .unwrap_or_else(|| panic!("no {key}"))
            .trim()
            .parse()
            .unwrap()
    };
    assert!((get("crossover_df_hz") - 100.0).abs() < 1e-6);
    assert!((get("pm_df_deg") - 60.0).abs() < 0.5);
    assert!(text.contains("ol_stable = true"));
}
