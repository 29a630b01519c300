use std::path::Path;
use std::process::{Command, Output};

use ams_core::committor::CommittorGrid;

fn ams(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ams")).current_dir(dir).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn csv_column(text: &str, column: &str) -> Vec<String> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == column).unwrap_or_else(|| panic!("no column {column}"));
    lines.map(|l| l.split(',').nth(i).unwrap().to_string()).collect()
}

#[test]
fn single_drift_realization() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.json", r#"{"ams": {"realizations": 1}}"#);
    let o = ams(tmp.path(), &["run-ams", "--config", "c.json", "--out", "res"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let res = tmp.path().join("res");
    let lines: Vec<String> = read(&res, "ams_records.jsonl").lines().map(String::from).collect();
    assert_eq!(lines.len(), 1);
    let rec: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
    for key in ["alpha_hat", "k", "r", "levels", "durations", "seed"] {
        assert!(rec.get(key).is_some(), "missing {key}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&read(&res, "manifest.json")).unwrap();
    assert_eq!(manifest["command"], "run-ams");
    assert_eq!(manifest["inputs_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["outputs"].get("ams_records.jsonl").is_some());
}

#[test]
fn records_do_not_depend_on_threads_or_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.json", r#"{"problem": {"model": "double_well", "beta": 3, "coordinate": "linear"}, "ams": {"n_clones": 30, "n_killed": 3, "realizations": 8}}"#);
    let mut outputs = vec![];
    for (dir, threads) in [("a", "1"), ("b", "3"), ("c", "1")] {
        let o = ams(tmp.path(), &["run-ams", "--config", "c.json", "--seed", "17", "--threads", threads, "--out", dir]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let d = tmp.path().join(dir);
        outputs.push((std::fs::read(d.join("ams_records.jsonl")).unwrap(), read(&d, "manifest.json")));
    }
    assert!(!outputs[0].0.is_empty());
    assert!(outputs.iter().all(|o| o == &outputs[0]));

    // the written config reproduces the run
    let o = ams(tmp.path(), &["run-ams", "--config", "a/config.json", "--out", "again"]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(tmp.path().join("again/ams_records.jsonl")).unwrap(), outputs[0].0);

    let o = ams(tmp.path(), &["run-ams", "--config", "c.json", "--seed", "18", "--out", "d"]);
    assert!(o.status.success());
    assert_ne!(std::fs::read(tmp.path().join("d/ams_records.jsonl")).unwrap(), outputs[0].0);
}

#[test]
fn three_level_table_has_the_inflexion() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.json", r#"{"three_level": {"lambdas": [100], "beta_min": 1, "beta_max": 20, "beta_step": 0.05}}"#);
    let o = ams(tmp.path(), &["three-level", "--config", "c.json", "--out", "t"]);
    assert!(o.status.success());
    let peaks = read(&tmp.path().join("t"), "three_level_peaks.csv");
    let lin: f64 = csv_column(&peaks, "inflexion_lin")[0].parse().unwrap();
    assert!((lin - 9.903).abs() < 1e-3, "{lin}");
    let rows = read(&tmp.path().join("t"), "three_level_table.csv");
    assert_eq!(rows.lines().count(), 1 + 381);
}

#[test]
fn committor_grid_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.json", r#"{"problem": {"model": "triple_well", "beta": 10, "grid": "g/committor.grid"}, "ams": {"realizations": 2, "n_clones": 10}}"#);
    let o = ams(tmp.path(), &["committor", "--config", "c.json", "--out", "g"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let file = std::fs::File::open(tmp.path().join("g/committor.grid")).unwrap();
    let grid = CommittorGrid::read_from(file).unwrap();
    assert_eq!(grid.beta, 10.0);
    assert!(grid.dirichlet_a.iter().all(|&(i, j)| grid.value(i, j) == 0.0));
    assert!(grid.dirichlet_b.iter().all(|&(i, j)| grid.value(i, j) == 1.0));
    assert!(grid.values.iter().all(|v| (0.0..=1.0).contains(v)));

    // the grid drives the committor coordinate, and its bytes enter the input hash
    let o = ams(tmp.path(), &["run-ams", "--config", "c.json", "--out", "a"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let hash = |d: &str| {
        let m: serde_json::Value = serde_json::from_str(&read(&tmp.path().join(d), "manifest.json")).unwrap();
        m["inputs_sha256"].as_str().unwrap().to_string()
    };
    let before = hash("a");
    let text = read(&tmp.path().join("g"), "committor.grid").replacen("# committor grid", "# committor grid, edited", 1);
    write(&tmp.path().join("g"), "committor.grid", &text);
    assert!(ams(tmp.path(), &["run-ams", "--config", "c.json", "--out", "b"]).status.success());
    assert_ne!(hash("b"), before);
}

#[test]
fn drift_dt_sweep_rate() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "c.json",
        r#"{"problem": {"mu": 2}, "ams": {"n_clones": 100, "realizations": 200}, "sweep": {"dts": [0.1, 0.01, 0.001]}}"#,
    );
    let o = ams(tmp.path(), &["ensemble-sweep", "--config", "c.json", "--out", "s"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rate: serde_json::Value = serde_json::from_str(&read(&tmp.path().join("s"), "dt_rate.json")).unwrap();
    let gamma = rate["gamma"].as_f64().unwrap();
    assert!((0.35..=0.65).contains(&gamma), "{gamma}");
    assert_eq!(read(&tmp.path().join("s"), "dt_sweep.csv").lines().count(), 4);
}

#[test]
fn n_sweep_writes_duration_statistics() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "c.json",
        r#"{"problem": {"model": "double_well", "beta": 2, "coordinate": "linear"}, "ams": {"realizations": 6}, "sweep": {"ns": [10, 20], "tau_ref": 1.0}}"#,
    );
    let o = ams(tmp.path(), &["ensemble-sweep", "--config", "c.json", "--out", "s"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let n = read(&tmp.path().join("s"), "n_sweep.csv");
    assert_eq!(csv_column(&n, "n_clones"), vec!["10", "20"]);
    let d: serde_json::Value = serde_json::from_str(&read(&tmp.path().join("s"), "duration_stats.json")).unwrap();
    assert_eq!(d["bias"].as_array().unwrap().len(), 2);
}

#[test]
fn dns_reports_its_estimate() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.json", r#"{"dns": {"samples": 2000}}"#);
    let o = ams(tmp.path(), &["run-dns", "--config", "c.json", "--out", "d"]);
    assert!(o.status.success());
    let s = read(&tmp.path().join("d"), "dns_summary.csv");
    let alpha: f64 = csv_column(&s, "alpha")[0].parse().unwrap();
    let se: f64 = csv_column(&s, "std_err")[0].parse().unwrap();
    assert!((alpha - 0.425557).abs() < 4.0 * se + 0.01, "{alpha}");
}

#[test]
fn failures_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "unknown.json", r#"{"ams": {"clones": 10}}"#);
    let o = ams(tmp.path(), &["run-ams", "--config", "unknown.json"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("clones"));

    write(tmp.path(), "nogrid.json", r#"{"problem": {"model": "triple_well", "grid": "missing.grid"}}"#);
    let o = ams(tmp.path(), &["run-ams", "--config", "nogrid.json"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("not found"));

    // no trajectory can climb against this drift
    write(tmp.path(), "zero.json", r#"{"problem": {"mu": 40, "coordinate": "linear"}, "dns": {"samples": 100}}"#);
    let o = ams(tmp.path(), &["run-dns", "--config", "zero.json", "--out", "z"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(tmp.path().join("z/dns.json").exists());

    assert!(!ams(tmp.path(), &["run-ams", "--config", "absent.json"]).status.success());
}
