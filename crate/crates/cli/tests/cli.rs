use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn gelfand(dir: &Path, sub: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_gelfand"))
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

const DISK: &str = r#""schema_version": 1, "domain": {"kind": "unit_disk"}"#;

#[test]
fn empty_task_list_is_a_schema_error() {
    let dir = TempDir::new().unwrap();
    let out = gelfand(dir.path(), "run", &format!("{{{DISK}, \"tasks\": []}}"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let top = format!("{{{DISK}, \"colour\": 1, \"tasks\": [{{\"task\": \"critical-points\", \"m\": 1}}]}}");
    assert_eq!(gelfand(dir.path(), "run", &top, &[]).status.code(), Some(2));
    let nested = format!("{{{DISK}, \"tasks\": [{{\"task\": \"critical-points\", \"m\": 1, \"starts\": 3}}]}}");
    assert_eq!(gelfand(dir.path(), "run", &nested, &[]).status.code(), Some(2));
}

#[test]
fn bad_inputs_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let version = r#"{"schema_version": 7, "domain": {"kind": "unit_disk"}, "tasks": [{"task": "critical-points", "m": 1}]}"#;
    assert_eq!(gelfand(dir.path(), "run", version, &[]).status.code(), Some(2));
    let heights = format!("{{{DISK}, \"tasks\": [{{\"task\": \"continue\", \"points\": [[0, 0]], \"heights\": [3, 2]}}]}}");
    assert_eq!(gelfand(dir.path(), "run", &heights, &[]).status.code(), Some(2));
    // no task of the requested kind
    let crit = format!("{{{DISK}, \"tasks\": [{{\"task\": \"critical-points\", \"m\": 1}}]}}");
    assert_eq!(gelfand(dir.path(), "sweep", &crit, &[]).status.code(), Some(2));
    let missing = Command::new(env!("CARGO_BIN_EXE_gelfand")).args(["crit", "--config", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn critical_points_of_the_disk() {
    let dir = TempDir::new().unwrap();
    let out = gelfand(dir.path(), "crit", &format!("{{{DISK}, \"tasks\": [{{\"task\": \"critical-points\", \"m\": 1}}]}}"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (h, rows) = read_csv(&dir.path().join("out/task00_critical-points.csv"));
    assert_eq!(rows.len(), 1);
    let get = |name: &str| rows[0][column(&h, name)].parse::<f64>().unwrap();
    assert!(get("q0_x").abs() < 1e-8 && get("q0_y").abs() < 1e-8);
    assert!((get("eig_0") + 4.0).abs() < 1e-6 && (get("eig_1") + 4.0).abs() < 1e-6);
    assert_eq!(rows[0][column(&h, "degenerate")], "false");
}

#[test]
fn continuation_follows_the_radial_family() {
    let dir = TempDir::new().unwrap();
    let deltas = [1.0, 0.5, 0.2, 0.1];
    let heights: Vec<String> = deltas.iter().map(|d: &f64| (2.0 * ((1.0 + d) / d).ln()).to_string()).collect();
    let config = format!("{{{DISK}, \"grid\": 257, \"tasks\": [{{\"task\": \"continue\", \"points\": [[0, 0]], \"heights\": [{}]}}]}}", heights.join(", "));
    let out = gelfand(dir.path(), "continue", &config, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (h, rows) = read_csv(&dir.path().join("out/task00_continue.csv"));
    assert_eq!(rows.len(), deltas.len());
    for (row, d) in rows.iter().zip(deltas) {
        let eps2 = row[column(&h, "eps2")].parse::<f64>().unwrap();
        let max_w = row[column(&h, "max_w")].parse::<f64>().unwrap();
        let exact = 8.0 * d / (1.0 + d).powi(2);
        assert!((eps2 - exact).abs() / exact < 1e-3, "δ = {d}: ε² = {eps2}, exact {exact}");
        let s = 2.0 * ((1.0 + d) / d).ln();
        assert!((max_w - s).abs() / s < 1e-3);
    }
    assert!(h.contains(&"peak0_height".to_string()));
}

#[test]
fn sweep_rows_and_expansion_ratio() {
    let dir = TempDir::new().unwrap();
    let config = format!("{{{DISK}, \"grid\": 513, \"tasks\": [{{\"task\": \"sweep\", \"points\": [[0, 0]], \"deltas\": [0.1, 0.01, 0.001]}}]}}");
    let out = gelfand(dir.path(), "sweep", &config, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (h, rows) = read_csv(&dir.path().join("out/task00_sweep.csv"));
    assert_eq!(h, ["delta", "quantity", "peak", "value"]);
    for q in ["eps2", "lambda", "lambda_gap_ratio", "rho_j", "eta_sup"] {
        assert_eq!(rows.iter().filter(|r| r[1] == q).count(), 3, "{q}");
    }
    let ratio: f64 = rows.iter().find(|r| r[0] == "0.01" && r[1] == "lambda_gap_ratio").unwrap()[3].parse().unwrap();
    assert!((ratio - 1.0).abs() < 5e-2, "ratio {ratio}");
}

#[test]
fn reruns_are_byte_identical() {
    let config = format!(
        "{{{DISK}, \"grid\": 65, \"tasks\": [{{\"task\": \"critical-points\", \"m\": 1}}, {{\"task\": \"diagnose\", \"points\": [[0, 0]], \"heights\": [2, 4], \"spectrum\": true}}]}}"
    );
    let runs: Vec<TempDir> = (0..2)
        .map(|_| {
            let dir = TempDir::new().unwrap();
            let out = gelfand(dir.path(), "run", &config, &[]);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            dir
        })
        .collect();
    let mut names: Vec<_> = fs::read_dir(runs[0].path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 4);
    for name in &names {
        let a = fs::read(runs[0].path().join("out").join(name)).unwrap();
        let b = fs::read(runs[1].path().join("out").join(name)).unwrap();
        if name == "manifest.json" {
            // identical apart from the wall time
            let strip = |v: &[u8]| {
                let mut m: serde_json::Value = serde_json::from_slice(v).unwrap();
                m.as_object_mut().unwrap().remove("wall_time_seconds");
                m
            };
            assert_eq!(strip(&a), strip(&b));
        } else {
            assert_eq!(a, b, "{name:?} differs");
        }
    }
}

#[test]
fn manifest_records_inputs_and_outputs() {
    let dir = TempDir::new().unwrap();
    let config = format!("{{{DISK}, \"tasks\": [{{\"task\": \"green-table\", \"points\": [[0, 0], [0.5, 0.1]]}}]}}");
    let out = gelfand(dir.path(), "green", &config, &["--grid", "65", "--threads", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config_sha256"], hex(config.as_bytes()));
    assert_eq!(m["grid"], 65);
    let file = &m["tasks"][0]["files"][0];
    let bytes = fs::read(dir.path().join("out").join(file["name"].as_str().unwrap())).unwrap();
    assert_eq!(file["sha256"], hex(&bytes));
    assert!(m["tasks"][0]["operations"].as_array().unwrap().iter().any(|o| o == "green_value"));
}

#[test]
fn non_convergence_exits_with_three_and_keeps_artifacts() {
    let dir = TempDir::new().unwrap();
    let config = format!(
        "{{{DISK}, \"grid\": 65, \"newton\": {{\"max_iter\": 1}}, \"tasks\": [{{\"task\": \"critical-points\", \"m\": 1}}, {{\"task\": \"continue\", \"points\": [[0, 0]], \"heights\": [6]}}]}}"
    );
    let out = gelfand(dir.path(), "run", &config, &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/task00_critical-points.csv").exists());
    let m: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["tasks"][1]["status"], "failed");
    assert!(fs::read_to_string(dir.path().join("out/summary.txt")).unwrap().contains("failed"));
}
