use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hierbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hierbench"))
        .args(args)
        .env_remove("HIERBENCH_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn demo() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let out = hierbench(&["seed-demo", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let config = dir.path().join("config.toml");
    (dir, config)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_column(path: &Path, col: usize) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(col).unwrap().to_string())
        .collect()
}

/// Rewrites every row of a wide CSV so that the last `2 * half` values are
/// the first half repeated.
fn repeat_tail(path: &Path, half: usize) {
    let text = fs::read_to_string(path).unwrap();
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            out.push_str(line);
        } else {
            let mut cells: Vec<&str> = line.split(',').collect();
            let n = cells.len();
            for j in 0..half {
                cells[n - half + j] = cells[n - 2 * half + j];
            }
            out.push_str(&cells.join(","));
        }
        out.push('\n');
    }
    fs::write(path, out).unwrap();
}

#[test]
fn demo_validates_and_runs_everything() {
    let (dir, config) = demo();
    let v = hierbench(&["validate", "--config", s(&config)]);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stdout));

    let json = hierbench(&["validate", "--config", s(&config), "--json"]);
    let parsed: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(parsed["findings"].as_array().unwrap().len(), 0);

    let out = dir.path().join("all");
    let r = hierbench(&["run", "--config", s(&config), "--splits", "4", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    for name in [
        "report.json",
        "stability.csv",
        "per_level.csv",
        "total.csv",
        "temporal.csv",
        "temporal_per_level.csv",
        "magic.csv",
        "magic_multipliers.csv",
        "sweep_top3.csv",
        "sweep_top6.csv",
        "matrix.csv",
    ] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let stdout = String::from_utf8_lossy(&r.stdout);
    assert!(stdout.contains("stability") && stdout.contains("PRICE_RMSSE"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["splits"], 4);
    assert_eq!(report["methods"].as_array().unwrap().len(), 6);
}

#[test]
fn stability_runs_are_byte_identical() {
    let (dir, config) = demo();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let r = hierbench(&[
            "run",
            "--config",
            s(&config),
            "--experiment",
            "stability",
            "--splits",
            "4",
            "--threads",
            threads,
            "--out",
            s(&out),
        ]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        assert!(!out.join("matrix.csv").exists());
        fs::read(out.join("report.json")).unwrap()
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "3"));
    let other_seed = dir.path().join("c");
    hierbench(&["run", "--config", s(&config), "--experiment", "stability", "--splits", "4", "--seed", "99", "--out", s(&other_seed)]);
    assert_ne!(a, fs::read(other_seed.join("report.json")).unwrap());
}

#[test]
fn missing_forecast_id_fails_validation() {
    let (dir, config) = demo();
    let path = dir.path().join("forecasts/m2.csv");
    let text = fs::read_to_string(&path).unwrap();
    let kept: Vec<&str> = text.lines().filter(|l| !l.starts_with("FOODS_1_002_CA_1")).collect();
    fs::write(&path, kept.join("\n") + "\n").unwrap();
    let v = hierbench(&["validate", "--config", s(&config)]);
    assert_eq!(v.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&v.stdout).contains("FOODS_1_002_CA_1_evaluation"));
    let r = hierbench(&["run", "--config", s(&config), "--out", s(&dir.path().join("x"))]);
    assert_eq!(r.status.code(), Some(1));
    assert!(!dir.path().join("x/report.json").exists());
}

#[test]
fn temporal_is_one_on_repeated_windows() {
    let (dir, config) = demo();
    repeat_tail(&dir.path().join("sales_train.csv"), 7);
    for m in 1..=6 {
        repeat_tail(&dir.path().join(format!("forecasts/m{m}.csv")), 7);
    }
    let out = dir.path().join("t");
    let r = hierbench(&["run", "--config", s(&config), "--experiment", "temporal", "--format", "csv", "--out", s(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let overall = csv_column(&out.join("temporal.csv"), 1);
    assert_eq!(overall.len(), 9);
    assert!(overall.iter().all(|v| v == "1.000000"), "{overall:?}");
    assert!(!out.join("report.json").exists());
}

#[test]
fn duplicated_measure_gives_unit_similarity() {
    let (dir, config) = demo();
    let text = fs::read_to_string(&config).unwrap().replace(
        "[run]\n",
        "[run]\nmatrix_measures = [\"MASE\", \"MASE\", \"PRICE_RMSSE\"]\n",
    );
    fs::write(&config, text).unwrap();
    let out = dir.path().join("m");
    let r = hierbench(&["run", "--config", s(&config), "--experiment", "matrix", "--out", s(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let matrix = fs::read_to_string(out.join("matrix.csv")).unwrap();
    let rows: Vec<Vec<&str>> = matrix.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][2], "1.000000");
    assert_eq!(rows[1][1], "1.000000");
    assert_eq!(rows[2][3], "1.000000");
}

#[test]
fn bad_arguments_are_rejected() {
    let (_dir, config) = demo();
    let r = hierbench(&["run", "--config", s(&config), "--experiment", "bogus"]);
    assert!(!r.status.success());
    let r = hierbench(&["run", "--config", "/nonexistent/config.toml"]);
    assert_eq!(r.status.code(), Some(1));
    let r = hierbench(&["run", "--config", s(&config), "--splits", "0", "--out", "/tmp/unused"]);
    assert_eq!(r.status.code(), Some(1));
}
