use std::path::{Path, PathBuf};
use std::process::Command;

use scenery_lab::cli::{load_config, parse_config, run, ConfigError, Experiment, ExperimentConfig, SUMMARY_FILE};

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn shipped(name: &str) -> ExperimentConfig {
    load_config(manifest().join("configs").join(name)).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scenery-lab"))
}

fn csv_field(text: &str, row_label: &str, column: usize) -> f64 {
    text.lines()
        .find(|l| l.split(',').next() == Some(row_label))
        .unwrap_or_else(|| panic!("no row {row_label}"))
        .split(',')
        .nth(column)
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn minimal_config_is_valid() {
    let c = parse_config(r#"{"system": "cantor3", "experiment": "dim", "seed": 1}"#).unwrap();
    assert_eq!(c.experiment, Experiment::Dim);
    assert_eq!(c.seed, 1);
    assert!(c.params.is_empty());
}

#[test]
fn unknown_preset_points_at_system() {
    let e = parse_config(r#"{"system": "cantor9", "experiment": "dim", "seed": 1}"#).unwrap_err();
    assert_eq!(e.paths(), vec!["system"]);
    assert!(e.to_string().contains("cantor9"));
}

#[test]
fn seed_has_no_default() {
    let e = parse_config(r#"{"system": "cantor3", "experiment": "dim"}"#).unwrap_err();
    assert_eq!(e.paths(), vec!["seed"]);
}

#[test]
fn parse_errors_report_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"system\": \"cantor3\",\n  \"seed\": 1,\n}\n").unwrap();
    match load_config(&path) {
        Err(ConfigError::Parse { line, column, .. }) => assert_eq!((line, column), (4, 1)),
        other => panic!("{other:?}"),
    }
    assert!(matches!(load_config(dir.path().join("missing.json")), Err(ConfigError::Io { .. })));
}

/// The overlapping pair `0.6x`, `0.6x + 0.4` has no separation, so the
/// extraction has to select words; the result is pinned by a recorded run.
#[test]
fn overlapping_inline_system_matches_golden_output() {
    let cfg = shipped("subsystem-overlap.json");
    let out = run(&cfg).unwrap();
    let golden = manifest().join("tests/golden/subsystem-overlap");
    let mut names: Vec<String> = std::fs::read_dir(&golden)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, out.files.keys().cloned().collect::<Vec<_>>());
    for name in &names {
        let want = std::fs::read(golden.join(name)).unwrap();
        assert!(out.files[name] == want, "{name} differs from the recorded run");
    }

    // every kept word has length 9 and the same ratio, so the Moran equation
    // n·(0.6^9)^t = 1 has the closed-form root below
    let words = out.file("subsystem_words.csv").unwrap();
    let rows: Vec<&str> = words.lines().skip(1).filter(|l| !l.starts_with('#')).collect();
    assert!(rows.iter().all(|r| r.split(',').next().unwrap().split('.').count() == 9));
    let n = rows.len() as f64;
    let t = n.ln() / (9.0 * (1.0 / 0.6f64).ln());
    let reported = csv_field(out.file("subsystem_summary.csv").unwrap(), "8", 2);
    assert!((reported - t).abs() < 1e-10, "{reported} vs {t}");
}

#[test]
fn cantor_dimension_run() {
    let cfg = shipped("dim-cantor3.json");
    let out = run(&cfg).unwrap();
    let results = &out.summary["results"];
    for method in ["box_count", "local_dim"] {
        let v = results[method]["value"].as_f64().unwrap();
        assert!((0.58..=0.68).contains(&v), "{method}: {v}");
    }
    let csv = out.file("dim.csv").unwrap();
    assert!((0.58..=0.68).contains(&csv_field(csv, "box_count", 1)));
    assert_eq!(csv_field(csv, "exact_formula", 1), 2f64.ln() / 3f64.ln());
}

#[test]
fn rot5_distance_set_run() {
    let out = run(&shipped("distances-rot5.json")).unwrap();
    let csv = out.file("distances.csv").unwrap();
    assert!(csv_field(csv, "distance", 1) >= 0.90);
    assert!(csv_field(csv, "restricted", 1) >= 0.85);
    assert_eq!(out.summary["results"]["pairs_sampled"], false);
}

#[test]
fn outputs_carry_headers_and_config_hash() {
    for name in ["check-rot5.json", "gibbs-verify-table.json", "scenery-goldenmean2.json"] {
        let cfg = shipped(name);
        let hash = cfg.hash();
        let out = run(&cfg).unwrap();
        assert_eq!(out.summary["config_hash"], hash.as_str());
        assert_eq!(out.summary["seed"], cfg.seed);
        assert!(out.summary["versions"]["scenery-lab"].is_string());
        for (file, bytes) in &out.files {
            let text = std::str::from_utf8(bytes).unwrap();
            assert!(!text.contains('\r'));
            if file == SUMMARY_FILE {
                continue;
            }
            let lines: Vec<&str> = text.lines().collect();
            assert!(lines.len() >= 2 && !lines[0].starts_with('#'), "{file}");
            assert_eq!(*lines.last().unwrap(), format!("# config_hash={hash}"), "{file}");
        }
    }
}

#[test]
fn same_seed_same_bytes_other_seed_other_bytes() {
    let cfg = shipped("scenery-goldenmean2.json");
    let a = run(&cfg).unwrap();
    assert_eq!(a, run(&cfg).unwrap());
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(a.files["scenery_frames.csv"], run(&other).unwrap().files["scenery_frames.csv"]);
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn binary_runs_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let config = manifest().join("configs/gibbs-verify-cantor3.json");
    for sub in ["a", "b"] {
        let out = bin()
            .args(["gibbs-verify", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.path().join(sub))
            .args(["--seed", "5"])
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    let a = read_tree(&dir.path().join("a"));
    assert_eq!(a, read_tree(&dir.path().join("b")));
    let summary = String::from_utf8(a.iter().find(|f| f.0 == SUMMARY_FILE).unwrap().1.clone()).unwrap();
    assert!(summary.contains("\"seed\": 5"));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"system": "cantor9", "experiment": "dim", "seed": 1}"#).unwrap();
    let out = bin().args(["dim", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("system:"));

    let dim = manifest().join("configs/dim-cantor3.json");
    let out = bin().args(["dim", "--config"]).arg(&dim).args(["--cap-override", "points=10"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let out = bin().args(["dim", "--config"]).arg(&dim).args(["--cap-override", "nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["project", "--config"]).arg(&dim).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = bin().arg("presets").output().unwrap();
    assert!(out.status.success());
    let listing = String::from_utf8(out.stdout).unwrap();
    assert!(listing.starts_with("preset,oracle_dimension,description\n"));
    assert!(listing.contains("rot5,1.4649735207179269e0,"));
}

#[test]
fn every_shipped_config_validates() {
    let mut seen = std::collections::BTreeSet::new();
    for entry in std::fs::read_dir(manifest().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let cfg = load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen.insert(cfg.experiment);
    }
    assert_eq!(seen.len(), Experiment::ALL.len(), "one shipped config per experiment");
}
