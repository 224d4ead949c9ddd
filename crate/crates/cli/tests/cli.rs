use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bec")).args(args).output().expect("bec runs")
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    bec(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn appendix_against_barrier() -> Value {
    json!({
        "minus": {"kind": "barrier", "dim": 2, "level": 2.0},
        "plus": {"kind": "appendix", "epsilon": 0.3, "nu": 1},
        "edge": {"width": 20, "zeta_nodes": 80}
    })
}

#[test]
fn verify_reports_match() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", &appendix_against_barrier());
    let out = dir.path().join("out");
    let o = run("verify", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("match: true"));
    let v = read_json(&out.join("verify.json"));
    assert_eq!(v["match"], json!(true));
    assert_eq!(v["c1_minus"], json!(0));
    assert_eq!(v["c1_plus"], json!(-1));
    assert_eq!(v["spectral_flow"], json!(-1));
}

#[test]
fn free_laplacian_band_minimum_at_origin() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "cfg.json",
        &json!({"model": {"kind": "magnetic-schrodinger"}, "grid": 8, "k_max": 2}),
    );
    let out = dir.path().join("out");
    let o = run("bands", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("bands.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("xi1,xi2,band_index,eigenvalue"));
    let at_origin: Vec<f64> = lines
        .map(|l| l.split(',').map(|x| x.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .filter(|r| r[0] == 0.0 && r[1] == 0.0)
        .map(|r| r[3])
        .collect();
    assert_eq!(at_origin.len(), 25);
    let min = at_origin.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(min.abs() < 1e-12, "{min}");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "cfg.json",
        &json!({"model": {"kind": "qwz", "mass": 1.0}, "grid": 16}),
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run("chern", &cfg, out, &["--force"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["chern.json", "curvature.csv"] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
    // the cached copy reproduces the fresh artifact exactly
    let o = run("chern", &cfg, &a, &[]);
    assert!(stderr(&o).contains("cache hit"));
    assert_eq!(std::fs::read(a.join("chern.json")).unwrap(), std::fs::read(b.join("chern.json")).unwrap());
}

#[test]
fn cache_hits_misses_and_force() {
    let dir = TempDir::new().unwrap();
    let mut v = json!({"model": {"kind": "appendix", "epsilon": 0.3, "nu": 2}, "grid": 12});
    let cfg = write_config(dir.path(), "cfg.json", &v);
    let out = dir.path().join("out");

    let first = run("bands", &cfg, &out, &[]);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(!stderr(&first).contains("cache hit"));

    let second = run("bands", &cfg, &out, &[]);
    assert!(stderr(&second).contains("cache hit"));

    let forced = run("bands", &cfg, &out, &["--force"]);
    assert!(forced.status.success());
    assert!(!stderr(&forced).contains("cache hit"));

    v["grid"] = json!(14);
    let cfg = write_config(dir.path(), "cfg.json", &v);
    let changed = run("bands", &cfg, &out, &[]);
    assert!(!stderr(&changed).contains("cache hit"));

    // same hash through a command-line override
    let overridden = run("bands", &cfg, &out, &["--grid", "12"]);
    assert!(stderr(&overridden).contains("cache hit"));

    let records = std::fs::read_dir(out.join("cache")).unwrap().count();
    assert_eq!(records, 2);
}

#[test]
fn corrupt_record_is_a_miss() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", &json!({"model": {"kind": "qwz", "mass": -1.0}, "grid": 8}));
    let out = dir.path().join("out");
    assert!(run("bands", &cfg, &out, &[]).status.success());
    let record = std::fs::read_dir(out.join("cache")).unwrap().next().unwrap().unwrap().path();
    std::fs::write(&record, "{ not json").unwrap();
    let o = run("bands", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning: corrupt cache record"));
    assert!(!stderr(&o).contains("cache hit"));
    // the record was rewritten
    assert!(serde_json::from_str::<Value>(&std::fs::read_to_string(&record).unwrap()).is_ok());
}

#[test]
fn config_errors_exit_2_with_field_path() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cases = [
        (json!({"grid": "fine"}), "$.grid"),
        (json!({"edge": {"widht": 3}}), "$.edge"),
        (json!({"minus": {"kind": "qwz", "mass": 1.0}, "plus": {"kind": "sphere"}}), "$.plus.kind"),
        (json!({"minus": {"kind": "qwz", "mass": 1.0}}), "$.plus"),
        (json!({"minus": {"kind": "qwz", "mass": 1.0}, "plus": {"kind": "qwz", "mass": 1.0}, "edge": {"loc_threshold": 1.5}}), "$.edge.loc_threshold"),
        (json!({"minus": {"kind": "qwz", "mass": 1.0}, "plus": "missing.json"}), "$.plus"),
    ];
    for (i, (cfg, path)) in cases.iter().enumerate() {
        let file = write_config(dir.path(), &format!("bad{i}.json"), cfg);
        let o = run("verify", &file, &out, &[]);
        assert_eq!(o.status.code(), Some(2), "case {i}: {}", stderr(&o));
        assert!(stderr(&o).contains(path), "case {i}: {}", stderr(&o));
    }
}

#[test]
fn numerical_errors_exit_3_with_stage() {
    let dir = TempDir::new().unwrap();
    // the massless model closes its gap at lambda0 = 0
    let cfg = write_config(
        dir.path(),
        "cfg.json",
        &json!({"minus": {"kind": "qwz", "mass": 0.0}, "plus": {"kind": "qwz", "mass": 1.0}}),
    );
    let o = run("verify", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("stage `gap`"), "{}", stderr(&o));
}

#[test]
fn model_files_resolve_relative_to_config() {
    let dir = TempDir::new().unwrap();
    std::fs::create_dir(dir.path().join("models")).unwrap();
    write_config(dir.path(), "models/plus.json", &json!({"kind": "appendix", "epsilon": 0.3, "nu": 1}));
    let mut v = appendix_against_barrier();
    v["plus"] = json!("models/plus.json");
    let cfg = write_config(dir.path(), "cfg.json", &v);
    let out = dir.path().join("out");
    let o = run("spectral-flow", &cfg, &out, &["--width", "20", "--zeta-nodes", "80"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_json(&out.join("spectral_flow.json"))["flow"], json!(-1));
    let csv = std::fs::read_to_string(out.join("floquet.csv")).unwrap();
    assert!(csv.starts_with("zeta,eigenvalue,localization_weight"));
}

#[test]
fn effective_index_agrees_with_chern() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "cfg.json",
        &json!({"model": {"kind": "appendix", "epsilon": 0.3, "nu": 1}, "grid": 24}),
    );
    let out = dir.path().join("out");
    let o = run("effective-index", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = read_json(&out.join("effective_index.json"));
    assert_eq!(v["chern"], json!(-1));
    assert_eq!(v["consistent"], json!(true));
    assert_eq!(v["contour"]["chern"], json!(-1));
}

#[test]
fn crossing_diagnostic_writes_mask() {
    let dir = TempDir::new().unwrap();
    let mut v = appendix_against_barrier();
    v["grid"] = json!(8);
    v["crossing"] = json!({"x2_samples": 5});
    let cfg = write_config(dir.path(), "cfg.json", &v);
    let out = dir.path().join("out");
    let o = run("crossing-diagnostic", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let d = read_json(&out.join("crossing.json"));
    assert_eq!(d["mask"].as_array().unwrap().len(), 5);
    assert_eq!(d["n"], json!(1));
}

#[test]
fn conductivity_table_is_cached() {
    let dir = TempDir::new().unwrap();
    let mut v = appendix_against_barrier();
    v["conductivity"] = json!({"box": [24, 12], "sizes": [[32, 12]], "margin": 4});
    let cfg = write_config(dir.path(), "cfg.json", &v);
    let out = dir.path().join("out");
    let o = run("conductivity", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_json(&out.join("conductivity.json"));
    assert_eq!(r["nearest_int"], json!(-1));
    let csv = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let again = run("conductivity", &cfg, &out, &[]);
    assert!(stderr(&again).contains("cache hit"));
    assert_eq!(std::fs::read_to_string(out.join("convergence.csv")).unwrap(), csv);
}
