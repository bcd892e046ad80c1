use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_optomech"))
}

fn short_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("short.json");
    fs::write(
        &path,
        r#"{
  "name": "short",
  "params": {"omega_m": 1, "delta_a": 1, "kappa": 2, "gamma_m": 1e-3, "g": 1e-5, "Delta_c": -1, "gamma_a": 0.1, "G0": 1},
  "drive": {"Omega": 2, "components": [{"n": 1, "re": 3e4, "im": 0}, {"n": 0, "re": 15e4, "im": 0}, {"n": -1, "re": 3e4, "im": 0}]},
  "horizon_periods": 3,
  "window": {"from": 2, "to": 3},
  "samples_per_period": 16,
  "outputs": ["first_moments", "cm", "EN", "stability"],
  "variants": [{"label": "hot", "set": {"n_th": 10}}]
}"#,
    )
    .unwrap();
    path
}

#[test]
fn simulate_writes_tables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let out = dir.path().join("out");
    let status = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--jobs", "2"])
        .output()
        .map(|o| o.status)
        .unwrap();
    assert!(status.success());
    let measures = fs::read_to_string(out.join("measures.csv")).unwrap();
    let mut lines = measures.lines();
    assert_eq!(lines.next(), Some("t,EN,v11,v22,neff,r_db"));
    assert_eq!(lines.count(), 17);
    assert!(out.join("measures_hot.csv").exists());
    assert!(out.join("cm.csv").exists());
    let cm = fs::read_to_string(out.join("cm.csv")).unwrap();
    assert_eq!(cm.lines().next().unwrap().split(',').count(), 22);

    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["runs"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["runs"][1]["label"], "hot");
    assert_eq!(manifest["runs"][0]["stability"]["stable"], true);
    assert_eq!(manifest["config"]["name"], "short");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    for name in ["a", "b"] {
        let ok = bin()
            .args(["simulate", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join(name))
            .output()
            .map(|o| o.status)
            .unwrap()
            .success();
        assert!(ok);
    }
    for file in [
        "first_moments.csv",
        "cm.csv",
        "measures.csv",
        "stability.csv",
        "manifest.json",
    ] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let out = dir.path().join("env_out");
    let ok = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .env("OPTOMECH_OUT_DIR", &out)
        .output()
        .map(|o| o.status)
        .unwrap()
        .success();
    assert!(ok);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn engineer_drive_prints_wire_format() {
    let out = bin()
        .args(["engineer-drive", "--recipe", "fig6"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["Omega"], 2.0);
    let ns: Vec<i64> = v["components"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["n"].as_i64().unwrap())
        .collect();
    assert_eq!(ns, [2, 1, 0, -1]);
    // The emitted drive reparses as a DriveSpec.
    let spec: optomech::model::DriveSpec = serde_json::from_value(v).unwrap();
    assert_eq!(spec.max_harmonic(), 2);
}

#[test]
fn engineer_drive_requires_target() {
    let out = bin()
        .args(["engineer-drive", "--recipe", "fig2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stability_reports_json() {
    let out = bin()
        .args(["stability", "--recipe", "fig2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["stable"], true);
    assert!(v["margin"].as_f64().unwrap() < 0.0);
}

#[test]
fn sweep_writes_ordered_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    let mut recipe: Value =
        serde_json::from_str(optomech::recipes::source("fig4a").unwrap()).unwrap();
    recipe["sweep"][0]["points"] = 4.into();
    recipe["sweep"][1]["points"] = 5.into();
    fs::write(&cfg, recipe.to_string()).unwrap();
    let mut tables = Vec::new();
    for jobs in ["1", "3"] {
        let out = dir.path().join(format!("jobs{jobs}"));
        let ok = bin()
            .args(["sweep", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(["--jobs", jobs])
            .output()
            .map(|o| o.status)
            .unwrap()
            .success();
        assert!(ok);
        tables.push(fs::read_to_string(out.join("sweep.csv")).unwrap());
    }
    assert_eq!(tables[0], tables[1]);
    let lines: Vec<&str> = tables[0].lines().collect();
    assert_eq!(lines[0], "E,G0,status,EN");
    assert_eq!(lines.len(), 21);
    assert!(lines[1].starts_with("10000,0.1,"));
}

#[test]
fn wigner_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let out = dir.path().join("w");
    let ok = bin()
        .args(["wigner", "--config"])
        .arg(&cfg)
        .args(["--times", "2.5,3"])
        .arg("--out")
        .arg(&out)
        .output()
        .map(|o| o.status)
        .unwrap()
        .success();
    assert!(ok);
    let w = fs::read_to_string(out.join("wigner_1.csv")).unwrap();
    assert_eq!(w.lines().next(), Some("x,y,w"));
    assert_eq!(w.lines().count(), 1 + 201 * 201);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let t0 = manifest["runs"][0]["wigner"][0]["t"].as_f64().unwrap();
    assert!((t0 - 2.5 * std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn invalid_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"params": {"kappa": -1}, "outputs": []}"#).unwrap();
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid configuration"));
}

#[test]
fn empty_outputs_write_manifest_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.json");
    let mut recipe: Value =
        serde_json::from_str(optomech::recipes::source("fig2").unwrap()).unwrap();
    recipe["outputs"] = Value::Array(vec![]);
    fs::write(&cfg, recipe.to_string()).unwrap();
    let out = dir.path().join("o");
    assert!(bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .map(|o| o.status)
        .unwrap()
        .success());
    let entries: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(entries, ["manifest.json"]);
}

#[test]
fn recipes_listing() {
    let out = bin().arg("recipes").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 13);
    let one = bin().args(["recipes", "fig8a"]).output().unwrap();
    let cfg =
        optomech::config::ExperimentConfig::from_json(&String::from_utf8(one.stdout).unwrap())
            .unwrap();
    assert_eq!(cfg.name.as_deref(), Some("fig8a"));
}
