use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use vortonlab_cli::config::*;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vorton-lab"))
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(name)
}

fn run(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    match threads {
        Some(n) => cmd.env("VORTONLAB_THREADS", n.to_string()),
        None => cmd.env_remove("VORTONLAB_THREADS"),
    };
    cmd.output().unwrap()
}

fn write(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn round_trips<T: DeserializeOwned + Serialize + PartialEq + std::fmt::Debug>(file: &str) {
    let text = std::fs::read_to_string(preset(file)).unwrap();
    let a: T = parse_text(&text).unwrap_or_else(|e| panic!("{file}: {e:?}"));
    let b: T = parse(&serde_json::to_value(&a).unwrap()).unwrap();
    assert_eq!(a, b, "{file}");
}

#[test]
fn presets_parse_and_round_trip() {
    round_trips::<FieldConfig>("smoothed-dipole.json");
    round_trips::<FieldConfig>("euler-dipole.json");
    round_trips::<FlowmapConfig>("flow-from-past.json");
    round_trips::<ContoursConfig>("energy-contours.json");
    round_trips::<FieldConfig>("collapse-field.json");
    round_trips::<Reduce2Config>("mbar-sweep.json");
    round_trips::<SimulateConfig>("scatter.json");
    round_trips::<ConvergeConfig>("converge-eps.json");
    round_trips::<ConvergeConfig>("converge-eta.json");
    round_trips::<CloudcompareConfig>("cloud-compare.json");
}

#[test]
fn overrides_follow_dotted_paths() {
    let mut v = json!({ "kernel": { "eta": 1.0 }, "mbar": [[0, 1, 0]] });
    apply_override(&mut v, "kernel.eta=0.25").unwrap();
    apply_override(&mut v, "kernel.normalization=unit_mass").unwrap();
    apply_override(&mut v, "mbar.0.1=7").unwrap();
    apply_override(&mut v, "method={\"rk4_fixed\":{\"dt\":0.1}}").unwrap();
    apply_override(&mut v, "new.inner=true").unwrap();
    assert_eq!(
        v,
        json!({
            "kernel": { "eta": 0.25, "normalization": "unit_mass" },
            "mbar": [[0, 7, 0]],
            "method": { "rk4_fixed": { "dt": 0.1 } },
            "new": { "inner": true }
        })
    );
    assert!(apply_override(&mut v, "no_equals_sign").is_err());
    assert!(apply_override(&mut v, "mbar.5=1").is_err());
    assert!(apply_override(&mut v, "kernel.eta.deeper=1").is_err());
}

#[test]
fn schema_violation_reports_location_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(preset("scatter.json")).unwrap()).unwrap();
    cfg["kernel"]["etaa"] = json!(1.0);
    let path = write(dir.path(), "bad.json", &cfg);
    let out = run(&["simulate", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("kernel") && err.contains("etaa") && err.contains("line"), "{err}");
    assert!(!dir.path().join("manifest.json").exists());

    let out =
        run(&["simulate", "--config", preset("scatter.json").to_str().unwrap(), "--set", "kernel.eta=wide"], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kernel.eta"));
}

#[test]
fn argument_errors_exit_2() {
    assert_eq!(run(&["simulate"], None).status.code(), Some(2));
    assert_eq!(run(&["teleport", "--config", "x.json"], None).status.code(), Some(2));
    assert_eq!(run(&["check"], Some(0)).status.code(), Some(2));
}

#[test]
fn manifest_lists_every_artifact_with_its_hash() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["reduce2", "--config", preset("mbar-sweep.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert_eq!(m["status"], "ok");
    assert_eq!(m["command"], "reduce2");
    assert_eq!(m["config"]["capture_radius"], 1e-3);
    let artifacts = m["artifacts"].as_array().unwrap();
    assert_eq!(artifacts.len(), 12);
    for a in artifacts {
        let bytes = std::fs::read(dir.path().join(a["file"].as_str().unwrap())).unwrap();
        assert_eq!(a["bytes"], bytes.len());
        let hash: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(a["sha256"], hash);
    }
    // the sweep holds both kinds of orbit
    let runs: Value = serde_json::from_slice(&std::fs::read(dir.path().join("reduce2.json")).unwrap()).unwrap();
    let captured: Vec<bool> = runs.as_array().unwrap().iter().map(|r| r["captured"].as_bool().unwrap()).collect();
    assert!(captured.contains(&true) && captured.contains(&false), "{captured:?}");
}

#[test]
fn near_collision_writes_partial_artifacts_and_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "kernel": { "n": 3, "eta": 1.0, "normalization": "unit_peak" },
        "vortons": {
            "positions": [[-2.5, 0.0, 0.0], [2.5, 0.0, 0.0]],
            "momenta": [[1.5, -0.25, 0.0], [-1.5, 0.25, 0.0]]
        },
        "duration": 40.0
    });
    let path = write(dir.path(), "collide.json", &cfg);
    let out_dir = dir.path().join("out");
    let out = run(&["simulate", "--config", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(3));
    let m = manifest(&out_dir);
    assert_eq!(m["status"], "aborted");
    assert!(m["reason"].as_str().unwrap().contains("near collision"));
    let csv = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let last_t: f64 = csv.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
    assert!(last_t > 1.0 && last_t < 40.0);
}

#[test]
fn check_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["check", "--out", dir.path().to_str().unwrap(), "--set", "samples=200"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(manifest(dir.path())["config"]["samples"], 200);
    assert!(std::fs::read_to_string(dir.path().join("check.csv")).unwrap().lines().all(|l| !l.ends_with("false")));
}

#[test]
fn collapse_field_preset_records_origin_structure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["field", "--config", preset("collapse-field.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    let c: Value = serde_json::from_slice(&std::fs::read(dir.path().join("collapse.json")).unwrap()).unwrap();
    assert!(c["trace"].as_f64().unwrap().abs() < 1e-10);
    let header = std::fs::read_to_string(dir.path().join("field.csv")).unwrap();
    assert!(header.starts_with("x,y,z,v1,v2,v3\n"));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let cases = [
        ("simulate", "scatter.json", "trajectory.csv"),
        ("flowmap", "flow-from-past.json", "flowmap.csv"),
        ("contours", "energy-contours.json", "contours.csv"),
    ];
    for (command, file, artifact) in cases {
        let outputs: Vec<Vec<u8>> = [1, 4, 8]
            .iter()
            .map(|&n| {
                let dir = tempfile::tempdir().unwrap();
                let out = run(
                    &[command, "--config", preset(file).to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
                    Some(n),
                );
                assert_eq!(out.status.code(), Some(0));
                assert_eq!(manifest(dir.path())["threads"], n);
                std::fs::read(dir.path().join(artifact)).unwrap()
            })
            .collect();
        assert!(outputs.windows(2).all(|w| w[0] == w[1]), "{command}");
    }
}
