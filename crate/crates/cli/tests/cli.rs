use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;
use treesmith::splitting::standard_pair;

fn treesmith(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treesmith")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// A fresh scratch directory under the system temp dir.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("treesmith-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

/// Writes the standard `T`, `T′` and the swapped intersecting curve.
fn curve_files(dir: &std::path::Path) -> (String, String, String) {
    let (t, t2, _) = standard_pair(4, None).unwrap();
    let swap = treesmith::Automorphism::permutation(&[2, 1, 0, 3]).unwrap();
    let s = t.with_marking(swap);
    let mut paths = Vec::new();
    for (name, c) in [("t", &t), ("t2", &t2), ("s", &s)] {
        let p = dir.join(format!("{name}.json"));
        fs::write(&p, serde_json::to_string(&c.to_spec()).unwrap()).unwrap();
        paths.push(p.to_string_lossy().into_owned());
    }
    (paths[0].clone(), paths[1].clone(), paths[2].clone())
}

#[test]
fn intersect_reports_components() {
    let out = treesmith(&["intersect", "--basis", "ab", "--left", "aa", "--right", "aaa"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["components"], 1);
    assert_eq!(v["ranks"], serde_json::json!([1]));
    assert_eq!(v["letters"], serde_json::json!(["a"]));

    let out = treesmith(&["intersect", "--basis", "awtv", "--left", "a,w", "--right", "t"]);
    assert_eq!(json(&out)["components"], 0);
}

#[test]
fn lengths_on_the_standard_curve() {
    let dir = scratch("lengths");
    let (t, t2, _) = curve_files(&dir);
    let out = treesmith(&["lengths", "--curve", &t, "a", "t", "taT", "tatA", "tt", "tv", ""]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out), serde_json::json!([0, 1, 0, 2, 2, 1, 0]));
    let out = treesmith(&["lengths", "--curve", &t2, "v", "t", "vwV"]);
    assert_eq!(json(&out), serde_json::json!([1, 0, 0]));
    let bad = treesmith(&["lengths", "--curve", &t, "x"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn twist_lab_trace_and_verdict() {
    let dir = scratch("twist");
    let (t, t2, s) = curve_files(&dir);
    let out = treesmith(&["twist-lab", "--source", &t, "--start", &s, "--k-max", "30"]);
    assert_eq!(out.status.code(), Some(1), "30 twists cannot reach 1/1000");
    let v = json(&out);
    assert_eq!(v["trace"].as_array().unwrap().len(), 31);
    assert_eq!(v["verdict"], "not converged");
    assert_eq!(v["test_set"].as_array().unwrap().len(), 20);

    let loose = treesmith(&["twist-lab", "--source", &t, "--start", &s, "--k-max", "30", "--tol", "1/10"]);
    assert!(loose.status.success());
    assert!(json(&loose)["k_found"].as_u64().unwrap() <= 30);

    let disjoint = treesmith(&["twist-lab", "--source", &t, "--start", &t2]);
    assert_eq!(disjoint.status.code(), Some(2));
}

#[test]
fn resolve_reports_families() {
    let dir = scratch("resolve");
    let (t, _, _) = curve_files(&dir);
    let out = treesmith(&["resolve", "--curve", &t, "--n", "2"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["chart_volume"], 14);
    let fams = v["families"].as_array().unwrap();
    assert!(!fams.is_empty());
    for f in fams {
        assert!(f["width"].is_string() && f["annular"].is_boolean() && f["leaf_count"].is_u64());
    }
}

#[test]
fn construct_writes_report_and_resumes() {
    let dir = scratch("construct");
    let config = dir.join("c.toml");
    fs::write(&config, "depth_K = 1\nk_max = 1000\n").unwrap();
    let out = dir.join("report.json");
    let (c, o) = (config.to_str().unwrap(), out.to_str().unwrap());
    let run = treesmith(&["construct", "--config", c, "--out", o]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["schema"], "treesmith/1");
    assert_eq!(report["stages"].as_array().unwrap().len(), 1);
    let state = dir.join("report.json.stage-1.json");
    assert!(state.exists());

    let first = fs::read_to_string(&out).unwrap();
    let resumed = treesmith(&["construct", "--config", c, "--out", o, "--stage", "1"]);
    assert!(resumed.status.success());
    assert_eq!(fs::read_to_string(&out).unwrap(), first);

    let wrong = treesmith(&["construct", "--config", c, "--out", o, "--stage", "2"]);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn construct_rejects_bad_config() {
    let dir = scratch("badconfig");
    let config = dir.join("c.toml");
    fs::write(&config, "random_u_len = 3\n").unwrap();
    let out = dir.join("r.json");
    let run = treesmith(&["construct", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("random_u_len"));
}
