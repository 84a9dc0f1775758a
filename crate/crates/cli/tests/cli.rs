use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn verify(args: &[&str], jobs: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_verify"));
    cmd.args(args).env_remove("VERIFY_JOBS");
    if let Some(j) = jobs {
        cmd.env("VERIFY_JOBS", j);
    }
    cmd.output().expect("running verify")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const MAXWELL: &str = r#"{
  "kernel": {"n": 2, "s": 0.5, "gamma": 0.0, "normalization": "plain"},
  "distributions": [{"name": "maxwell", "kind": "maxwellian", "n": 2}],
  "tasks": [
    {"task": "ellipticity", "distribution": "maxwell", "condition": "nondegeneracy", "r_list": [0.5, 1.0], "v_grid": [[0.0, 0.0], [1.5, 0.0]]},
    {"task": "kinetic_norms", "field": {"kind": "velocity_bump", "center": [0.5, 0.0], "width": 1.0},
     "norm": {"n": 2, "s": 0.5, "alpha": 0.5, "p": 0.8, "window": [0.0, 3.0]}, "epsilons": [0.5, 0.1],
     "plan": {"centers": 4, "points_per_cylinder": 3}},
    {"task": "giusti", "function": {"kind": "power", "b": 0.5, "shift": 0.1}, "gamma": 1.0, "a": 1.0, "t1": 0.0, "t2": 1.0, "samples": 60}
  ],
  "seed": 5
}"#;

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn maxwellian_run_passes_and_reports_lambda() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", MAXWELL);
    let out = tmp.path().join("out");
    let o = verify(&["run", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["schema_version"], 1);
    let lambda = r["tasks"][0]["metrics"]["lambda_meas"].as_f64().unwrap();
    assert!(lambda > 0.0);
    for t in r["tasks"].as_array().unwrap() {
        let keys: Vec<&str> = t.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        assert_eq!(keys, ["artifacts", "metrics", "name", "status"]);
        let file = t["artifacts"][0].as_str().unwrap();
        assert!(out.join(file).exists());
    }
    let top: Vec<&str> = r.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    assert_eq!(top, ["params", "schema_version", "tasks"]);
    assert!(out.join("run_meta.json").exists());
}

#[test]
fn runs_are_byte_identical_across_job_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", MAXWELL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(verify(&["run", &cfg, "--out", a.to_str().unwrap(), "--jobs", "1"], None).status.code(), Some(0));
    assert_eq!(verify(&["run", &cfg, "--out", b.to_str().unwrap()], Some("3")).status.code(), Some(0));
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
    assert_eq!(fs::read(a.join("01_kinetic_norms.csv")).unwrap(), fs::read(b.join("01_kinetic_norms.csv")).unwrap());
}

#[test]
fn squeezed_hydro_check_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"distributions": [{"name": "thin", "kind": "squeezed_gaussian", "eps": 0.01, "axis": [1.0, 0.0]}],
            "tasks": [{"task": "hydro_check", "distribution": "thin", "thresholds": {"m0": 0.5, "M0": 2.0, "p0": 0.5, "Mq": 100.0, "q": 4.0}}]}"#,
    );
    let out = tmp.path().join("out");
    assert_eq!(verify(&["run", &cfg, "--out", out.to_str().unwrap()], None).status.code(), Some(2));
    let r = report(&out);
    assert_eq!(r["tasks"][0]["status"], "fail");
    assert_eq!(r["tasks"][0]["metrics"]["failures"], serde_json::json!(["two_direction_pressure"]));
}

#[test]
fn empty_task_list_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"tasks": []}"#);
    let out = tmp.path().join("out");
    assert_eq!(verify(&["run", &cfg, "--out", out.to_str().unwrap()], None).status.code(), Some(0));
    assert_eq!(report(&out)["tasks"], serde_json::json!([]));
}

#[test]
fn validate_reports_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = write(tmp.path(), "ok.json", MAXWELL);
    let o = verify(&["validate", &ok], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stderr.is_empty());

    let soft = MAXWELL.replace(r#""s": 0.5, "gamma": 0.0"#, r#""s": 0.2, "gamma": -0.5"#);
    let o = verify(&["validate", &write(tmp.path(), "soft.json", &soft)], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("admissibility"));

    let unknown = MAXWELL.replace(r#""distribution": "maxwell""#, r#""distribution": "nobody""#);
    let o = verify(&["validate", &write(tmp.path(), "unknown.json", &unknown)], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown distribution 'nobody'"));

    let o = verify(&["validate", &write(tmp.path(), "bad.json", "{\n  \"tasks\": [\n    {\"task\": \"nope\"}\n  ]\n}")], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn weight_range_is_checked_for_kinetic_norms() {
    let tmp = tempfile::tempdir().unwrap();
    // n = 2, gamma + 2s = 1: p must lie in (alpha, 1) or above 3
    let bad = MAXWELL.replace(r#""p": 0.8"#, r#""p": 2.0"#);
    let o = verify(&["validate", &write(tmp.path(), "p.json", &bad)], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("norm.p"));
}

#[test]
fn failing_task_does_not_stop_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"distributions": [{"name": "m", "kind": "maxwellian", "n": 2}],
            "quad": {"max_evals": 20},
            "tasks": [{"task": "identities"},
                      {"task": "giusti", "function": {"kind": "zero"}, "gamma": 1.0, "a": 0.0, "t1": 0.0, "t2": 1.0}]}"#,
    );
    let out = tmp.path().join("out");
    let o = verify(&["run", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["tasks"][0]["status"], "error");
    assert!(r["tasks"][0]["metrics"]["error"].as_str().unwrap().contains("budget"));
    assert_eq!(r["tasks"][1]["status"], "pass");
}

#[test]
fn list_tasks_names_every_kind() {
    let o = verify(&["list-tasks"], None);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for kind in ["observables", "hydro_check", "tube_scan", "ellipticity", "uniformity", "landau", "identities", "counterexample_sweep", "kinetic_norms", "giusti"] {
        assert!(text.lines().any(|l| l.starts_with(kind)), "{kind}");
    }
}
