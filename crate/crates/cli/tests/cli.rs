use std::path::Path;
use std::process::{Command, Output};

fn slodowy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slodowy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_all_passes_for_n2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = slodowy(&["verify-all", "--n", "2", "--seed", "1", "--samples", "100", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out);
    assert_eq!(r["verdict"], "pass");
    assert_eq!(r["environment"]["n"], 2);
    assert!(r["records"].as_array().unwrap().iter().all(|c| c["anchor"].as_str().is_some_and(|a| !a.is_empty())));
}

#[test]
fn reports_are_deterministic() {
    let a = slodowy(&["verify-all", "--n", "3", "--seed", "9", "--samples", "10"]);
    let b = slodowy(&["verify-all", "--n", "3", "--seed", "9", "--samples", "10"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn tolerance_override_forces_failure() {
    let o = slodowy(&["verify-all", "--n", "2", "--samples", "10", "--tol.bracket=1e-20"]);
    assert_eq!(o.status.code(), Some(1));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["verdict"], "fail");
    assert_eq!(r["tolerances"]["bracket"], 1e-20);
    let o = slodowy(&["verify-all", "--n", "2", "--samples", "10", "--tol.bracket", "1e-20"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn fiber_surface() {
    let o = slodowy(&["fiber", "--n", "3", "--preset", "neg-xi"]);
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["kind"], "nilpotent_type");
    assert_eq!(r["component_count_theoretical"], 3);

    let o = slodowy(&["fiber", "--n", "3", "--preset", "zero"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not regular"));

    let x = r#"{"n":2,"re":[[1.0,0.0],[0.0,-1.0]],"im":[[0.0,0.0],[0.0,0.0]]}"#;
    let o = slodowy(&["fiber", "--n", "2", "--x", x]);
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["kind"], "torus");
    assert_eq!(r["fiber_dim"], 1);

    let o = slodowy(&["fiber", "--n", "2", "--x", "{not json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn systems_and_flow() {
    let dir = tempfile::tempdir().unwrap();
    let mf = dir.path().join("mf.json");
    let o = slodowy(&["mf", "--n", "3", "--random", "--samples", "20", "--out", mf.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&mf);
    assert_eq!(r["manifest"]["count"], 5);
    assert!(r["commutativity"]["max_upstairs_scaled"].as_f64().unwrap() <= 1e-8);

    let o = slodowy(&["rank-system", "--n", "2", "--samples", "20"]);
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["manifest"]["count"], 3);
    assert_eq!(r["manifest"]["declared_rank"], 1);

    let mf2 = dir.path().join("mf2.json");
    assert_eq!(slodowy(&["mf", "--n", "2", "--random", "--samples", "10", "--out", mf2.to_str().unwrap()]).status.code(), Some(0));
    let manifest = dir.path().join("mf2.manifest.json");
    assert!(manifest.exists());
    let flow = dir.path().join("flow.json");
    let o = slodowy(&["flow", "--manifest", manifest.to_str().unwrap(), "--out", flow.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&flow);
    for f in r["flows"].as_array().unwrap() {
        assert!(f["max_drift"].as_f64().unwrap() <= 1e-6);
    }
    assert!(dir.path().join("flow.jsonl").exists());
    assert!(std::fs::read_to_string(dir.path().join("flow.csv")).unwrap().starts_with("t,re_0,im_0"));

    let bad = r#"{"n":2,"re":[[0.0,1.0],[0.0,0.0]],"im":[[0.0,0.0],[0.0,0.0]]}"#;
    assert_eq!(slodowy(&["mf", "--n", "2", "--beta", bad]).status.code(), Some(1));
}

#[test]
fn config_file_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "n = 3\nform = killing\ntol.bracket = 1e-9\n").unwrap();
    let o = slodowy(&["info", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["n"], 3);
    assert_eq!(r["form"], "killing_form");
    assert_eq!(r["mf_count"], 5);
    assert_eq!(r["tolerances"]["bracket"], 1e-9);

    assert_eq!(slodowy(&["info", "--n", "9"]).status.code(), Some(2));
    assert_eq!(slodowy(&["info", "--tol.nonsense=1"]).status.code(), Some(2));
    assert_eq!(slodowy(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(slodowy(&["info", "--form", "cartan"]).status.code(), Some(2));
}
