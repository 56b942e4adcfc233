use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).display().to_string()
}

fn spinlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinlab")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

#[test]
fn torsor_on_fixture_mesh() {
    let out = spinlab(&["torsor", "--mesh", &fixture("ico1280.off")]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["report"]["faces"], 1280);
    assert_eq!(r["report"]["chern"]["value"], 1);
    assert_eq!(r["report"]["iota_sq"][0][0], -1.0);
    assert_eq!(r["report"]["components"]["minus_one"], -1);
    let out = spinlab(&["torsor", "--mesh", &fixture("ico1280.off"), "--weight", "2", "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
}

#[test]
fn witten_sweep() {
    let out = spinlab(&["witten", "--model", &fixture("tame1d.json"), "--t-sweep", "4:2:6"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["report"]["sweep"].as_array().unwrap().len(), 6);
    assert_eq!(spinlab(&["witten", "--t-sweep", "4:x:6"]).status.code(), Some(2));
}

#[test]
fn fda_models() {
    let out = spinlab(&["fda", "--model", &fixture("sw_toy.json"), "--check", "all"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["report"]["hk3"]["c"], 1);
    let out = spinlab(&["fda", "--model", &fixture("broken_fda.json"), "--check", "axioms"]);
    assert_eq!(out.status.code(), Some(1));
    let failed: Vec<u64> = report(&out)["report"]["axioms"]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["axiom"].as_u64().unwrap())
        .collect();
    assert_eq!(failed, vec![5, 6, 8]);
    // a cochain is not a model
    assert_eq!(spinlab(&["fda", "--model", &fixture("rp2_cochain.json")]).status.code(), Some(2));
}

#[test]
fn gerbe_fixtures() {
    let out = spinlab(&["gerbe", "--nerve", &fixture("rp2_nerve.json"), "--cochain", &fixture("rp2_cochain.json"), "--trivialize"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["report"]["trivialization"]["kind"], "obstructed");
    assert_eq!(r["report"]["trivialization"]["cycle"].as_array().unwrap().len(), 10);
    let out = spinlab(&["gerbe", "--nerve", &fixture("tetra_nerve.json"), "--cochain", &fixture("trivial_cochain.json"), "--trivialize"]);
    assert_eq!(report(&out)["report"]["trivialization"]["kind"], "trivial");
    // a triple outside the nerve is a schema violation
    let out = spinlab(&["gerbe", "--nerve", &fixture("tetra_nerve.json"), "--cochain", &fixture("rp2_cochain.json")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn input_errors_exit_two() {
    assert_eq!(spinlab(&["torsor", "--mesh", "/nonexistent/mesh.off"]).status.code(), Some(2));
    assert_eq!(spinlab(&["torsor", "--mesh", &fixture("tame1d.json")]).status.code(), Some(2));
    assert_eq!(spinlab(&["frobnicate"]).status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_spinlab")).args(["quat-reps"]).env("SPINLAB_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn json_report_is_reproducible() {
    let dir = std::env::temp_dir().join(format!("spinlab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let paths = [dir.join("a.json"), dir.join("b.json")];
    for p in &paths {
        let out = Command::new(env!("CARGO_BIN_EXE_spinlab"))
            .args(["all", "--seed", "5", "--quiet", "--json", p.to_str().unwrap()])
            .env("SPINLAB_THREADS", "1")
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
    }
    let (a, b) = (std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());
    assert_eq!(a, b);
    let r: Value = serde_json::from_slice(&a).unwrap();
    for k in ["quat-reps", "oscillator", "witten", "torsor", "fda", "gerbe"] {
        assert_eq!(r["report"][k]["passed"], true, "{k}");
    }
    std::fs::remove_dir_all(&dir).unwrap();
}
