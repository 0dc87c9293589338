use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn covdrive(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covdrive")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = covdrive(args, cwd);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str], cwd: &Path) -> String {
    let out = covdrive(args, cwd);
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8(out.stderr).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn single_stages_chain_together() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["fixtures", "--out", "assets"], d);
    assert!(d.join("assets/map_town.json").is_file());

    let msg = ok(&["generate", "--catalog", "assets/catalog_example.json", "--num", "full", "--out", "abs"], d);
    assert!(msg.starts_with("9 scenarios, 20/20"), "{msg}");
    let cov = json(&d.join("abs/coverage.json"));
    assert_eq!((cov["covered"].as_u64(), cov["feasible"].as_u64()), (Some(20), Some(20)));
    assert_eq!(cov["subsets"].as_array().unwrap().len(), 3);
    assert!(d.join("abs/abstract_009.json").is_file() && !d.join("abs/abstract_010.json").exists());

    ok(&["generate", "--catalog", "assets/catalog_town.json", "--num", "3", "--strategy", "greedy", "--out", "town"], d);
    let first = json(&d.join("town/abstract_001.json"));
    assert!(first["gain"].as_u64().unwrap() > 0);

    ok(
        &[
            "instantiate", "--abstract", "town/abstract_001.json", "--catalog", "assets/catalog_town.json",
            "--map", "assets/map_town.json", "--params", "assets/params_town.json", "--seed", "3",
            "--out", "run/s.json",
        ],
        d,
    );
    let sc = json(&d.join("run/s.json"));
    assert_eq!(sc["abstract"], first["elements"]);

    let msg = ok(&["simulate", "--scenario", "run/s.json", "--map", "assets/map_town.json", "--trace-out", "run/t.ndjson"], d);
    assert!(msg.contains("frames"), "{msg}");
    let trace = fs::read_to_string(d.join("run/t.ndjson")).unwrap();
    assert!(trace.lines().next().unwrap().contains("\"type\":\"header\""));
    assert!(trace.lines().last().unwrap().contains("\"type\":\"end\""));

    let msg = ok(&["evaluate", "--trace", "run/t.ndjson", "--scenario", "run/s.json", "--report-out", "run/r.json"], d);
    assert!(msg.starts_with("safety-critical:"), "{msg}");
    assert_eq!(json(&d.join("run/r.json"))["kpis"].as_array().unwrap().len(), 7);

    fs::write(d.join("strict.json"), r#"{"lateral_jerk": 0.01, "harsh_brake": -0.01, "harsh_accel": 0.01}"#).unwrap();
    ok(
        &["evaluate", "--trace", "run/t.ndjson", "--scenario", "run/s.json", "--thresholds", "strict.json",
          "--report-out", "run/strict.json"],
        d,
    );
    assert_eq!(json(&d.join("run/strict.json"))["performance"], true);

    ok(
        &["perturb", "--scenario", "run/s.json", "--map", "assets/map_town.json", "--budget", "3", "--out", "pert"],
        d,
    );
    let summary = json(&d.join("pert/summary.json"));
    assert!(summary["simulations"].as_u64().unwrap() <= 3);
    assert!(d.join("pert/search.log").is_file());
}

#[test]
fn classify_reports_junction_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["fixtures", "--out", "."], d);
    let t = ok(&["classify", "--map", "map_skewed_t.json"], d);
    assert!(t.starts_with("J_5\tT_SHAPED\t[181.7, 90.1, 88.2]"), "{t}");
    let y = ok(&["classify", "--map", "map_y.json", "--junction", "J_Y"], d);
    assert!(y.contains("Y_SHAPED"), "{y}");
    // a tolerance too tight for the skewed gaps
    let loose = ok(&["classify", "--map", "map_skewed_t.json", "--tolerance", "1"], d);
    assert!(loose.contains("OTHER"), "{loose}");
}

#[test]
fn campaign_writes_report_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["fixtures", "--out", "."], d);
    let cfg = r#"{"catalog": "catalog_town.json", "map": "map_town.json", "params": "params_town.json",
                  "num_abstract": 2, "instantiations": 1, "perturb_budget": 2, "seed": 1, "out": "out"}"#;
    fs::write(d.join("campaign.json"), cfg).unwrap();
    let table = ok(&["campaign", "--config", "campaign.json"], d);
    assert!(table.lines().any(|l| l.starts_with("base")), "{table}");
    let report = json(&d.join("out/report.json"));
    assert_eq!(report["base"]["total"], 2);
    assert!(d.join("out/abstract.json").is_file());
}

#[test]
fn bad_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["fixtures", "--out", "."], d);
    let e = fails(&["generate", "--catalog", "nope.json", "--out", "x"], d);
    assert!(e.contains("nope.json"), "{e}");
    let e = fails(&["generate", "--catalog", "catalog_example.json", "--num", "lots", "--out", "x"], d);
    assert!(e.contains("--num"), "{e}");
    fs::write(d.join("bad_catalog.json"), r#"{"categories": [{"name": "a", "elements": ["x"]}]}"#).unwrap();
    fails(&["generate", "--catalog", "bad_catalog.json", "--out", "x"], d);
    fs::write(d.join("s.json"), "not json").unwrap();
    fails(&["simulate", "--scenario", "s.json", "--map", "map_town.json", "--trace-out", "t"], d);
    fs::write(d.join("c.json"), r#"{"catalog": "c", "map": "m", "params": "p", "out": "o", "controller": "x"}"#)
        .unwrap();
    let e = fails(&["campaign", "--config", "c.json"], d);
    assert!(e.contains("controller"), "{e}");
    fails(&["classify", "--map", "catalog_example.json"], d);
}
