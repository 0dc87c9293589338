use std::fs;
use std::path::{Path, PathBuf};

use covdrive_core::campaign::{load_scenario, recount, run_campaign, CampaignConfig, Inputs};
use covdrive_core::concretize::{instantiate, ConcreteScenario, ParameterMap};
use covdrive_core::fixtures;
use covdrive_core::kpi::{evaluate, KpiReport, KpiThresholds};
use covdrive_core::simcore::{parse_controller, run, SimConfig, TimedTrace};
use covdrive_core::{generate_suite, parse_catalog, MapGraph, SuiteLimit};

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

#[test]
fn bundled_assets_match_fixtures() {
    for (name, contents) in fixtures::all_assets() {
        let on_disk = fs::read_to_string(assets().join(&name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(on_disk, contents, "{name} is stale; regenerate with `covdrive fixtures --out assets`");
    }
}

#[test]
fn bundled_campaign_config_loads() {
    let cfg = CampaignConfig::load(&assets().join("campaign.json")).unwrap();
    assert!(cfg.catalog.is_absolute() && cfg.catalog.ends_with("catalog_town.json"));
    let inputs = Inputs::load(&cfg).unwrap();
    assert_eq!(inputs.catalog.categories().len(), 6);
    assert_eq!(inputs.thresholds, KpiThresholds::default());
}

#[test]
fn stages_compose_and_round_trip() {
    let catalog = parse_catalog(fixtures::TOWN_CATALOG).unwrap();
    let map = MapGraph::from_file(fixtures::town()).unwrap();
    let params = ParameterMap::parse(fixtures::TOWN_PARAMS).unwrap();
    let th = KpiThresholds::default();
    let suite = generate_suite(&catalog, 2, SuiteLimit::Count(4)).unwrap();
    assert_eq!(suite.len(), 4);

    for (i, e) in suite.iter().enumerate() {
        let sc = instantiate(&e.scenario, &catalog, &map, &params, i as u64).unwrap();
        let sc2 = ConcreteScenario::from_json(&sc.to_json()).unwrap();
        assert_eq!(sc2, sc);

        let mut ctl = parse_controller("baseline").unwrap();
        let trace = run(&sc, &map, &mut ctl, SimConfig::new(40.0)).unwrap();
        let back = TimedTrace::from_ndjson(&trace.to_ndjson()).unwrap();
        assert_eq!(back.to_ndjson(), trace.to_ndjson());

        let report = evaluate(&back, &sc2, &th).unwrap();
        assert_eq!(report, evaluate(&trace, &sc, &th).unwrap());
        assert_eq!(KpiReport::from_json(&report.to_json()).unwrap(), report);

        // a second run from a fresh controller is the same episode
        let mut again = parse_controller("baseline").unwrap();
        assert_eq!(run(&sc, &map, &mut again, SimConfig::new(40.0)).unwrap(), trace);
    }
}

#[test]
fn small_campaign_replays_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = CampaignConfig::load(&assets().join("campaign.json")).unwrap();
    cfg.out = dir.path().to_path_buf();
    cfg.num_abstract = 3;
    cfg.instantiations = 2;
    cfg.perturb_budget = 3;
    let report = run_campaign(&cfg).unwrap();
    assert_eq!(report.base.total, 6);
    assert!(report.failures.is_empty());
    assert_eq!(recount(&report, dir.path()).unwrap(), (report.base, report.perturbed));

    let inputs = Inputs::load(&cfg).unwrap();
    for entry in &report.scenarios {
        let sc = load_scenario(dir.path(), entry).unwrap();
        let mut ctl = parse_controller(&cfg.controller).unwrap();
        let trace = run(&sc, &inputs.map, &mut ctl, SimConfig::new(cfg.sim_budget_s)).unwrap();
        let stored = fs::read_to_string(dir.path().join(&entry.trace)).unwrap();
        assert_eq!(trace.to_ndjson(), stored, "{}", entry.id);
        let r = evaluate(&trace, &sc, &inputs.thresholds).unwrap();
        assert_eq!(r.to_json(), fs::read_to_string(dir.path().join(&entry.report)).unwrap());
        assert_eq!(r.violations(), entry.violations);
    }
    for p in &report.perturbed_runs {
        assert!(dir.path().join(&p.scenario).is_file());
        assert_eq!(p.trace.is_some(), p.safety_critical || p.performance, "{}", p.id);
    }
    assert!(dir.path().join("report.txt").is_file());
}

#[test]
fn rerun_into_same_directory_replaces_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = CampaignConfig::load(&assets().join("campaign.json")).unwrap();
    cfg.out = dir.path().to_path_buf();
    cfg.num_abstract = 2;
    cfg.instantiations = 1;
    cfg.perturb_budget = 2;
    let keep = dir.path().join("notes.txt");
    fs::write(&keep, "mine").unwrap();
    fs::create_dir_all(dir.path().join("base")).unwrap();
    fs::write(dir.path().join("base/stale.report.json"), "{}").unwrap();

    let first = run_campaign(&cfg).unwrap();
    assert!(!dir.path().join("base/stale.report.json").exists());
    assert_eq!(fs::read_to_string(&keep).unwrap(), "mine");
    let second = run_campaign(&cfg).unwrap();
    assert_eq!(first, second);
}

#[test]
fn bad_inputs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = CampaignConfig::load(&assets().join("campaign.json")).unwrap();
    cfg.out = dir.path().to_path_buf();
    cfg.map = dir.path().join("missing.json");
    let err = Inputs::load(&cfg).err().expect("missing map is an error").to_string();
    assert!(err.contains("missing.json"), "{err}");

    fs::write(dir.path().join("broken.json"), "{\"categories\": [").unwrap();
    cfg.map = assets().join("map_town.json");
    cfg.catalog = dir.path().join("broken.json");
    assert!(Inputs::load(&cfg).is_err());
}
