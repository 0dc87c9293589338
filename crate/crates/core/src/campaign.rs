//! End-to-end campaigns: abstract suite, concrete instances, simulation,
//! KPI evaluation, perturbation, and a summary table.
//!
//! Artifacts go under the output directory:
//!
//! ```text
//! abstract.json                      generated suite and blocked assignments
//! base/<id>.scenario.json            every base scenario,
//! base/<id>.trace.ndjson             its trace
//! base/<id>.report.json              and its KPI report
//! perturbed/<id>/search.log          one line per perturbed simulation
//! perturbed/<id>/<n>.scenario.json   every perturbed scenario and report;
//! perturbed/<id>/<n>.report.json     traces only for problematic runs
//! report.json, report.txt            the campaign report
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{parse_catalog, AbstractScenario, Catalog, CatalogError};
use crate::concretize::{instantiate, ConcreteScenario, ConcretizeError, ParameterMap};
use crate::covgen::GenerationState;
use crate::kpi::{evaluate, Kpi, KpiError, KpiReport, KpiThresholds};
use crate::mapsem::{parse_map, MapError, MapGraph};
use crate::perturb::{meta_search, PerturbError, SearchConfig, SimRunner, StopReason};
use crate::seed::child_seed;
use crate::simcore::{parse_controller, run, SimConfig, SimError, TimedTrace};

pub const REPORT_SCHEMA: &str = "covdrive.campaign.v1";

fn default_k() -> usize {
    2
}
fn default_num_abstract() -> usize {
    15
}
fn default_instantiations() -> usize {
    3
}
fn default_sim_budget() -> f64 {
    40.0
}
fn default_perturb_budget() -> usize {
    7
}
fn default_true() -> bool {
    true
}
fn default_controller() -> String {
    "baseline".into()
}

/// Campaign settings. Relative paths in a config file are resolved against
/// the file's directory by [`CampaignConfig::load`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub catalog: PathBuf,
    pub map: PathBuf,
    pub params: PathBuf,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_num_abstract")]
    pub num_abstract: usize,
    #[serde(default = "default_instantiations")]
    pub instantiations: usize,
    #[serde(default)]
    pub seed: u64,
    /// Simulated seconds per run.
    #[serde(default = "default_sim_budget")]
    pub sim_budget_s: f64,
    /// Simulations per base scenario for perturbation, the base run included.
    #[serde(default = "default_perturb_budget")]
    pub perturb_budget: usize,
    /// Perturb base scenarios that already violate a KPI too.
    #[serde(default = "default_true")]
    pub perturb_all: bool,
    #[serde(default)]
    pub thresholds: Option<PathBuf>,
    #[serde(default = "default_controller")]
    pub controller: String,
    #[serde(default)]
    pub search: SearchConfig,
    pub out: PathBuf,
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("catalog: {0}")]
    Catalog(#[from] CatalogError),
    #[error("map: {0}")]
    Map(#[from] MapError),
    #[error("parameter map: {0}")]
    Params(ConcretizeError),
    #[error("thresholds: {0}")]
    Thresholds(KpiError),
    #[error("{scenario}: {message}")]
    Run { scenario: String, message: String },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CampaignError {
    CampaignError::Io { path: path.to_path_buf(), message: e.to_string() }
}

fn read(path: &Path) -> Result<String, CampaignError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

impl CampaignConfig {
    pub fn parse(text: &str) -> Result<Self, CampaignError> {
        let cfg: CampaignConfig = serde_json::from_str(text).map_err(|e| CampaignError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CampaignError> {
        let mut cfg = Self::parse(&read(path)?)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.catalog, &mut cfg.map, &mut cfg.params, &mut cfg.out] {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        if let Some(t) = cfg.thresholds.as_mut().filter(|t| t.is_relative()) {
            *t = dir.join(&*t);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let positive = [
            ("k", self.k),
            ("num_abstract", self.num_abstract),
            ("instantiations", self.instantiations),
            ("perturb_budget", self.perturb_budget),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(CampaignError::Config(format!("{name} must be at least 1")));
        }
        if !(self.sim_budget_s.is_finite() && self.sim_budget_s > 0.0) {
            return Err(CampaignError::Config("sim_budget_s must be positive".into()));
        }
        parse_controller(&self.controller).map_err(CampaignError::Config)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Row {
    pub total: usize,
    pub problematic: usize,
    pub safety_critical: usize,
    pub performance: usize,
}

impl Row {
    pub fn add(&mut self, report: &KpiReport) {
        self.total += 1;
        self.problematic += report.problematic() as usize;
        self.safety_critical += report.safety_critical as usize;
        self.performance += report.performance as usize;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractEntry {
    pub index: usize,
    pub elements: std::collections::BTreeMap<String, String>,
    pub gain: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbSummary {
    pub simulations: usize,
    pub stop: StopReason,
    pub violations: Vec<String>,
    pub log: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub id: String,
    pub abstract_index: usize,
    pub seed: u64,
    pub scenario: String,
    pub trace: String,
    pub report: String,
    pub termination: String,
    pub safety_critical: bool,
    pub performance: bool,
    pub violations: Vec<Kpi>,
    pub perturbation: Option<PerturbSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedEntry {
    pub id: String,
    pub base: String,
    pub point: String,
    pub d: f64,
    pub scenario: String,
    pub report: String,
    pub trace: Option<String>,
    pub safety_critical: bool,
    pub performance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub id: String,
    pub abstract_index: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub schema: String,
    pub seed: u64,
    pub k: usize,
    pub controller: String,
    pub covered_tuples: usize,
    pub feasible_tuples: usize,
    pub abstract_scenarios: Vec<AbstractEntry>,
    /// Generated assignments no sub-map can realize.
    pub blocked: Vec<String>,
    pub base: Row,
    pub perturbed: Row,
    pub scenarios: Vec<ScenarioEntry>,
    pub perturbed_runs: Vec<PerturbedEntry>,
    pub failures: Vec<Failure>,
}

impl CampaignReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_table(&self) -> String {
        let header = ["set", "total", "problematic", "safety-critical", "performance"];
        let rows = [("base", self.base), ("perturbed", self.perturbed)];
        let mut out = format!(
            "{:<10} {:>6} {:>12} {:>16} {:>12}\n",
            header[0], header[1], header[2], header[3], header[4]
        );
        for (name, r) in rows {
            out += &format!(
                "{:<10} {:>6} {:>12} {:>16} {:>12}\n",
                name, r.total, r.problematic, r.safety_critical, r.performance
            );
        }
        out
    }
}

/// Parsed campaign inputs.
pub struct Inputs {
    pub catalog: Catalog,
    pub map: MapGraph,
    pub params: ParameterMap,
    pub thresholds: KpiThresholds,
}

impl Inputs {
    pub fn load(cfg: &CampaignConfig) -> Result<Self, CampaignError> {
        let catalog = parse_catalog(&read(&cfg.catalog)?)?;
        let map = parse_map(&read(&cfg.map)?)?;
        let params = ParameterMap::parse(&read(&cfg.params)?).map_err(CampaignError::Params)?;
        params.validate(&catalog).map_err(CampaignError::Params)?;
        let thresholds = match &cfg.thresholds {
            Some(p) => KpiThresholds::parse(&read(p)?).map_err(CampaignError::Thresholds)?,
            None => KpiThresholds::default(),
        };
        Ok(Inputs { catalog, map, params, thresholds })
    }
}

/// Seed of instance `j` of abstract scenario `i`.
pub fn instance_seed(campaign: u64, i: usize, j: usize) -> u64 {
    child_seed(child_seed(campaign, i as u64), j as u64)
}

pub fn instance_id(i: usize, j: usize) -> String {
    format!("a{i:02}-{j}")
}

/// Generates up to `n` realizable abstract scenarios. Assignments without a
/// matching sub-map are blocked and generation continues.
pub fn realizable_suite(
    inputs: &Inputs,
    k: usize,
    n: usize,
    seed: u64,
) -> Result<(Vec<(AbstractScenario, usize)>, Vec<AbstractScenario>, GenerationState), CampaignError> {
    let mut state = GenerationState::new(&inputs.catalog, k)?;
    let mut suite = Vec::new();
    let mut blocked = Vec::new();
    while suite.len() < n {
        let Some(e) = state.next_scenario() else { break };
        match instantiate(&e.scenario, &inputs.catalog, &inputs.map, &inputs.params, instance_seed(seed, suite.len(), 0)) {
            Err(ConcretizeError::NoMatchingSubMap(_)) => {
                state.add_blocking_constraint(&e.scenario);
                blocked.push(e.scenario);
            }
            _ => suite.push((e.scenario, e.gain)),
        }
    }
    Ok((suite, blocked, state))
}

/// Files written so far, for the partial-results manifest.
struct Sink {
    root: PathBuf,
}

impl Sink {
    fn write(&self, rel: &str, contents: &str, written: &mut Vec<String>) -> Result<(), CampaignError> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
        written.push(rel.to_string());
        Ok(())
    }
}

struct TaskOutput {
    entry: Option<ScenarioEntry>,
    failure: Option<Failure>,
    perturbed: Vec<PerturbedEntry>,
    written: Vec<String>,
    error: Option<CampaignError>,
}

fn run_error(scenario: &str, e: impl std::fmt::Display) -> CampaignError {
    CampaignError::Run { scenario: scenario.into(), message: e.to_string() }
}

struct Task<'a> {
    cfg: &'a CampaignConfig,
    inputs: &'a Inputs,
    sink: &'a Sink,
    abs: &'a AbstractScenario,
    i: usize,
    j: usize,
}

impl Task<'_> {
    fn execute(&self, out: &mut TaskOutput) -> Result<(), CampaignError> {
        let (cfg, inputs) = (self.cfg, self.inputs);
        let id = instance_id(self.i, self.j);
        let seed = instance_seed(cfg.seed, self.i, self.j);
        let mut sc = match instantiate(self.abs, &inputs.catalog, &inputs.map, &inputs.params, seed) {
            Ok(sc) => sc,
            Err(e) => {
                out.failure = Some(Failure { id, abstract_index: self.i, error: e.to_string() });
                return Ok(());
            }
        };
        sc.id = id.clone();
        let controller = parse_controller(&cfg.controller).map_err(CampaignError::Config)?;
        let sim_cfg = SimConfig::new(cfg.sim_budget_s);
        let mut ctl = controller.clone();
        let trace = run(&sc, &inputs.map, &mut ctl, sim_cfg).map_err(|e: SimError| run_error(&id, e))?;
        let report = evaluate(&trace, &sc, &inputs.thresholds).map_err(|e| run_error(&id, e))?;
        let rel = |ext: &str| format!("base/{id}.{ext}");
        self.sink.write(&rel("scenario.json"), &sc.to_json(), &mut out.written)?;
        self.sink.write(&rel("trace.ndjson"), &trace.to_ndjson(), &mut out.written)?;
        self.sink.write(&rel("report.json"), &report.to_json(), &mut out.written)?;

        let mut perturbation = None;
        if cfg.perturb_all || !report.problematic() {
            let mut sim = SimRunner { map: &inputs.map, controller, config: sim_cfg };
            let state = meta_search(&sc, &inputs.map, &mut sim, &inputs.thresholds, &cfg.search, cfg.perturb_budget)
                .map_err(|e: PerturbError| run_error(&id, e))?;
            let dir = format!("perturbed/{id}");
            let log: String = state.log.iter().map(|l| format!("{l}\n")).collect();
            self.sink.write(&format!("{dir}/search.log"), &log, &mut out.written)?;
            let traces: Vec<(&str, &TimedTrace)> = state
                .violations
                .iter()
                .chain(&state.performance)
                .map(|f| (f.run.scenario.id.as_str(), &f.run.trace))
                .collect();
            for (n, p) in state.runs.iter().enumerate() {
                let stem = format!("{dir}/{:03}", n + 1);
                self.sink.write(&format!("{stem}.scenario.json"), &p.scenario.to_json(), &mut out.written)?;
                self.sink.write(&format!("{stem}.report.json"), &p.report.to_json(), &mut out.written)?;
                let trace = match traces.iter().find(|(sid, _)| *sid == p.scenario.id) {
                    Some((_, t)) if p.report.problematic() => {
                        let path = format!("{stem}.trace.ndjson");
                        self.sink.write(&path, &t.to_ndjson(), &mut out.written)?;
                        Some(path)
                    }
                    _ => None,
                };
                out.perturbed.push(PerturbedEntry {
                    id: p.scenario.id.clone(),
                    base: id.clone(),
                    point: p.point.clone(),
                    d: p.d,
                    scenario: format!("{stem}.scenario.json"),
                    report: format!("{stem}.report.json"),
                    trace,
                    safety_critical: p.report.safety_critical,
                    performance: p.report.performance,
                });
            }
            perturbation = Some(PerturbSummary {
                simulations: state.simulations,
                stop: state.stop,
                violations: state.violations.iter().map(|f| f.run.scenario.id.clone()).collect(),
                log: format!("{dir}/search.log"),
            });
        }

        out.entry = Some(ScenarioEntry {
            id: id.clone(),
            abstract_index: self.i,
            seed,
            scenario: rel("scenario.json"),
            trace: rel("trace.ndjson"),
            report: rel("report.json"),
            termination: report.termination.to_string(),
            safety_critical: report.safety_critical,
            performance: report.performance,
            violations: report.violations(),
            perturbation,
        });
        Ok(())
    }
}

/// Runs a whole campaign and writes its artifacts under `cfg.out`. On a file
/// error the artifacts written so far are listed in `manifest.partial.json`.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignReport, CampaignError> {
    cfg.validate()?;
    let inputs = Inputs::load(cfg)?;
    run_campaign_with(cfg, &inputs)
}

pub fn run_campaign_with(cfg: &CampaignConfig, inputs: &Inputs) -> Result<CampaignReport, CampaignError> {
    let sink = Sink { root: cfg.out.clone() };
    clear_artifacts(&cfg.out)?;
    let mut written = Vec::new();
    let result = execute(cfg, inputs, &sink, &mut written);
    if result.is_err() {
        written.sort();
        let manifest = serde_json::to_string_pretty(&written).expect("list serializes") + "\n";
        let _ = fs::create_dir_all(&cfg.out).and_then(|_| fs::write(cfg.out.join("manifest.partial.json"), manifest));
    }
    result
}

/// Removes what an earlier campaign wrote to `out`, and nothing else.
fn clear_artifacts(out: &Path) -> Result<(), CampaignError> {
    for dir in ["base", "perturbed"] {
        let path = out.join(dir);
        if path.is_dir() {
            fs::remove_dir_all(&path).map_err(|e| io_err(&path, e))?;
        }
    }
    for file in ["abstract.json", "report.json", "report.txt", "manifest.partial.json"] {
        let path = out.join(file);
        if path.is_file() {
            fs::remove_file(&path).map_err(|e| io_err(&path, e))?;
        }
    }
    Ok(())
}

fn execute(
    cfg: &CampaignConfig,
    inputs: &Inputs,
    sink: &Sink,
    written: &mut Vec<String>,
) -> Result<CampaignReport, CampaignError> {
    let (suite, blocked, state) = realizable_suite(inputs, cfg.k, cfg.num_abstract, cfg.seed)?;
    let abstract_scenarios: Vec<AbstractEntry> = suite
        .iter()
        .enumerate()
        .map(|(index, (a, gain))| AbstractEntry { index, elements: a.named(&inputs.catalog), gain: *gain })
        .collect();
    let blocked: Vec<String> = blocked.iter().map(|a| a.describe(&inputs.catalog)).collect();
    let coverage = state.coverage();
    let summary = serde_json::json!({
        "abstract_scenarios": abstract_scenarios,
        "blocked": blocked,
        "covered_tuples": coverage.covered,
        "feasible_tuples": coverage.feasible,
    });
    sink.write("abstract.json", &(serde_json::to_string_pretty(&summary).expect("json") + "\n"), written)?;

    let jobs: Vec<(usize, usize)> =
        (0..suite.len()).flat_map(|i| (0..cfg.instantiations).map(move |j| (i, j))).collect();
    let outputs: Vec<TaskOutput> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let mut out = TaskOutput { entry: None, failure: None, perturbed: Vec::new(), written: Vec::new(), error: None };
            let task = Task { cfg, inputs, sink, abs: &suite[i].0, i, j };
            if let Err(e) = task.execute(&mut out) {
                out.error = Some(e);
            }
            out
        })
        .collect();

    let mut scenarios = Vec::new();
    let mut perturbed_runs = Vec::new();
    let mut failures = Vec::new();
    let mut first_error = None;
    for o in outputs {
        written.extend(o.written);
        if let (Some(e), None) = (o.error, &first_error) {
            first_error = Some(e);
        }
        scenarios.extend(o.entry);
        failures.extend(o.failure);
        perturbed_runs.extend(o.perturbed);
    }
    if let Some(e) = first_error {
        return Err(e);
    }

    let mut base = Row::default();
    let mut perturbed = Row::default();
    for s in &scenarios {
        base.total += 1;
        base.problematic += (s.safety_critical || s.performance) as usize;
        base.safety_critical += s.safety_critical as usize;
        base.performance += s.performance as usize;
    }
    for p in &perturbed_runs {
        perturbed.total += 1;
        perturbed.problematic += (p.safety_critical || p.performance) as usize;
        perturbed.safety_critical += p.safety_critical as usize;
        perturbed.performance += p.performance as usize;
    }
    let report = CampaignReport {
        schema: REPORT_SCHEMA.into(),
        seed: cfg.seed,
        k: cfg.k,
        controller: cfg.controller.clone(),
        covered_tuples: coverage.covered,
        feasible_tuples: coverage.feasible,
        abstract_scenarios,
        blocked,
        base,
        perturbed,
        scenarios,
        perturbed_runs,
        failures,
    };
    sink.write("report.json", &report.to_json(), written)?;
    sink.write("report.txt", &report.to_table(), written)?;
    Ok(report)
}

/// Recounts the rows from the KPI reports persisted under `out`.
pub fn recount(report: &CampaignReport, out: &Path) -> Result<(Row, Row), CampaignError> {
    let load = |rel: &str| -> Result<KpiReport, CampaignError> {
        let path = out.join(rel);
        KpiReport::from_json(&read(&path)?).map_err(|e| io_err(&path, e))
    };
    let mut base = Row::default();
    for s in &report.scenarios {
        base.add(&load(&s.report)?);
    }
    let mut perturbed = Row::default();
    for p in &report.perturbed_runs {
        perturbed.add(&load(&p.report)?);
    }
    Ok((base, perturbed))
}

/// Base scenario files persisted by a campaign, for replay.
pub fn load_scenario(out: &Path, entry: &ScenarioEntry) -> Result<ConcreteScenario, CampaignError> {
    let path = out.join(&entry.scenario);
    ConcreteScenario::from_json(&read(&path)?).map_err(|e| io_err(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn town_inputs() -> Inputs {
        Inputs {
            catalog: parse_catalog(fixtures::TOWN_CATALOG).unwrap(),
            map: MapGraph::from_file(fixtures::town()).unwrap(),
            params: ParameterMap::parse(fixtures::TOWN_PARAMS).unwrap(),
            thresholds: KpiThresholds::default(),
        }
    }

    fn config(out: &Path) -> CampaignConfig {
        CampaignConfig::parse(&format!(
            r#"{{"catalog": "c.json", "map": "m.json", "params": "p.json", "out": {:?}}}"#,
            out.display().to_string()
        ))
        .unwrap()
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = config(Path::new("out"));
        assert_eq!((cfg.k, cfg.num_abstract, cfg.instantiations), (2, 15, 3));
        assert!(cfg.perturb_all);
        assert_eq!(cfg.controller, "baseline");
        let bad = r#"{"catalog": "c", "map": "m", "params": "p", "out": "o", "instantiations": 0}"#;
        assert!(matches!(CampaignConfig::parse(bad), Err(CampaignError::Config(_))));
        let bad = r#"{"catalog": "c", "map": "m", "params": "p", "out": "o", "controller": "autopilot"}"#;
        assert!(matches!(CampaignConfig::parse(bad), Err(CampaignError::Config(_))));
        let bad = r#"{"catalog": "c", "map": "m", "params": "p", "out": "o", "colour": 1}"#;
        assert!(matches!(CampaignConfig::parse(bad), Err(CampaignError::Config(_))));
    }

    #[test]
    fn town_suite_is_realizable_at_default_size() {
        let inputs = town_inputs();
        let (suite, _, _) = realizable_suite(&inputs, 2, 15, 0).unwrap();
        assert_eq!(suite.len(), 15);
        for (a, gain) in &suite {
            assert!(*gain > 0);
            instantiate(a, &inputs.catalog, &inputs.map, &inputs.params, 0).unwrap();
        }
    }

    #[test]
    fn single_scenario_campaign() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path());
        cfg.num_abstract = 1;
        cfg.instantiations = 1;
        cfg.perturb_budget = 2;
        let inputs = town_inputs();
        let report = run_campaign_with(&cfg, &inputs).unwrap();
        assert_eq!(report.base.total, 1);
        assert!(report.perturbed.total <= 1);
        assert_eq!(recount(&report, dir.path()).unwrap(), (report.base, report.perturbed));
        let entry = &report.scenarios[0];
        assert_eq!(load_scenario(dir.path(), entry).unwrap().id, "a00-0");
        let table = fs::read_to_string(dir.path().join("report.txt")).unwrap();
        assert!(table.lines().nth(1).unwrap().starts_with("base"));
        assert_eq!(CampaignReport::from_json(&report.to_json()).unwrap(), report);
    }

    #[test]
    fn unwritable_output_leaves_a_manifest() {
        let dir = tempfile::tempdir().unwrap();
        // a file where the base/ directory should go
        fs::write(dir.path().join("base"), "").unwrap();
        let mut cfg = config(dir.path());
        cfg.num_abstract = 1;
        cfg.instantiations = 1;
        cfg.perturb_budget = 1;
        let err = run_campaign_with(&cfg, &town_inputs()).unwrap_err();
        assert!(matches!(err, CampaignError::Io { .. }), "{err}");
        let manifest = fs::read_to_string(dir.path().join("manifest.partial.json")).unwrap();
        assert!(manifest.contains("abstract.json"));
    }
}
