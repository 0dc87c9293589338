use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use covdrive_core::campaign::{run_campaign, CampaignConfig};
use covdrive_core::concretize::{instantiate, ConcreteScenario, ParameterMap};
use covdrive_core::covgen::generate_suite_with;
use covdrive_core::fixtures;
use covdrive_core::kpi::{evaluate, KpiThresholds};
use covdrive_core::mapsem::DEFAULT_TOLERANCE_DEG;
use covdrive_core::perturb::{meta_search, SearchConfig, SimRunner};
use covdrive_core::simcore::{parse_controller, run, SimConfig, TimedTrace};
use covdrive_core::{parse_catalog, parse_map, AbstractScenario, Catalog, MapGraph, Strategy, SuiteLimit};

#[derive(Parser)]
#[command(name = "covdrive", version, about = "Coverage-driven scenario generation and testing for driving planners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Exact,
    Greedy,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an abstract scenario suite with k-way coverage.
    Generate {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Number of scenarios, or `full` to run to full coverage.
        #[arg(long, default_value = "full")]
        num: String,
        #[arg(long, value_enum, default_value_t = StrategyArg::Exact)]
        strategy: StrategyArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn an abstract scenario file into a concrete scenario.
    Instantiate {
        #[arg(long = "abstract")]
        abstract_file: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a concrete scenario and write its trace.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        map: PathBuf,
        /// `baseline` or `baseline:fault,...`
        #[arg(long, default_value = "baseline")]
        controller: String,
        /// Simulated seconds.
        #[arg(long, default_value_t = 40.0)]
        budget: f64,
        #[arg(long)]
        trace_out: PathBuf,
    },
    /// Evaluate KPIs on a trace.
    Evaluate {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        thresholds: Option<PathBuf>,
        #[arg(long)]
        report_out: PathBuf,
    },
    /// Search for violations by spawning one extra NPC around the base run.
    Perturb {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value = "baseline")]
        controller: String,
        /// Simulations, the base run included.
        #[arg(long, default_value_t = 50)]
        budget: usize,
        /// Simulated seconds per run.
        #[arg(long, default_value_t = 40.0)]
        sim_budget: f64,
        #[arg(long)]
        thresholds: Option<PathBuf>,
        /// JSON file overriding search tunables.
        #[arg(long)]
        search: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a full campaign from a config file.
    Campaign {
        #[arg(long)]
        config: PathBuf,
    },
    /// Classify the junctions of a map by shape.
    Classify {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        junction: Option<String>,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE_DEG)]
        tolerance: f64,
    },
    /// Write the bundled maps, catalogs and parameter maps.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load_catalog(path: &Path) -> Result<Catalog> {
    parse_catalog(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_map(path: &Path) -> Result<MapGraph> {
    parse_map(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_scenario(path: &Path) -> Result<ConcreteScenario> {
    ConcreteScenario::from_json(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_thresholds(path: Option<&Path>) -> Result<KpiThresholds> {
    match path {
        Some(p) => KpiThresholds::parse(&read(p)?).with_context(|| format!("parsing {}", p.display())),
        None => Ok(KpiThresholds::default()),
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes") + "\n"
}

fn generate(catalog: &Path, k: usize, num: &str, strategy: StrategyArg, out: &Path) -> Result<()> {
    let cat = load_catalog(catalog)?;
    let limit = match num {
        "full" => SuiteLimit::FullCoverage,
        n => SuiteLimit::Count(n.parse().with_context(|| format!("--num expects an integer or `full`, got {n:?}"))?),
    };
    let strategy = match strategy {
        StrategyArg::Exact => Strategy::Exact,
        StrategyArg::Greedy => Strategy::Greedy,
    };
    let suite = generate_suite_with(&cat, k, limit, strategy)?;
    for (i, e) in suite.iter().enumerate() {
        let doc = json!({ "elements": e.scenario.named(&cat), "gain": e.gain });
        write(&out.join(format!("abstract_{:03}.json", i + 1)), &pretty(&doc))?;
    }
    let mut state = covdrive_core::GenerationState::new(&cat, k)?;
    for e in &suite {
        state.record(e.scenario.clone());
    }
    let names: Vec<&str> = cat.categories().iter().map(|c| c.name.as_str()).collect();
    let subsets: Vec<_> = state
        .model()
        .tables()
        .iter()
        .map(|t| {
            json!({
                "categories": t.categories().iter().map(|&c| names[c]).collect::<Vec<_>>(),
                "covered": t.covered_count(),
                "feasible": t.feasible_count(),
            })
        })
        .collect();
    let cov = state.coverage();
    let doc = json!({ "k": k, "scenarios": suite.len(), "covered": cov.covered, "feasible": cov.feasible, "subsets": subsets });
    write(&out.join("coverage.json"), &pretty(&doc))?;
    println!("{} scenarios, {}/{} {k}-way tuples covered", suite.len(), cov.covered, cov.feasible);
    Ok(())
}

fn load_abstract(path: &Path, cat: &Catalog) -> Result<AbstractScenario> {
    let v: serde_json::Value = serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let named = v.get("elements").cloned().unwrap_or(v);
    let named = serde_json::from_value(named).with_context(|| format!("{}: expected a category map", path.display()))?;
    Ok(AbstractScenario::from_named(cat, &named)?)
}

fn perturb(
    scenario: &Path,
    map: &Path,
    controller: &str,
    budget: usize,
    sim_budget: f64,
    thresholds: Option<&Path>,
    search: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let sc = load_scenario(scenario)?;
    let map = load_map(map)?;
    let th = load_thresholds(thresholds)?;
    let cfg: SearchConfig = match search {
        Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => SearchConfig::default(),
    };
    let controller = parse_controller(controller).map_err(anyhow::Error::msg)?;
    let mut sim = SimRunner { map: &map, controller, config: SimConfig::new(sim_budget) };
    let state = meta_search(&sc, &map, &mut sim, &th, &cfg, budget)?;
    let log: String = state.log.iter().map(|l| format!("{l}\n")).collect();
    write(&out.join("search.log"), &log)?;
    let mut found = Vec::new();
    for (n, f) in state.violations.iter().chain(&state.performance).enumerate() {
        let stem = format!("found_{:03}", n + 1);
        write(&out.join(format!("{stem}.scenario.json")), &f.run.scenario.to_json())?;
        write(&out.join(format!("{stem}.trace.ndjson")), &f.run.trace.to_ndjson())?;
        write(&out.join(format!("{stem}.report.json")), &f.run.report.to_json())?;
        found.push(json!({
            "file": stem,
            "scenario": f.run.scenario.id,
            "point": f.point,
            "d": f.d,
            "safety_critical": f.run.report.safety_critical,
            "performance": f.run.report.performance,
        }));
    }
    let doc = json!({
        "base": sc.id,
        "budget": budget,
        "simulations": state.simulations,
        "stop": state.stop,
        "skipped": state.skipped,
        "found": found,
    });
    write(&out.join("summary.json"), &pretty(&doc))?;
    print!("{log}");
    println!(
        "{} simulations, {} safety-critical, {} performance-only, stop: {:?}",
        state.simulations,
        state.violations.len(),
        state.performance.len(),
        state.stop
    );
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { catalog, k, num, strategy, out } => generate(&catalog, k, &num, strategy, &out),
        Command::Instantiate { abstract_file, catalog, map, params, seed, out } => {
            let cat = load_catalog(&catalog)?;
            let abs = load_abstract(&abstract_file, &cat)?;
            let map = load_map(&map)?;
            let pmap = ParameterMap::parse(&read(&params)?).with_context(|| format!("parsing {}", params.display()))?;
            pmap.validate(&cat)?;
            let sc = instantiate(&abs, &cat, &map, &pmap, seed)?;
            write(&out, &sc.to_json())
        }
        Command::Simulate { scenario, map, controller, budget, trace_out } => {
            if !(budget.is_finite() && budget > 0.0) {
                bail!("--budget must be positive");
            }
            let sc = load_scenario(&scenario)?;
            let map = load_map(&map)?;
            let mut ctl = parse_controller(&controller).map_err(anyhow::Error::msg)?;
            let trace = run(&sc, &map, &mut ctl, SimConfig::new(budget))?;
            write(&trace_out, &trace.to_ndjson())?;
            println!("{} frames, {}", trace.frames.len(), trace.end.reason);
            Ok(())
        }
        Command::Evaluate { trace, scenario, thresholds, report_out } => {
            let tr = TimedTrace::from_ndjson(&read(&trace)?).with_context(|| format!("parsing {}", trace.display()))?;
            let sc = load_scenario(&scenario)?;
            let th = load_thresholds(thresholds.as_deref())?;
            let report = evaluate(&tr, &sc, &th)?;
            write(&report_out, &report.to_json())?;
            let v: Vec<String> = report.violations().iter().map(|k| format!("{k:?}")).collect();
            println!(
                "safety-critical: {}, performance: {}, violations: [{}]",
                report.safety_critical,
                report.performance,
                v.join(", ")
            );
            Ok(())
        }
        Command::Perturb { scenario, map, controller, budget, sim_budget, thresholds, search, out } => perturb(
            &scenario,
            &map,
            &controller,
            budget,
            sim_budget,
            thresholds.as_deref(),
            search.as_deref(),
            &out,
        ),
        Command::Campaign { config } => {
            let cfg = CampaignConfig::load(&config)?;
            let report = run_campaign(&cfg)?;
            print!("{}", report.to_table());
            println!("report: {}", cfg.out.join("report.json").display());
            Ok(())
        }
        Command::Classify { map, junction, tolerance } => {
            let map = load_map(&map)?;
            let ids: Vec<String> = match junction {
                Some(j) => vec![j],
                None => map.junctions().iter().map(|j| j.id.clone()).collect(),
            };
            for id in ids {
                match map.classify_junction(&id, tolerance) {
                    Ok(c) => {
                        let gaps: Vec<String> = c.gaps.iter().map(|g| format!("{g:.1}")).collect();
                        println!("{id}\t{}\t[{}]", c.kind.as_str(), gaps.join(", "));
                    }
                    Err(e) => println!("{id}\tunclassified\t{e}"),
                }
            }
            Ok(())
        }
        Command::Fixtures { out } => {
            for (name, contents) in fixtures::all_assets() {
                write(&out.join(&name), &contents)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
