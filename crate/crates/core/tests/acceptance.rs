//! Acceptance checks, one line per criterion.
//!
//! Runs under `cargo test` with a custom harness. A numeric argument selects
//! criteria (`cargo test --test acceptance -- 3 6`). Every check has a wall
//! clock limit; exceeding it fails the criterion even if the assertions held.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use covdrive_core::campaign::{run_campaign, CampaignConfig, CampaignReport};
use covdrive_core::concretize::{Behavior, SignalState};
use covdrive_core::fixtures::{self, EXAMPLE_CATALOG, STRAIGHT_LEFT_LANE, STRAIGHT_RIGHT_LANE};
use covdrive_core::geometry::Vec2;
use covdrive_core::kpi::{evaluate, lateral_jerk_at, Kpi, KpiThresholds};
use covdrive_core::mapsem::{classify_gaps, ArmSpec, JunctionKind, MapBuilder, DEFAULT_TOLERANCE_DEG};
use covdrive_core::perturb::{
    extract_behavioral_sequence, meta_search, pattern_word, BehavioralPattern, Counting, SearchConfig, SimRunner,
};
use covdrive_core::simcore::{
    ego_trace, frame_time, AgentInfo, AgentKind, AgentState, BaselineController, Frame, SignalRecord, SimConfig,
    Termination, TimedTrace, TraceEnd,
};
use covdrive_core::{generate_suite, parse_catalog, GenerationState, MapGraph, SuiteLimit};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome, Duration); 9] = [
        (1, "example catalog tuples and gain", c1_example_catalog, Duration::from_secs(1)),
        (2, "full-coverage suite is minimal", c2_full_coverage, Duration::from_secs(1)),
        (3, "random catalogs: distinct, max gain", c3_random_catalogs, Duration::from_secs(120)),
        (4, "junction classification", c4_junctions, Duration::from_secs(10)),
        (5, "campaign determinism", c5_determinism, Duration::from_secs(300)),
        (6, "KPI oracle equivalence", c6_kpi_oracle, Duration::from_secs(60)),
        (7, "perturbation effectiveness", c7_perturbation, Duration::from_secs(600)),
        (8, "campaign bookkeeping", c8_bookkeeping, Duration::from_secs(300)),
        (9, "behavioral sequence recognizer", c9_recognizer, Duration::from_secs(5)),
    ];
    let picked: BTreeSet<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));

    let mut failed = 0;
    for (n, name, check, limit) in criteria {
        if !picked.is_empty() && !picked.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        let result = match result {
            Ok(_) if took > limit => Err(format!("took {:.2} s, limit {} s", took.as_secs_f64(), limit.as_secs())),
            r => r,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        println!("criterion {n} ({name}): {tag} [{:.2} s] {detail}", took.as_secs_f64());
        failed += result.is_err() as usize;
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// Catalog oracles

/// Every total assignment of `sizes`, in lexicographic order.
fn all_assignments(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &n in sizes {
        out = out.into_iter().flat_map(|a| (0..n).map(move |e| [a.clone(), vec![e]].concat())).collect();
    }
    out
}

/// Pairs of (category, element) for every 2-subset of categories.
fn pairs_of(a: &[usize]) -> Vec<[(usize, usize); 2]> {
    let mut out = Vec::new();
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            out.push([(i, a[i]), (j, a[j])]);
        }
    }
    out
}

/// Implication `a.x -> [!]b.y` over category and element indices.
#[derive(Clone, Copy, Debug)]
struct Implication {
    if_cat: usize,
    if_el: usize,
    then_cat: usize,
    then_el: usize,
    negated: bool,
}

impl Implication {
    fn holds(&self, a: &[usize]) -> bool {
        a[self.if_cat] != self.if_el || ((a[self.then_cat] == self.then_el) != self.negated)
    }
}

/// The example catalog's single rule: straight road forbids a left turn.
fn example_feasible() -> Vec<Vec<usize>> {
    all_assignments(&[3, 2, 3]).into_iter().filter(|a| !(a[1] == 0 && a[2] == 1)).collect()
}

fn c1_example_catalog() -> Outcome {
    let cat = parse_catalog(EXAMPLE_CATALOG).map_err(|e| e.to_string())?;
    let tuples = cat.enumerate_feasible_tuples(2).map_err(|e| e.to_string())?;
    let oracle: BTreeSet<_> = example_feasible().iter().flat_map(|a| pairs_of(a)).collect();
    ensure!(oracle.len() == 20, "oracle counts {} pairs", oracle.len());
    ensure!(tuples.len() == 20, "enumerate_feasible_tuples gave {}", tuples.len());

    let mut state = GenerationState::new(&cat, 2).map_err(|e| e.to_string())?;
    let first = cat
        .scenario(&[("weather", "sunny"), ("road", "straight"), ("ego-action", "drive-straight")])
        .map_err(|e| e.to_string())?;
    state.record(first);
    let next = state.next_scenario().ok_or("no second scenario")?;
    ensure!(next.gain == 3, "second scenario gain {}", next.gain);
    Ok(format!("20 feasible pairs; second scenario {} fills 3", next.scenario.describe(&cat)))
}

fn covers_all(set: &[&Vec<usize>], target: &BTreeSet<[(usize, usize); 2]>) -> bool {
    let got: BTreeSet<_> = set.iter().flat_map(|a| pairs_of(a)).collect();
    target.is_subset(&got)
}

/// Whether some `size`-subset of `pool` covers `target`.
fn cover_exists(pool: &[Vec<usize>], size: usize, target: &BTreeSet<[(usize, usize); 2]>) -> bool {
    fn rec(
        pool: &[Vec<usize>],
        from: usize,
        size: usize,
        pick: &mut Vec<usize>,
        target: &BTreeSet<[(usize, usize); 2]>,
    ) -> bool {
        if pick.len() == size {
            let set: Vec<&Vec<usize>> = pick.iter().map(|&i| &pool[i]).collect();
            return covers_all(&set, target);
        }
        for i in from..pool.len() {
            pick.push(i);
            if rec(pool, i + 1, size, pick, target) {
                return true;
            }
            pick.pop();
        }
        false
    }
    rec(pool, 0, size, &mut Vec::new(), target)
}

fn c2_full_coverage() -> Outcome {
    let cat = parse_catalog(EXAMPLE_CATALOG).map_err(|e| e.to_string())?;
    let suite = generate_suite(&cat, 2, SuiteLimit::FullCoverage).map_err(|e| e.to_string())?;

    let pool = example_feasible();
    let target: BTreeSet<_> = pool.iter().flat_map(|a| pairs_of(a)).collect();
    ensure!(!cover_exists(&pool, 8, &target), "oracle found a cover of size 8");
    ensure!(cover_exists(&pool, 9, &target), "oracle found no cover of size 9");

    ensure!(suite.len() == 9, "suite has {} scenarios", suite.len());
    let mut seen = BTreeSet::new();
    for e in &suite {
        let a = &e.scenario.elements;
        ensure!(pool.contains(a), "infeasible scenario {}", e.scenario.describe(&cat));
        ensure!(e.gain > 0, "zero gain for {}", e.scenario.describe(&cat));
        ensure!(seen.insert(a.clone()), "duplicate {}", e.scenario.describe(&cat));
    }
    let refs: Vec<&Vec<usize>> = suite.iter().map(|e| &e.scenario.elements).collect();
    ensure!(covers_all(&refs, &target), "suite leaves pairs uncovered");
    Ok("9 scenarios; brute force rules out 8".into())
}

struct RandomCatalog {
    sizes: Vec<usize>,
    rules: Vec<Implication>,
    json: String,
}

fn random_catalog(rng: &mut impl Rng) -> RandomCatalog {
    let n = rng.gen_range(2..=6);
    let sizes: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=5)).collect();
    let mut rules = Vec::new();
    for _ in 0..rng.gen_range(0..=5) {
        let mut cats: Vec<usize> = (0..n).collect();
        cats.shuffle(rng);
        let (a, b) = (cats[0], cats[1]);
        rules.push(Implication {
            if_cat: a,
            if_el: rng.gen_range(0..sizes[a]),
            then_cat: b,
            then_el: rng.gen_range(0..sizes[b]),
            negated: rng.gen_bool(0.5),
        });
    }
    let categories: Vec<_> = sizes
        .iter()
        .enumerate()
        .map(|(c, &m)| {
            serde_json::json!({
                "name": format!("c{c}"),
                "elements": (0..m).map(|e| format!("e{e}")).collect::<Vec<_>>(),
            })
        })
        .collect();
    let constraints: Vec<String> = rules
        .iter()
        .map(|r| {
            let bang = if r.negated { "!" } else { "" };
            format!("c{}.e{} -> {bang}c{}.e{}", r.if_cat, r.if_el, r.then_cat, r.then_el)
        })
        .collect();
    let json = serde_json::json!({ "categories": categories, "constraints": constraints }).to_string();
    RandomCatalog { sizes, rules, json }
}

fn c3_random_catalogs() -> Outcome {
    let mut rng = covdrive_core::seed::rng(0x5eed);
    let mut emitted_total = 0;
    let mut empty = 0;
    for round in 0..100 {
        let rc = random_catalog(&mut rng);
        let cat = parse_catalog(&rc.json).map_err(|e| format!("catalog {round}: {e}"))?;
        let feasible: Vec<Vec<usize>> =
            all_assignments(&rc.sizes).into_iter().filter(|a| rc.rules.iter().all(|r| r.holds(a))).collect();
        if feasible.is_empty() {
            empty += 1;
        }
        let target: BTreeSet<_> = feasible.iter().flat_map(|a| pairs_of(a)).collect();
        let mut covered = BTreeSet::new();
        let mut prior: Vec<Vec<usize>> = Vec::new();
        let mut state = GenerationState::new(&cat, 2).map_err(|e| e.to_string())?;
        loop {
            let gain_of = |a: &Vec<usize>| pairs_of(a).iter().filter(|p| !covered.contains(*p)).count();
            let best = feasible.iter().map(gain_of).max().unwrap_or(0);
            let Some(e) = state.next_scenario() else {
                ensure!(best == 0, "catalog {round}: stopped with gain {best} available");
                break;
            };
            let a = e.scenario.elements.clone();
            ensure!(feasible.contains(&a), "catalog {round}: infeasible {a:?}");
            ensure!(!prior.contains(&a), "catalog {round}: repeated {a:?}");
            ensure!(e.gain == best, "catalog {round}: gain {} but oracle max {best}", e.gain);
            ensure!(gain_of(&a) == e.gain, "catalog {round}: reported gain {} for {a:?}", e.gain);
            covered.extend(pairs_of(&a));
            prior.push(a);
        }
        ensure!(covered == target, "catalog {round}: coverage incomplete");
        emitted_total += prior.len();
    }
    Ok(format!("100 catalogs ({empty} unsatisfiable), {emitted_total} scenarios checked"))
}

// ---------------------------------------------------------------------------
// Junctions

fn c4_junctions() -> Outcome {
    let tol = DEFAULT_TOLERANCE_DEG;
    ensure!(tol == 15.0, "default tolerance is {tol}");
    let t = classify_gaps(&[181.7, 90.1, 88.2], tol);
    ensure!(t == JunctionKind::TShaped, "skewed gaps gave {}", t.as_str());
    let y = classify_gaps(&[120.0, 120.0, 120.0], tol);
    ensure!(y == JunctionKind::YShaped, "even gaps gave {}", y.as_str());

    let templates: [(JunctionKind, &[f64]); 3] = [
        (JunctionKind::TShaped, &[0.0, 90.0, 270.0]),
        (JunctionKind::YShaped, &[0.0, 120.0, 240.0]),
        (JunctionKind::FourWay, &[0.0, 90.0, 180.0, 270.0]),
    ];
    let mut rng = covdrive_core::seed::rng(4);
    let mut errors = Vec::new();
    for i in 0..500 {
        let (kind, base) = templates[i % templates.len()];
        let rot = rng.gen_range(0.0..360.0);
        let center = Vec2::new(rng.gen_range(-1e3..1e3), rng.gen_range(-1e3..1e3));
        let mut b = MapBuilder::new("fuzz");
        b.junction("J", center, false);
        for (k, h) in base.iter().enumerate() {
            let jitter = rng.gen_range(-7.5..=7.5);
            b.arm("J", ArmSpec::new(&format!("r{k}"), (h + rot + jitter).rem_euclid(360.0), 60.0));
        }
        let map = MapGraph::from_file(b.build()).map_err(|e| format!("junction {i}: {e}"))?;
        let got = map.classify_junction("J", tol).map_err(|e| format!("junction {i}: {e}"))?;
        if got.kind != kind {
            errors.push(format!("#{i} {:?} -> {}", got.gaps, got.kind.as_str()));
        }
    }
    ensure!(errors.is_empty(), "{} errors: {}", errors.len(), errors.join("; "));
    Ok("templates match; 500 fuzzed junctions, 0 errors".into())
}

// ---------------------------------------------------------------------------
// Campaign

struct CampaignRun {
    _dir: tempfile::TempDir,
    out: PathBuf,
    report: CampaignReport,
}

fn campaign_config(out: &Path) -> CampaignConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/campaign.json");
    let mut cfg = CampaignConfig::load(&path).expect("bundled campaign config loads");
    cfg.out = out.to_path_buf();
    cfg
}

fn run_default_campaign() -> Result<CampaignRun, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("campaign");
    let report = run_campaign(&campaign_config(&out)).map_err(|e| e.to_string())?;
    Ok(CampaignRun { _dir: dir, out, report })
}

fn first_campaign() -> &'static Result<CampaignRun, String> {
    static RUN: OnceLock<Result<CampaignRun, String>> = OnceLock::new();
    RUN.get_or_init(run_default_campaign)
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).expect("readable artifact dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.insert(rel, std::fs::read(&path).expect("readable artifact"));
            }
        }
    }
    out
}

fn c5_determinism() -> Outcome {
    let a = first_campaign().as_ref().map_err(Clone::clone)?;
    let b = run_default_campaign()?;
    let (fa, fb) = (files_under(&a.out), files_under(&b.out));
    let names_a: Vec<_> = fa.keys().collect();
    let names_b: Vec<_> = fb.keys().collect();
    ensure!(names_a == names_b, "artifact sets differ ({} vs {} files)", fa.len(), fb.len());
    let differing: Vec<_> = fa.iter().filter(|(k, v)| fb[*k] != **v).map(|(k, _)| k.display().to_string()).collect();
    ensure!(differing.is_empty(), "differing files: {}", differing.join(", "));
    let count = |ext: &str| fa.keys().filter(|k| k.to_string_lossy().ends_with(ext)).count();
    Ok(format!(
        "{} files identical ({} scenarios, {} traces, {} reports)",
        fa.len(),
        count(".scenario.json"),
        count(".trace.ndjson"),
        count(".report.json")
    ))
}

/// Counts straight from the persisted KPI report JSON.
fn tally(out: &Path, reports: impl Iterator<Item = String>) -> Result<[usize; 4], String> {
    let mut row = [0; 4];
    for rel in reports {
        let text = std::fs::read_to_string(out.join(&rel)).map_err(|e| format!("{rel}: {e}"))?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| format!("{rel}: {e}"))?;
        let violated: Vec<&str> = v["kpis"]
            .as_array()
            .ok_or(format!("{rel}: no kpis"))?
            .iter()
            .filter(|k| k["violated"] == true)
            .map(|k| k["kpi"].as_str().unwrap_or(""))
            .collect();
        let safety = violated.iter().any(|k| matches!(*k, "collision" | "too-close"));
        let perf = violated.iter().any(|k| !matches!(*k, "collision" | "too-close"));
        row[0] += 1;
        row[1] += !violated.is_empty() as usize;
        row[2] += safety as usize;
        row[3] += perf as usize;
    }
    Ok(row)
}

fn c8_bookkeeping() -> Outcome {
    let run = first_campaign().as_ref().map_err(Clone::clone)?;
    let r = &run.report;
    ensure!(r.failures.is_empty(), "{} failed instances", r.failures.len());
    ensure!(r.base.total == 45, "base total {}", r.base.total);
    ensure!(r.scenarios.len() == 45, "{} base entries", r.scenarios.len());

    let base = tally(&run.out, r.scenarios.iter().map(|s| s.report.clone()))?;
    let pert = tally(&run.out, r.perturbed_runs.iter().map(|p| p.report.clone()))?;
    let row = |x: &covdrive_core::campaign::Row| [x.total, x.problematic, x.safety_critical, x.performance];
    ensure!(row(&r.base) == base, "base row {:?}, persisted reports give {base:?}", row(&r.base));
    ensure!(row(&r.perturbed) == pert, "perturbed row {:?}, persisted reports give {pert:?}", row(&r.perturbed));

    let on_disk = std::fs::read_to_string(run.out.join("report.json")).map_err(|e| e.to_string())?;
    ensure!(CampaignReport::from_json(&on_disk).ok().as_ref() == Some(r), "report.json differs from the returned report");
    Ok(format!("base {base:?}, perturbed {pert:?} (total, problematic, safety, performance)"))
}

// ---------------------------------------------------------------------------
// KPI traces

const DT: f64 = 0.1;
const LANE: &str = "road_main:1";

/// A hand-built ego state.
#[derive(Clone)]
struct Ego {
    x: f64,
    y: f64,
    speed: f64,
    accel: f64,
    lane: &'static str,
    lat: f64,
}

fn cruise(n: usize, v: f64) -> Vec<Ego> {
    (0..n).map(|i| Ego { x: v * i as f64 * DT, y: -1.75, speed: v, accel: 0.0, lane: LANE, lat: 0.0 }).collect()
}

fn state(x: f64, y: f64, speed: f64, accel: f64, lane: &str, lat: f64) -> AgentState {
    AgentState { x, y, heading: 0.0, speed, accel, lane: lane.into(), offset: x, lat }
}

struct Case {
    name: &'static str,
    ego: Vec<Ego>,
    /// Per-frame positions of NPCs (x, y), one inner vec per NPC.
    npcs: Vec<Vec<(f64, f64)>>,
    signals: Vec<Vec<SignalRecord>>,
    end: (Termination, f64),
    expect: &'static [Kpi],
}

impl Case {
    fn new(name: &'static str, ego: Vec<Ego>, expect: &'static [Kpi]) -> Self {
        Case { name, ego, npcs: Vec::new(), signals: Vec::new(), end: (Termination::DestinationReached, 1.0), expect }
    }

    fn build(&self) -> (TimedTrace, covdrive_core::concretize::ConcreteScenario) {
        let mut sc = fixtures::straight_scenario(LANE, 0.0, 300.0);
        sc.id = self.name.into();
        let mut agents = vec![AgentInfo { id: "ego".into(), kind: AgentKind::Ego, length: 4.5, width: 1.8 }];
        for k in 0..self.npcs.len() {
            let id = format!("npc{k}");
            sc.npcs.push(fixtures::lane_npc(&id, LANE, 100.0, 0.0, Behavior::Stationary));
            agents.push(AgentInfo { id, kind: AgentKind::Vehicle, length: 4.5, width: 1.8 });
        }
        let frames = self
            .ego
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let mut row = vec![state(e.x, e.y, e.speed, e.accel, e.lane, e.lat)];
                row.extend(self.npcs.iter().map(|p| state(p[i].0, p[i].1, 0.0, 0.0, LANE, 0.0)));
                Frame { t: frame_time(i, DT), agents: row, signals: self.signals.get(i).cloned().unwrap_or_default() }
            })
            .collect::<Vec<_>>();
        let n = frames.len();
        let (reason, progress) = self.end.clone();
        let arrived = reason == Termination::DestinationReached;
        let trace = TimedTrace {
            scenario: self.name.into(),
            dt: DT,
            agents,
            end: TraceEnd {
                reason,
                message: None,
                route_progress: progress,
                destination_reached: arrived,
                arrival_time: arrived.then(|| frames[n - 1].t),
                frames: n,
            },
            frames,
        };
        (trace, sc)
    }
}

/// Ego with a constant acceleration `a` on frames `from..to`.
fn with_accel(n: usize, a: f64, from: usize, to: usize) -> Vec<Ego> {
    let mut e = cruise(n, 10.0);
    for (i, s) in e.iter_mut().enumerate() {
        if (from..to).contains(&i) {
            s.accel = a;
        }
    }
    e
}

/// Lateral offset `c·t³` from frame `from`, which has third derivative `6c`.
fn with_cubic(n: usize, c: f64, from: usize) -> Vec<Ego> {
    let mut e = cruise(n, 10.0);
    for (i, s) in e.iter_mut().enumerate().skip(from) {
        let t = (i - from) as f64 * DT;
        s.lat = c * t * t * t;
        s.y += s.lat;
    }
    e
}

/// NPC parked at `x` in the ego's lane for all `n` frames.
fn parked(n: usize, x: f64) -> Vec<(f64, f64)> {
    vec![(x, -1.75); n]
}

/// NPC keeping `gap` m bumper to bumper ahead of a 10 m/s ego on frames `from..to`, far away otherwise.
fn shadow(n: usize, gap: f64, from: usize, to: usize) -> Vec<(f64, f64)> {
    (0..n).map(|i| if (from..to).contains(&i) { (i as f64 + 4.5 + gap, -1.75) } else { (1e4, 1e4) }).collect()
}

fn signal(state: SignalState) -> SignalRecord {
    SignalRecord { junction: "J_1".into(), road: "road_main".into(), state }
}

/// Ego that leaves its lane onto a connector of `J_1` at frame 30.
fn enters_junction(n: usize, light: SignalState) -> Case {
    let mut ego = cruise(n, 10.0);
    for s in ego.iter_mut().skip(30) {
        s.lane = "J_1/road_main:1>road_side:0";
    }
    let mut c = Case::new("signal", ego, &[]);
    c.signals = (0..n).map(|_| vec![signal(light)]).collect();
    c
}

fn kpi_cases() -> Vec<Case> {
    use Kpi::*;
    let n = 60;
    let mut cases = vec![
        Case::new("clean", cruise(n, 10.0), &[]),
        Case::new("hard-brake", with_accel(n, -4.0, 20, 30), &[HarshBrake]),
        Case::new("brake-at-threshold", with_accel(n, -3.0, 20, 30), &[]),
        Case::new("hard-accel", with_accel(n, 3.5, 5, 15), &[HarshAccel]),
        // 6c = 3.0 and 2.0 m/s³
        Case::new("jerky-lateral", with_cubic(n, 0.5, 20), &[LateralJerk]),
        Case::new("smooth-lateral", with_cubic(n, 1.0 / 3.0, 20), &[]),
    ];

    let mut off = cruise(n, 10.0);
    for s in &mut off[25..35] {
        s.lane = "";
    }
    cases.push(Case::new("off-road", off, &[RouteDeviation]));

    let mut stalled = Case::new("stalled", cruise(n, 10.0), &[RouteDeviation]);
    stalled.end = (Termination::Budget, 0.5);
    cases.push(stalled);
    let mut nearly = Case::new("nearly-there", cruise(n, 10.0), &[]);
    nearly.end = (Termination::Budget, 0.97);
    cases.push(nearly);
    let mut crashed = Case::new("ended-by-collision", cruise(n, 10.0), &[]);
    crashed.end = (Termination::Collision, 0.4);
    cases.push(crashed);

    // collision runs end two frames into the overlap, as the simulator stops them
    let mut hit = Case::new("rear-end", cruise(38, 10.0), &[Collision]);
    hit.npcs.push(parked(38, 40.2));
    hit.end = (Termination::Collision, 0.12);
    cases.push(hit);
    let mut close = Case::new("tailgate", cruise(n, 10.0), &[TooClose]);
    close.npcs.push(shadow(n, 0.3, 10, 20));
    cases.push(close);
    let mut clear = Case::new("safe-gap", cruise(n, 10.0), &[]);
    clear.npcs.push(shadow(n, 0.8, 10, 20));
    cases.push(clear);
    let mut both = Case::new("close-then-hit", cruise(48, 10.0), &[Collision, TooClose]);
    both.npcs.push(parked(48, 49.8));
    both.end = (Termination::Collision, 0.15);
    cases.push(both);

    let mut red = enters_junction(n, SignalState::Red);
    red.name = "red-light";
    red.expect = &[SignalViolation];
    cases.push(red);
    let mut green = enters_junction(n, SignalState::Green);
    green.name = "green-light";
    cases.push(green);
    let mut yellow = enters_junction(n, SignalState::Yellow);
    yellow.name = "yellow-light";
    cases.push(yellow);

    let mut panic_stop = Case::new("brake-near-car", with_accel(n, -5.0, 10, 20), &[TooClose, HarshBrake]);
    panic_stop.npcs.push(shadow(n, 0.2, 12, 15));
    cases.push(panic_stop);

    // lane label switch: lat jumps but no jerk window spans both lanes
    let mut hop = cruise(n, 10.0);
    for s in hop.iter_mut().skip(30) {
        s.lane = "road_main:0";
        s.lat = 1.7;
    }
    cases.push(Case::new("lane-relabel", hop, &[]));

    let mut rough = with_cubic(n, 0.5, 30);
    for s in &mut rough[5..10] {
        s.accel = 4.0;
    }
    for s in &mut rough[15..20] {
        s.accel = -6.0;
    }
    cases.push(Case::new("rough-ride", rough, &[HarshBrake, HarshAccel, LateralJerk]));
    cases
}

fn c6_kpi_oracle() -> Outcome {
    let th = KpiThresholds::default();
    ensure!(
        th == KpiThresholds {
            too_close_distance: 0.5,
            harsh_brake: -3.0,
            harsh_accel: 3.0,
            lateral_jerk: 2.5,
            route_progress_min: 0.95,
            arrival_budget: 60.0
        },
        "default thresholds changed: {th:?}"
    );
    let cases = kpi_cases();
    ensure!(cases.len() == 20, "{} cases", cases.len());
    for case in &cases {
        let (trace, sc) = case.build();
        let report = evaluate(&trace, &sc, &th).map_err(|e| format!("{}: {e}", case.name))?;
        let mut want = case.expect.to_vec();
        want.sort();
        let got = report.violations();
        ensure!(got == want, "{}: got {got:?}, expected {want:?}", case.name);
        let safety = want.iter().any(|k| k.safety_critical());
        ensure!(report.safety_critical == safety, "{}: safety flag", case.name);
        ensure!(report.problematic() == !want.is_empty(), "{}: problematic flag", case.name);
    }

    let mut worst: f64 = 0.0;
    for c in [0.05, 0.5, -1.3, 2.0] {
        let (trace, _) = Case::new("cubic", with_cubic(80, c, 0), &[]).build();
        for i in 3..trace.frames.len() {
            let j = lateral_jerk_at(&trace, i).ok_or(format!("no jerk at frame {i}"))?;
            worst = worst.max((j - 6.0 * c).abs());
        }
    }
    ensure!(worst < 1e-3, "jerk off by {worst:e}");
    Ok(format!("20 traces exact; cubic jerk error {worst:.1e} m/s³"))
}

// ---------------------------------------------------------------------------
// Perturbation

fn seeded_base(seed: u64) -> covdrive_core::concretize::ConcreteScenario {
    let mut rng = covdrive_core::seed::rng(seed);
    let lane = if rng.gen_bool(0.5) { STRAIGHT_LEFT_LANE } else { STRAIGHT_RIGHT_LANE };
    let start = rng.gen_range(5.0..60.0);
    let mut base = fixtures::straight_scenario(lane, start, 380.0);
    base.id = format!("s{seed}");
    base.ego.speed = rng.gen_range(0.0..10.0);
    base
}

fn c7_perturbation() -> Outcome {
    let map = MapGraph::from_file(fixtures::two_lane_straight()).map_err(|e| e.to_string())?;
    let th = KpiThresholds::default();
    let cfg = SearchConfig::default();
    let budget = 50;
    let mut found = 0;
    let mut sims = Vec::new();
    for seed in 0..20 {
        let base = seeded_base(seed);
        let controller = BaselineController::with_faults([covdrive_core::simcore::Fault::LateBraking]);
        let mut sim = Counting::new(SimRunner { map: &map, controller, config: SimConfig::new(40.0) });
        let st = meta_search(&base, &map, &mut sim, &th, &cfg, budget).map_err(|e| format!("seed {seed}: {e}"))?;
        if st.violations.iter().any(|f| f.run.report.safety_critical) {
            found += 1;
            sims.push(st.simulations);
        }
    }
    ensure!(found >= 18, "safety-critical violation in {found}/20 seeds");

    let mut clean_found = 0;
    for seed in 0..20 {
        let base = seeded_base(seed);
        let mut sim =
            Counting::new(SimRunner { map: &map, controller: BaselineController::new(), config: SimConfig::new(40.0) });
        let st = meta_search(&base, &map, &mut sim, &th, &cfg, budget).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure!(sim.count <= budget, "seed {seed}: {} simulations", sim.count);
        ensure!(sim.count == st.simulations, "seed {seed}: count {} vs state {}", sim.count, st.simulations);
        let unique: BTreeSet<_> = st.visited.iter().collect();
        ensure!(unique.len() == st.visited.len(), "seed {seed}: revisited a behavioral sequence");
        clean_found += st.violations.iter().any(|f| f.run.report.safety_critical) as usize;
    }
    let mean = sims.iter().sum::<usize>() as f64 / sims.len().max(1) as f64;
    Ok(format!("faulty: {found}/20 found (mean {mean:.1} sims); fault-free: invariants held 20/20, {clean_found}/20 found"))
}

// ---------------------------------------------------------------------------
// Recognizer

/// +x at 10 m/s from `x0` to `x1`, cosine blend from `y0` to `y1` between `xa` and `xb`.
fn swerve(x0: f64, x1: f64, y0: f64, y1: f64, xa: f64, xb: f64) -> Vec<(Vec2, f64, f64)> {
    let y = |x: f64| {
        let u = ((x - xa) / (xb - xa)).clamp(0.0, 1.0);
        y0 + (y1 - y0) * (1.0 - (std::f64::consts::PI * u).cos()) / 2.0
    };
    let n = (x1 - x0).round() as usize;
    (0..=n)
        .map(|i| {
            let x = x0 + i as f64;
            let slope = (y(x + 0.01) - y(x - 0.01)) / 0.02;
            (Vec2::new(x, y(x)), slope.atan(), 10.0)
        })
        .collect()
}

fn corner_ys(p: Vec2, heading: f64, length: f64, width: f64) -> [f64; 4] {
    let (s, c) = heading.sin_cos();
    let (hl, hw) = (length / 2.0, width / 2.0);
    [(hl, hw), (hl, -hw), (-hl, hw), (-hl, -hw)].map(|(a, b)| p.y + a * s + b * c)
}

fn c9_recognizer() -> Outcome {
    use BehavioralPattern::*;
    let map = MapGraph::from_file(fixtures::two_lane_straight()).map_err(|e| e.to_string())?;
    let lane = |id| &map.lanes()[map.lane_by_id(id).unwrap()];
    let (left, right) = (lane(STRAIGHT_LEFT_LANE), lane(STRAIGHT_RIGHT_LANE));
    let poses = swerve(10.0, 160.0, left.center_offset, right.center_offset, 60.0, 100.0);
    let trace = ego_trace(&map, "right_change", DT, &poses);
    let seq = extract_behavioral_sequence(&trace, &map).map_err(|e| e.to_string())?;
    let word = pattern_word(&seq);
    ensure!(word == [LaneFollowing, LaneChangeRight, LaneFollowing], "sequence {word:?}");

    // boundaries from raw geometry: first corner across the separator, then
    // first frame with the whole box inside the right lane
    let sep = (left.center_offset + right.center_offset) / 2.0;
    let floor = right.center_offset - right.width / 2.0;
    let info = &trace.agents[0];
    let ys: Vec<[f64; 4]> = poses.iter().map(|&(p, h, _)| corner_ys(p, h, info.length, info.width)).collect();
    let touch = ys.iter().position(|c| c.iter().any(|&y| y < sep)).ok_or("never crosses")?;
    let inside = (touch..ys.len()).find(|&i| ys[i].iter().all(|&y| y <= sep && y >= floor)).ok_or("never settles")?;
    let bounds: Vec<(usize, usize)> = seq.iter().map(|s| (s.start, s.end)).collect();
    let want = vec![(0, touch - 1), (touch, inside), (inside + 1, poses.len() - 1)];
    ensure!(bounds == want, "segments {bounds:?}, expected {want:?}");
    Ok(format!("lane change spans frames {touch}..={inside}"))
}
