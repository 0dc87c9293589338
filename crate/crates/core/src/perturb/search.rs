//! Distance search for one collision point and the budgeted meta-search.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::concretize::ConcreteScenario;
use crate::geometry::Vec2;
use crate::kpi::{evaluate, KpiReport, KpiThresholds};
use crate::mapsem::MapGraph;
use crate::simcore::{run, EgoController, SimConfig, TimedTrace};

use super::{
    build_parameterized_scenario, extract_behavioral_sequence, extract_collision_points, pattern_word,
    BehavioralPattern, BehavioralSequence, CollisionPoint, NpcProgram, ParameterizedScenario, PerturbError,
    SearchConfig,
};

/// Runs scenarios for the search.
pub trait ScenarioSimulator {
    fn simulate(&mut self, scenario: &ConcreteScenario) -> Result<TimedTrace, PerturbError>;
}

/// The built-in simulator with a fixed controller and configuration.
pub struct SimRunner<'a, C> {
    pub map: &'a MapGraph,
    pub controller: C,
    pub config: SimConfig,
}

impl<C: EgoController> ScenarioSimulator for SimRunner<'_, C> {
    fn simulate(&mut self, scenario: &ConcreteScenario) -> Result<TimedTrace, PerturbError> {
        Ok(run(scenario, self.map, &mut self.controller, self.config)?)
    }
}

/// Counts the simulations passed through to `inner`.
pub struct Counting<S> {
    pub inner: S,
    pub count: usize,
}

impl<S> Counting<S> {
    pub fn new(inner: S) -> Self {
        Counting { inner, count: 0 }
    }
}

impl<S: ScenarioSimulator> ScenarioSimulator for Counting<S> {
    fn simulate(&mut self, scenario: &ConcreteScenario) -> Result<TimedTrace, PerturbError> {
        self.count += 1;
        self.inner.simulate(scenario)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeVerdict {
    Violation,
    NewSequence,
    Continue,
}

/// Result of one simulation as seen by the distance search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    /// When the NPC covered `d`; `None` if it never did.
    pub t_npc: Option<f64>,
    /// When the ego reached the point.
    pub t_ego: f64,
    pub verdict: ProbeVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SearchOutcome<T> {
    Violation { d: f64, payload: T },
    NewSequence { d: f64, payload: T },
    Exhausted,
    OutOfBudget,
}

/// Searches `d` in `domain` starting from `nominal`.
///
/// An NPC arriving more than `eps_early` before the ego moves its start
/// further away; one arriving more than `eps_late` after it (or never) moves
/// closer. Inside the window the move follows the sign of the timing error
/// with half the current step. Every reversal halves the step. The search is
/// exhausted when the step drops below `min_step`, when the next distance was
/// already probed (including a move absorbed by a domain bound), or after
/// `max_iters` probes. `probe` returns `None` when
/// no simulation budget is left.
pub fn search_distance<T, E>(
    nominal: f64,
    domain: (f64, f64),
    cfg: &SearchConfig,
    mut probe: impl FnMut(f64) -> Result<Option<(Probe, T)>, E>,
) -> Result<(SearchOutcome<T>, usize), E> {
    let mut d = nominal.clamp(domain.0, domain.1);
    let mut step = cfg.initial_step;
    let mut last = 0.0;
    let mut iters = 0;
    let mut probed: Vec<f64> = Vec::new();
    while iters < cfg.max_iters {
        probed.push(d);
        let Some((p, payload)) = probe(d)? else {
            return Ok((SearchOutcome::OutOfBudget, iters));
        };
        iters += 1;
        match p.verdict {
            ProbeVerdict::Violation => return Ok((SearchOutcome::Violation { d, payload }, iters)),
            ProbeVerdict::NewSequence => return Ok((SearchOutcome::NewSequence { d, payload }, iters)),
            ProbeVerdict::Continue => {}
        }
        let (dir, in_window) = match p.t_npc {
            None => (-1.0, false),
            Some(tn) if tn < p.t_ego - cfg.eps_early => (1.0, false),
            Some(tn) if tn > p.t_ego + cfg.eps_late => (-1.0, false),
            Some(tn) if tn <= p.t_ego => (1.0, true),
            Some(_) => (-1.0, true),
        };
        if last != 0.0 && dir != last {
            step /= 2.0;
        }
        if step < cfg.min_step {
            break;
        }
        let stride = if in_window { step / 2.0 } else { step };
        let next = (d + dir * stride).clamp(domain.0, domain.1);
        if probed.iter().any(|&p| (next - p).abs() < 1e-9) {
            break;
        }
        d = next;
        last = dir;
    }
    Ok((SearchOutcome::Exhausted, iters))
}

/// One evaluated simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub scenario: ConcreteScenario,
    pub trace: TimedTrace,
    pub report: KpiReport,
    pub sequence: BehavioralSequence,
}

/// Scenario and verdict of one perturbed simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Probed {
    pub point: String,
    pub d: f64,
    pub scenario: ConcreteScenario,
    pub report: KpiReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Found {
    pub point: String,
    pub d: f64,
    pub run: Run,
}

/// One line of the search log per simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub point: String,
    pub scenario: String,
    pub d: f64,
    pub t_npc: Option<f64>,
    pub t_ego: f64,
    pub outcome: String,
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t_npc = self.t_npc.map_or("none".to_string(), |t| format!("{t:.2}"));
        write!(
            f,
            "{} d={:.2} t_npc={} t_ego={:.2} outcome={}",
            self.point, self.d, t_npc, self.t_ego, self.outcome
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Violation,
    QueueEmpty,
    Budget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchState {
    pub budget: usize,
    pub budget_remaining: usize,
    pub simulations: usize,
    /// Explored behavioral sequences in discovery order.
    pub visited: Vec<Vec<BehavioralPattern>>,
    /// Simulation of the unmodified base scenario.
    pub base: Option<Run>,
    pub violations: Vec<Found>,
    /// Runs with performance violations only; the search continues past them.
    pub performance: Vec<Found>,
    pub log: Vec<LogEntry>,
    /// Every perturbed simulation, in execution order.
    pub runs: Vec<Probed>,
    /// Points popped from the queue, in order.
    pub popped: Vec<String>,
    /// Points for which no spawn scenario could be built, with the reason.
    pub skipped: Vec<(String, String)>,
    pub stop: StopReason,
}

impl SearchState {
    pub fn new(budget: usize) -> Self {
        SearchState {
            budget,
            budget_remaining: budget,
            simulations: 0,
            visited: Vec::new(),
            base: None,
            violations: Vec::new(),
            performance: Vec::new(),
            log: Vec::new(),
            runs: Vec::new(),
            popped: Vec::new(),
            skipped: Vec::new(),
            stop: StopReason::Budget,
        }
    }

    fn charge(&mut self) -> bool {
        if self.budget_remaining == 0 {
            return false;
        }
        self.budget_remaining -= 1;
        self.simulations += 1;
        true
    }

    fn is_visited(&self, word: &[BehavioralPattern]) -> bool {
        self.visited.iter().any(|w| w == word)
    }
}

/// Travel time of agent `id` to cover `d` meters, interpolated between frames.
fn crossing_time(trace: &TimedTrace, id: &str, d: f64) -> Option<f64> {
    let k = trace.agent_index(id)?;
    if d <= 0.0 {
        return trace.frames.first().map(|f| f.t);
    }
    let mut cum = 0.0;
    for w in trace.frames.windows(2) {
        let (a, b) = (w[0].agents[k].position(), w[1].agents[k].position());
        let step = a.distance(b);
        if cum + step >= d && step > 0.0 {
            return Some(w[0].t + (w[1].t - w[0].t) * (d - cum) / step);
        }
        cum += step;
    }
    None
}

/// When the ego first passes the point's cross-section within `radius` of it.
fn ego_arrival(trace: &TimedTrace, point: &CollisionPoint, radius: f64) -> Option<f64> {
    let u = Vec2::from_heading(point.heading);
    let mut prev: Option<(f64, f64)> = None;
    for f in &trace.frames {
        let rel = f.agents[0].position() - point.position;
        let along = rel.dot(u);
        if along >= 0.0 && rel.cross(u).abs() <= radius {
            return Some(match prev {
                Some((t0, a0)) if a0 < 0.0 => t0 + (f.t - t0) * (-a0) / (along - a0),
                _ => f.t,
            });
        }
        prev = Some((f.t, along));
    }
    None
}

fn evaluate_run(
    scenario: ConcreteScenario,
    map: &MapGraph,
    sim: &mut dyn ScenarioSimulator,
    th: &KpiThresholds,
) -> Result<Run, PerturbError> {
    let trace = sim.simulate(&scenario)?;
    let report = evaluate(&trace, &scenario, th)?;
    let sequence = extract_behavioral_sequence(&trace, map)?;
    Ok(Run { scenario, trace, report, sequence })
}

/// Searches the spawn distance of `ps`, charging each simulation to `state`.
pub fn search_parameter(
    ps: &ParameterizedScenario,
    map: &MapGraph,
    sim: &mut dyn ScenarioSimulator,
    th: &KpiThresholds,
    cfg: &SearchConfig,
    state: &mut SearchState,
) -> Result<SearchOutcome<Run>, PerturbError> {
    let probe = |d: f64| -> Result<Option<(Probe, Run)>, PerturbError> {
        if !state.charge() {
            return Ok(None);
        }
        let run = evaluate_run(ps.instantiate(map, d), map, sim, th)?;
        let t_npc = match ps.program {
            NpcProgram::Stationary => None,
            _ => crossing_time(&run.trace, &ps.npc_id, d),
        };
        let t_ego = ego_arrival(&run.trace, &ps.point, cfg.arrival_radius).unwrap_or(ps.point.t);
        let verdict = if run.report.safety_critical {
            ProbeVerdict::Violation
        } else if !state.is_visited(&pattern_word(&run.sequence)) {
            ProbeVerdict::NewSequence
        } else {
            ProbeVerdict::Continue
        };
        let outcome = match verdict {
            ProbeVerdict::Violation => "safety-critical",
            ProbeVerdict::NewSequence => "new-sequence",
            ProbeVerdict::Continue if run.report.performance => "performance",
            ProbeVerdict::Continue => "none",
        };
        state.log.push(LogEntry {
            point: ps.point.id.clone(),
            scenario: run.scenario.id.clone(),
            d,
            t_npc,
            t_ego,
            outcome: outcome.into(),
        });
        state.runs.push(Probed {
            point: ps.point.id.clone(),
            d,
            scenario: run.scenario.clone(),
            report: run.report.clone(),
        });
        if run.report.performance && !run.report.safety_critical {
            state.performance.push(Found { point: ps.point.id.clone(), d, run: run.clone() });
        }
        Ok(Some((Probe { t_npc, t_ego, verdict }, run)))
    };
    let (outcome, _) = search_distance(ps.nominal, ps.domain, cfg, probe)?;
    Ok(outcome)
}

struct Queued {
    rank: usize,
    t: f64,
    order: usize,
    point: CollisionPoint,
    base: usize,
}

impl Queued {
    fn key(&self) -> (usize, f64, usize) {
        (self.rank, self.t, self.order)
    }
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2))
    }
}

struct Queue {
    heap: BinaryHeap<Reverse<Queued>>,
    /// Scenario each point's spawn is added to.
    bases: Vec<ConcreteScenario>,
    order: usize,
}

impl Queue {
    /// Marks the run's sequence visited and enqueues its points.
    fn add(&mut self, run: &Run, state: &mut SearchState, cfg: &SearchConfig) {
        let k = state.visited.len();
        state.visited.push(pattern_word(&run.sequence));
        self.bases.push(run.scenario.clone());
        for mut point in extract_collision_points(&run.sequence, &run.trace) {
            if k > 0 {
                point.id = format!("S{k}.{}", point.id);
            }
            let rank = cfg.rank(point.pattern);
            self.heap.push(Reverse(Queued { rank, t: point.t, order: self.order, point, base: self.bases.len() - 1 }));
            self.order += 1;
        }
    }
}

/// Explores spawn perturbations of `base` under a budget of `budget`
/// simulations, the base run included.
///
/// Points pop by pattern rank, then earlier ego arrival. A safety-critical
/// violation ends the whole search. A run showing an unvisited behavioral
/// sequence marks it visited and enqueues its points, spawned on top of that
/// run's scenario.
pub fn meta_search(
    base: &ConcreteScenario,
    map: &MapGraph,
    sim: &mut dyn ScenarioSimulator,
    th: &KpiThresholds,
    cfg: &SearchConfig,
    budget: usize,
) -> Result<SearchState, PerturbError> {
    let mut state = SearchState::new(budget);
    if !state.charge() {
        return Ok(state);
    }
    let run = evaluate_run(base.clone(), map, sim, th)?;
    let mut queue = Queue { heap: BinaryHeap::new(), bases: Vec::new(), order: 0 };
    queue.add(&run, &mut state, cfg);
    state.base = Some(run);

    loop {
        if state.budget_remaining == 0 {
            state.stop = StopReason::Budget;
            break;
        }
        let Some(Reverse(item)) = queue.heap.pop() else {
            state.stop = StopReason::QueueEmpty;
            break;
        };
        state.popped.push(item.point.id.clone());
        let ps = match build_parameterized_scenario(map, &item.point, &queue.bases[item.base], cfg) {
            Ok(ps) => ps,
            Err(e @ (PerturbError::NoLegalPlacement(_) | PerturbError::NoHeadroom)) => {
                state.skipped.push((item.point.id.clone(), e.to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        match search_parameter(&ps, map, sim, th, cfg, &mut state)? {
            SearchOutcome::Violation { d, payload } => {
                state.violations.push(Found { point: item.point.id.clone(), d, run: payload });
                state.stop = StopReason::Violation;
                break;
            }
            SearchOutcome::NewSequence { payload, .. } => queue.add(&payload, &mut state, cfg),
            SearchOutcome::Exhausted => {}
            SearchOutcome::OutOfBudget => {
                state.stop = StopReason::Budget;
                break;
            }
        }
    }
    Ok(state)
}
