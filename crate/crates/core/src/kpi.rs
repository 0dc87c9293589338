//! Scoring a trace: collisions, near misses, harsh longitudinal
//! acceleration, lateral jerk, route deviation and signal violations.
//!
//! Collisions and too-close encounters make a scenario safety-critical;
//! every other violation is a performance problem. Events mark the first
//! frame of each contiguous violating stretch and carry its extreme value.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concretize::{ConcreteScenario, SignalState};
use crate::simcore::{Termination, TimedTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KpiThresholds {
    /// Surface-to-surface distance (m) below which agents are too close.
    pub too_close_distance: f64,
    /// Longitudinal acceleration (m/s², negative) below which braking is harsh.
    pub harsh_brake: f64,
    pub harsh_accel: f64,
    /// Magnitude of lateral jerk (m/s³) in the lane frame.
    pub lateral_jerk: f64,
    /// Minimum route fraction for a run that did not arrive.
    pub route_progress_min: f64,
    /// Arrivals later than this (s) do not count as arrivals.
    pub arrival_budget: f64,
}

impl Default for KpiThresholds {
    fn default() -> Self {
        KpiThresholds {
            too_close_distance: 0.5,
            harsh_brake: -3.0,
            harsh_accel: 3.0,
            lateral_jerk: 2.5,
            route_progress_min: 0.95,
            arrival_budget: 60.0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum KpiError {
    #[error("invalid thresholds: {0}")]
    Thresholds(String),
    #[error("trace does not belong to scenario: {0}")]
    Mismatch(String),
    #[error("thresholds syntax error: {0}")]
    Syntax(String),
}

impl KpiThresholds {
    pub fn parse(text: &str) -> Result<Self, KpiError> {
        let t: KpiThresholds = serde_json::from_str(text).map_err(|e| KpiError::Syntax(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), KpiError> {
        let all = [
            self.too_close_distance,
            self.harsh_brake,
            self.harsh_accel,
            self.lateral_jerk,
            self.route_progress_min,
            self.arrival_budget,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(KpiError::Thresholds("all thresholds must be finite".into()));
        }
        if self.harsh_brake >= 0.0 || self.harsh_accel <= 0.0 {
            return Err(KpiError::Thresholds("brake must be negative and accel positive".into()));
        }
        if self.too_close_distance < 0.0 || self.lateral_jerk <= 0.0 || self.arrival_budget <= 0.0 {
            return Err(KpiError::Thresholds("distances, jerk and budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kpi {
    Collision,
    TooClose,
    HarshBrake,
    HarshAccel,
    LateralJerk,
    RouteDeviation,
    SignalViolation,
}

impl Kpi {
    pub const ALL: [Kpi; 7] = [
        Kpi::Collision,
        Kpi::TooClose,
        Kpi::HarshBrake,
        Kpi::HarshAccel,
        Kpi::LateralJerk,
        Kpi::RouteDeviation,
        Kpi::SignalViolation,
    ];

    pub fn safety_critical(self) -> bool {
        matches!(self, Kpi::Collision | Kpi::TooClose)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiEvent {
    pub t: f64,
    pub agents: Vec<String>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiVerdict {
    pub kpi: Kpi,
    pub violated: bool,
    pub events: Vec<KpiEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub scenario: String,
    pub safety_critical: bool,
    pub performance: bool,
    pub termination: Termination,
    pub route_progress: f64,
    pub thresholds: KpiThresholds,
    /// One verdict per KPI, in [`Kpi::ALL`] order.
    pub kpis: Vec<KpiVerdict>,
}

impl KpiReport {
    pub fn verdict(&self, kpi: Kpi) -> &KpiVerdict {
        self.kpis.iter().find(|v| v.kpi == kpi).expect("every KPI has a verdict")
    }

    pub fn violated(&self, kpi: Kpi) -> bool {
        self.verdict(kpi).violated
    }

    pub fn violations(&self) -> Vec<Kpi> {
        self.kpis.iter().filter(|v| v.violated).map(|v| v.kpi).collect()
    }

    pub fn problematic(&self) -> bool {
        self.safety_critical || self.performance
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Groups flagged frames into runs; each run yields one event at its first
/// frame with the value that is extreme under `worse`.
struct Runs {
    open: Option<KpiEvent>,
    out: Vec<KpiEvent>,
}

impl Runs {
    fn new() -> Self {
        Runs { open: None, out: Vec::new() }
    }

    fn frame(&mut self, hit: Option<(f64, f64, Vec<String>)>, worse: impl Fn(f64, f64) -> bool) {
        match (hit, self.open.as_mut()) {
            (Some((_, v, _)), Some(e)) => {
                if worse(v, e.value) {
                    e.value = v;
                }
            }
            (Some((t, v, agents)), None) => self.open = Some(KpiEvent { t, agents, value: v }),
            (None, _) => self.out.extend(self.open.take()),
        }
    }

    fn finish(mut self) -> Vec<KpiEvent> {
        self.out.extend(self.open.take());
        self.out
    }
}

/// Road id of a lane id (`road:index`).
fn lane_road(lane: &str) -> &str {
    lane.rsplit_once(':').map_or(lane, |(r, _)| r)
}

/// Junction and approach road of a connector id (`J/road:i>road:j`).
fn connector_parts(id: &str) -> Option<(&str, &str)> {
    let (junction, rest) = id.split_once('/')?;
    let (from, _) = rest.split_once('>')?;
    Some((junction, lane_road(from)))
}

fn check_agents(trace: &TimedTrace, sc: &ConcreteScenario) -> Result<(), KpiError> {
    if trace.scenario != sc.id {
        return Err(KpiError::Mismatch(format!("trace is for `{}`, scenario is `{}`", trace.scenario, sc.id)));
    }
    let expected: Vec<&str> = std::iter::once("ego")
        .chain(sc.npcs.iter().map(|n| n.id.as_str()))
        .chain(sc.pedestrians.iter().map(|p| p.id.as_str()))
        .collect();
    let actual: Vec<&str> = trace.agents.iter().map(|a| a.id.as_str()).collect();
    if expected != actual {
        return Err(KpiError::Mismatch(format!("agents {actual:?}, expected {expected:?}")));
    }
    if trace.frames.iter().any(|f| f.agents.len() != actual.len()) {
        return Err(KpiError::Mismatch("frame with missing agents".into()));
    }
    Ok(())
}

/// Third backward difference of `lat` at frame `i` over `dt`, or `None`
/// when the window leaves the road or straddles a change of lane.
pub fn lateral_jerk_at(trace: &TimedTrace, i: usize) -> Option<f64> {
    if i < 3 {
        return None;
    }
    let w: Vec<_> = (i - 3..=i).map(|k| trace.ego(k)).collect();
    if w[0].lane.is_empty() || w.iter().any(|a| a.lane != w[0].lane) {
        return None;
    }
    let dt = trace.dt;
    Some((w[3].lat - 3.0 * w[2].lat + 3.0 * w[1].lat - w[0].lat) / (dt * dt * dt))
}

/// Scores `trace` against `thresholds`. Pure and deterministic.
pub fn evaluate(trace: &TimedTrace, scenario: &ConcreteScenario, th: &KpiThresholds) -> Result<KpiReport, KpiError> {
    th.validate()?;
    check_agents(trace, scenario)?;
    let ego_info = &trace.agents[0];
    let others = &trace.agents[1..];

    // per other agent, runs of overlap and of near approach
    let mut collision: Vec<Runs> = others.iter().map(|_| Runs::new()).collect();
    let mut close: Vec<Runs> = others.iter().map(|_| Runs::new()).collect();
    let mut brake = Runs::new();
    let mut accel = Runs::new();
    let mut jerk = Runs::new();
    let mut offroad = Runs::new();
    let mut signal = Vec::new();
    let less = |a: f64, b: f64| a < b;
    let more = |a: f64, b: f64| a > b;
    let bigger = |a: f64, b: f64| a.abs() > b.abs();

    for (i, f) in trace.frames.iter().enumerate() {
        let ego = &f.agents[0];
        let ego_box = ego.obb(ego_info);
        for (k, (info, st)) in others.iter().zip(&f.agents[1..]).enumerate() {
            let b = st.obb(info);
            let overlap = ego_box.overlaps(&b);
            let d = if overlap { 0.0 } else { ego_box.distance(&b) };
            let who = || vec!["ego".to_string(), info.id.clone()];
            collision[k].frame(overlap.then(|| (f.t, 0.0, who())), less);
            close[k].frame((!overlap && d < th.too_close_distance).then(|| (f.t, d, who())), less);
        }
        let ego_only = || vec!["ego".to_string()];
        brake.frame((ego.accel < th.harsh_brake).then(|| (f.t, ego.accel, ego_only())), less);
        accel.frame((ego.accel > th.harsh_accel).then(|| (f.t, ego.accel, ego_only())), more);
        let j = lateral_jerk_at(trace, i).filter(|j| j.abs() > th.lateral_jerk);
        jerk.frame(j.map(|j| (f.t, j, ego_only())), bigger);
        offroad.frame(ego.lane.is_empty().then(|| (f.t, 0.0, ego_only())), less);

        // entering a connector of a signalized junction against red
        if i > 0 {
            let prev = &trace.frames[i - 1].agents[0];
            if let Some((junction, road)) = connector_parts(&ego.lane) {
                let entered = connector_parts(&prev.lane).map_or(true, |(pj, _)| pj != junction);
                let state = f.signals.iter().find(|s| s.junction == junction && s.road == road).map(|s| s.state);
                if entered && state == Some(SignalState::Red) {
                    signal.push(KpiEvent { t: f.t, agents: ego_only(), value: ego.speed });
                }
            }
        }
    }

    let flatten = |runs: Vec<Runs>| {
        let mut v: Vec<KpiEvent> = runs.into_iter().flat_map(Runs::finish).collect();
        v.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap().then_with(|| a.agents.cmp(&b.agents)));
        v
    };
    let mut route = offroad.finish();
    let arrived = trace.end.arrival_time.is_some_and(|t| t <= th.arrival_budget);
    if trace.end.reason == Termination::Budget && !arrived && trace.end.route_progress < th.route_progress_min {
        route.push(KpiEvent { t: trace.duration(), agents: vec!["ego".into()], value: trace.end.route_progress });
    }

    let events = [
        (Kpi::Collision, flatten(collision)),
        (Kpi::TooClose, flatten(close)),
        (Kpi::HarshBrake, brake.finish()),
        (Kpi::HarshAccel, accel.finish()),
        (Kpi::LateralJerk, jerk.finish()),
        (Kpi::RouteDeviation, route),
        (Kpi::SignalViolation, signal),
    ];
    let kpis: Vec<KpiVerdict> =
        events.into_iter().map(|(kpi, events)| KpiVerdict { kpi, violated: !events.is_empty(), events }).collect();
    let safety_critical = kpis.iter().any(|v| v.violated && v.kpi.safety_critical());
    let performance = kpis.iter().any(|v| v.violated && !v.kpi.safety_critical());
    Ok(KpiReport {
        scenario: trace.scenario.clone(),
        safety_critical,
        performance,
        termination: trace.end.reason.clone(),
        route_progress: trace.end.route_progress,
        thresholds: *th,
        kpis,
    })
}
