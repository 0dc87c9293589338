//! Deterministic 2D traffic simulation with a pluggable ego controller.
//!
//! Vehicles move with a kinematic bicycle model (ego) or along their route
//! track (NPCs); pedestrians walk their crosswalk. Every step is recorded in a
//! [`TimedTrace`].

mod baseline;
mod follow;
mod trace;
mod world;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concretize::{ConcreteScenario, SignalState};
use crate::geometry::{Obb, Vec2};
use crate::mapsem::{LaneRef, MapGraph};

pub use baseline::{parse_controller, BaselineController, Fault, BASELINE_HEADWAY, BASELINE_STANDSTILL_GAP};
pub use follow::{follower_accel, gap_equilibrium};
pub use trace::{TraceParseError, TRACE_SCHEMA};
pub use world::annotate;

pub const DEFAULT_DT: f64 = 0.1;
pub const WHEELBASE: f64 = 2.8;
pub const MAX_STEER: f64 = 0.6;
/// Physical acceleration limits applied to every vehicle.
pub const MAX_ACCEL: f64 = 4.0;
pub const MAX_DECEL: f64 = -8.0;
/// Route projection is only trusted within this lateral distance.
pub const ROUTE_TRACKING_RADIUS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Ego,
    Vehicle,
    Pedestrian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentInfo {
    pub id: String,
    pub kind: AgentKind,
    pub length: f64,
    pub width: f64,
}

/// One agent in one frame. `lane` is empty when the agent is on no lane or
/// connector; `lat` is the signed offset from that lane's centre line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub accel: f64,
    pub lane: String,
    pub offset: f64,
    pub lat: f64,
}

impl AgentState {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn obb(&self, info: &AgentInfo) -> Obb {
        Obb::new(self.position(), self.heading, info.length, info.width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    pub junction: String,
    pub road: String,
    pub state: SignalState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    /// Same order as [`TimedTrace::agents`]; the ego comes first.
    pub agents: Vec<AgentState>,
    pub signals: Vec<SignalRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Budget,
    DestinationReached,
    Collision,
    ControllerError,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Budget => "budget",
            Termination::DestinationReached => "destination-reached",
            Termination::Collision => "collision",
            Termination::ControllerError => "controller-error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEnd {
    pub reason: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    /// Fraction of the start-to-destination route distance covered.
    pub route_progress: f64,
    pub destination_reached: bool,
    pub arrival_time: Option<f64>,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedTrace {
    pub scenario: String,
    pub dt: f64,
    pub agents: Vec<AgentInfo>,
    pub frames: Vec<Frame>,
    pub end: TraceEnd,
}

impl TimedTrace {
    pub fn agent_index(&self, id: &str) -> Option<usize> {
        self.agents.iter().position(|a| a.id == id)
    }

    pub fn ego(&self, frame: usize) -> &AgentState {
        &self.frames[frame].agents[0]
    }

    pub fn duration(&self) -> f64 {
        self.frames.last().map_or(0.0, |f| f.t)
    }
}

/// Frame time `i·dt`, rounded so that it prints as the intended decimal.
pub fn frame_time(i: usize, dt: f64) -> f64 {
    (i as f64 * dt * 1e9).round() / 1e9
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Intent {
    Keep,
    ChangeLeft,
    ChangeRight,
    Turn,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Control {
    pub accel: f64,
    /// Front wheel angle in radians, positive to the left.
    pub steer: f64,
    pub intent: Intent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OtherAgent<'a> {
    pub info: &'a AgentInfo,
    pub state: &'a AgentState,
}

pub struct Observation<'a> {
    pub t: f64,
    pub dt: f64,
    pub ego: &'a AgentState,
    pub ego_info: &'a AgentInfo,
    pub steer: f64,
    pub others: Vec<OtherAgent<'a>>,
    pub signals: &'a [SignalRecord],
    pub map: &'a MapGraph,
}

impl Observation<'_> {
    pub fn signal(&self, junction: &str, road: &str) -> Option<SignalState> {
        self.signals.iter().find(|s| s.junction == junction && s.road == road).map(|s| s.state)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutePlan {
    pub route: Vec<LaneRef>,
    pub start: (LaneRef, f64),
    pub destination: (LaneRef, f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct ControllerError(pub String);

/// The system under test. Implementations must reset all internal state in
/// [`EgoController::reset`] and behave deterministically afterwards.
pub trait EgoController {
    fn name(&self) -> String;
    fn reset(&mut self, map: &MapGraph, plan: &RoutePlan);
    fn step(&mut self, obs: &Observation) -> Result<Control, ControllerError>;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("scenario is for map `{scenario}` but map `{map}` was given")]
    MapMismatch { scenario: String, map: String },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    /// Maximum simulated seconds.
    pub budget: f64,
}

impl SimConfig {
    pub fn new(budget: f64) -> Self {
        SimConfig { dt: DEFAULT_DT, budget }
    }
}

/// Runs one episode. Pure in `(scenario, map, controller state after reset, config)`.
pub fn run(
    scenario: &ConcreteScenario,
    map: &MapGraph,
    controller: &mut dyn EgoController,
    config: SimConfig,
) -> Result<TimedTrace, SimError> {
    let mut w = world::World::new(scenario, map, config.dt)?;
    controller.reset(map, &w.plan);
    let steps = (config.budget / config.dt).round() as usize;
    let mut frames = vec![w.frame(0)];
    let mut reason = Termination::Budget;
    let mut message = None;
    for i in 1..=steps {
        let prev = frames.last().unwrap();
        let control = {
            let obs = w.observation(prev);
            controller.step(&obs)
        };
        let control = match control {
            Ok(c) => c,
            Err(e) => {
                reason = Termination::ControllerError;
                message = Some(e.0);
                break;
            }
        };
        w.advance(&control, frame_time(i, config.dt));
        let frame = w.frame(i);
        let collided = w.ego_collides(&frame);
        frames.push(frame);
        if collided {
            reason = Termination::Collision;
            break;
        }
        if w.arrival.is_some() {
            reason = Termination::DestinationReached;
            break;
        }
    }
    let n = frames.len();
    Ok(TimedTrace {
        scenario: scenario.id.clone(),
        dt: config.dt,
        agents: w.infos.clone(),
        frames,
        end: TraceEnd {
            reason,
            message,
            route_progress: w.progress,
            destination_reached: w.arrival.is_some(),
            arrival_time: w.arrival,
            frames: n,
        },
    })
}

/// Trace of a lone ego following `poses` (position, heading, speed), with
/// lane annotations computed against `map`. Accelerations are finite
/// differences of the speeds. Meant for building recognizer and KPI inputs.
pub fn ego_trace(map: &MapGraph, scenario: &str, dt: f64, poses: &[(Vec2, f64, f64)]) -> TimedTrace {
    let frames: Vec<Frame> = poses
        .iter()
        .enumerate()
        .map(|(i, &(p, heading, speed))| {
            let accel = if i == 0 { 0.0 } else { (speed - poses[i - 1].2) / dt };
            let (lane, offset, lat) = match annotate(map, p, &[]) {
                Some((r, pr)) => (map.ref_id(r).to_string(), pr.s, pr.lateral),
                None => (String::new(), 0.0, 0.0),
            };
            Frame {
                t: frame_time(i, dt),
                agents: vec![AgentState { x: p.x, y: p.y, heading, speed, accel, lane, offset, lat }],
                signals: Vec::new(),
            }
        })
        .collect();
    let n = frames.len();
    TimedTrace {
        scenario: scenario.into(),
        dt,
        agents: vec![AgentInfo {
            id: "ego".into(),
            kind: AgentKind::Ego,
            length: crate::concretize::CAR_LENGTH,
            width: crate::concretize::CAR_WIDTH,
        }],
        frames,
        end: TraceEnd {
            reason: Termination::Budget,
            message: None,
            route_progress: 0.0,
            destination_reached: false,
            arrival_time: None,
            frames: n,
        },
    }
}
