//! Rule-based ego planner: pure-pursuit steering along the route, car
//! following, stop lines at red signals and gap-accepting lane changes.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::concretize::SignalState;
use crate::geometry::{wrap_angle, Polyline};
use crate::mapsem::{LaneRef, MapGraph};
use crate::route::Track;

use super::follow::{
    approach_accel, cruise_accel, follower_accel, nearest_obstacle, stop_accel, Body, STOP_STANDOFF,
};
use super::{Control, ControllerError, EgoController, Intent, Observation, RoutePlan, MAX_ACCEL, MAX_DECEL, MAX_STEER, WHEELBASE};

pub const BASELINE_STANDSTILL_GAP: f64 = 4.0;
pub const BASELINE_HEADWAY: f64 = 1.5;
const LATERAL_ACCEL: f64 = 1.5;
const STEER_RATE: f64 = 0.8;
/// Seconds of travel a lane change is spread over, within the length bounds below.
const LANE_CHANGE_TIME: f64 = 5.0;
const LANE_CHANGE_MIN: f64 = 45.0;
const LANE_CHANGE_MAX: f64 = 70.0;
const LATE_BRAKE_TTC: f64 = 1.2;
const LATE_BRAKE_DECEL: f64 = 3.5;
const ROLLING_SPEED: f64 = 5.0;
const YELLOW_STOP_DECEL: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Fault {
    /// Never changes lane ahead of a right turn.
    NoRightTurnLaneChange,
    /// Ignores vehicles ahead until time-to-collision drops below 1.2 s,
    /// then brakes at no more than 3.5 m/s².
    LateBraking,
    /// Treats red signals as a 5 m/s speed limit.
    RedLightRolling,
}

impl Fault {
    pub const ALL: [Fault; 3] = [Fault::NoRightTurnLaneChange, Fault::LateBraking, Fault::RedLightRolling];

    pub fn as_str(self) -> &'static str {
        match self {
            Fault::NoRightTurnLaneChange => "no-right-turn-lane-change",
            Fault::LateBraking => "late-braking",
            Fault::RedLightRolling => "red-light-rolling",
        }
    }
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Fault {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Fault::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown fault `{s}`"))
    }
}

/// Parses `baseline` or `baseline:fault[,fault...]`.
pub fn parse_controller(spec: &str) -> Result<BaselineController, String> {
    let (name, faults) = match spec.split_once(':') {
        Some((n, f)) => (n, f),
        None => (spec, ""),
    };
    if name != "baseline" {
        return Err(format!("unknown controller `{name}`"));
    }
    let faults = faults
        .split(',')
        .filter(|s| !s.is_empty())
        .map(Fault::from_str)
        .collect::<Result<BTreeSet<_>, _>>()?;
    Ok(BaselineController::with_faults(faults))
}

#[derive(Debug, Clone)]
struct RefPiece {
    /// Index into the route.
    ridx: usize,
    start: f64,
    end: f64,
}

#[derive(Debug, Clone)]
struct Reference {
    path: Polyline,
    pieces: Vec<RefPiece>,
    changing_to: Option<usize>,
}

impl Reference {
    fn last_ridx(&self) -> usize {
        self.pieces.last().map_or(0, |p| p.ridx)
    }

    fn piece_at(&self, s: f64) -> usize {
        self.pieces.iter().position(|p| s < p.end).unwrap_or(self.pieces.len() - 1)
    }
}

#[derive(Debug, Clone)]
struct State {
    route: Vec<LaneRef>,
    idx: usize,
    reference: Reference,
    s: f64,
    steer: f64,
}

#[derive(Debug, Clone, Default)]
pub struct BaselineController {
    faults: BTreeSet<Fault>,
    state: Option<State>,
}

fn same_road(map: &MapGraph, a: LaneRef, b: LaneRef) -> bool {
    match (a, b) {
        (LaneRef::Lane(x), LaneRef::Lane(y)) => map.lanes()[x].road == map.lanes()[y].road,
        _ => false,
    }
}

/// Route indices from `from` up to the next lane change (inclusive of the
/// lane where it must happen).
fn run_until_change(map: &MapGraph, route: &[LaneRef], from: usize) -> Vec<usize> {
    let mut out = vec![from];
    let mut i = from;
    while i + 1 < route.len() && !same_road(map, route[i], route[i + 1]) {
        i += 1;
        out.push(i);
    }
    out
}

fn normal_reference(map: &MapGraph, route: &[LaneRef], from: usize) -> Reference {
    let idxs = run_until_change(map, route, from);
    let refs: Vec<LaneRef> = idxs.iter().map(|&i| route[i]).collect();
    let track = Track::new(map, &refs, 0.0).expect("route lanes have length");
    let pieces = track
        .pieces
        .iter()
        .zip(&idxs)
        .map(|(p, &ridx)| RefPiece { ridx, start: p.start, end: p.end })
        .collect();
    Reference { path: track.path, pieces, changing_to: None }
}

fn quintic(u: f64) -> f64 {
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

impl BaselineController {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_faults(faults: impl IntoIterator<Item = Fault>) -> Self {
        BaselineController { faults: faults.into_iter().collect(), state: None }
    }

    pub fn faults(&self) -> &BTreeSet<Fault> {
        &self.faults
    }

    fn has(&self, f: Fault) -> bool {
        self.faults.contains(&f)
    }

    /// Whether the lane change before route index `target` leads into a right turn.
    fn feeds_right_turn(map: &MapGraph, route: &[LaneRef], target: usize) -> bool {
        route[target..].iter().find_map(|r| match r {
            LaneRef::Connector(c) => Some(map.connectors()[*c].path.total_turn() < -std::f64::consts::FRAC_PI_4),
            LaneRef::Lane(_) => None,
        }) == Some(true)
    }

    fn gap_accepted(obs: &Observation, target: usize, ego_s_on_target: f64) -> bool {
        let map = obs.map;
        let lane = &map.lanes()[target];
        let v = obs.ego.speed;
        let len = obs.ego_info.length;
        obs.others.iter().all(|o| {
            let pr = lane.path.project(o.state.position());
            if pr.lateral.abs() > lane.width / 2.0 + 0.5 || pr.distance > lane.width {
                return true;
            }
            let rel = pr.s - ego_s_on_target;
            if rel >= 0.0 {
                rel - len >= (0.8 * v).max(6.0)
            } else {
                -rel - len >= (1.5 * o.state.speed).max(6.0)
            }
        })
    }

    fn try_lane_change(&self, obs: &Observation, st: &mut State) -> bool {
        let map = obs.map;
        let j = st.reference.last_ridx();
        if st.reference.changing_to.is_some() || st.idx != j || j + 1 >= st.route.len() {
            return false;
        }
        let (LaneRef::Lane(cur), LaneRef::Lane(tgt)) = (st.route[j], st.route[j + 1]) else { return false };
        if map.lanes()[cur].road != map.lanes()[tgt].road {
            return false;
        }
        if self.has(Fault::NoRightTurnLaneChange) && Self::feeds_right_turn(map, &st.route, j + 1) {
            return false;
        }
        let cur_path = &map.lanes()[cur].path;
        let tgt_path = &map.lanes()[tgt].path;
        let pos = obs.ego.position();
        let s_c = cur_path.project(pos).s;
        let s_t = tgt_path.project(pos).s;
        let room = tgt_path.length() - s_t - 5.0;
        let lc = (LANE_CHANGE_TIME * obs.ego.speed).clamp(LANE_CHANGE_MIN, LANE_CHANGE_MAX).min(room);
        if lc < 10.0 || !Self::gap_accepted(obs, tgt, s_t) {
            return false;
        }
        let n = lc.ceil() as usize;
        let mut pts = Vec::with_capacity(n + 1);
        pts.push(pos);
        for i in 1..=n {
            let u = i as f64 / n as f64;
            let base = cur_path.point_at(s_c + u * lc);
            let on_target = tgt_path.point_at(tgt_path.project(base).s);
            pts.push(base + (on_target - base) * quintic(u));
        }
        let blend_end = tgt_path.project(*pts.last().unwrap()).s;
        let idxs = run_until_change(map, &st.route, j + 1);
        let refs: Vec<LaneRef> = idxs.iter().map(|&i| st.route[i]).collect();
        let Some(rest) = Track::new(map, &refs, blend_end + 1.0) else { return false };
        let Some(blend) = Polyline::new(pts) else { return false };
        let head = blend.length();
        let Some(path) = Polyline::concat(&[&blend, &rest.path]) else { return false };
        let gap = path.length() - head - rest.length();
        let mut pieces: Vec<RefPiece> = rest
            .pieces
            .iter()
            .zip(&idxs)
            .map(|(p, &ridx)| RefPiece { ridx, start: p.start + head + gap, end: p.end + head + gap })
            .collect();
        pieces[0].start = 0.0;
        st.reference = Reference { path, pieces, changing_to: Some(j + 1) };
        st.s = 0.0;
        true
    }

    fn steer(&self, obs: &Observation, st: &mut State) -> f64 {
        let v = obs.ego.speed;
        let ld = (3.0 + 0.4 * v).clamp(4.0, 12.0);
        let target = st.reference.path.point_at(st.s + ld);
        let pos = obs.ego.position();
        let to = target - pos;
        let alpha = wrap_angle(to.heading() - obs.ego.heading);
        let dist = to.norm().max(1.0);
        let desired = (2.0 * WHEELBASE * alpha.sin() / dist).atan();
        let max_delta = STEER_RATE * obs.dt;
        let steer = (st.steer + (desired - st.steer).clamp(-max_delta, max_delta)).clamp(-MAX_STEER, MAX_STEER);
        st.steer = steer;
        steer
    }

    fn longitudinal(&self, obs: &Observation, st: &State) -> (f64, bool) {
        let map = obs.map;
        let v = obs.ego.speed;
        let half_len = obs.ego_info.length / 2.0;
        let path = &st.reference.path;
        let k = st.reference.piece_at(st.s);
        let here = st.route[st.reference.pieces[k].ridx];
        let limit = map.speed_limit(here);
        let mut a = cruise_accel(v, limit);
        let mut stopping = false;

        // curves ahead
        let horizon = v * v / (2.0 * 1.5) + 20.0;
        let mut d = 2.0;
        while d < horizon && st.s + d + 2.0 < path.length() {
            let h0 = path.heading_at(st.s + d - 2.0);
            let h1 = path.heading_at(st.s + d + 2.0);
            let kappa = wrap_angle(h1 - h0).abs() / 4.0;
            if kappa > 1e-3 {
                let v_curve = (LATERAL_ACCEL / kappa).sqrt();
                a = a.min(approach_accel(v, limit, d, v_curve));
            }
            d += 2.0;
        }

        // vehicles and pedestrians
        let me = Body { pos: obs.ego.position(), heading: obs.ego.heading, speed: v, length: obs.ego_info.length, width: obs.ego_info.width };
        let bodies: Vec<Body> = obs
            .others
            .iter()
            .map(|o| Body {
                pos: o.state.position(),
                heading: o.state.heading,
                speed: o.state.speed,
                length: o.info.length,
                width: o.info.width,
            })
            .collect();
        if let Some(o) = nearest_obstacle(path, st.s, &me, &bodies, 60.0 + 2.0 * v) {
            if self.has(Fault::LateBraking) {
                let closing = v - o.speed;
                if closing > 0.0 && o.gap / closing < LATE_BRAKE_TTC {
                    a = a.min(-LATE_BRAKE_DECEL);
                    stopping = true;
                }
            } else {
                let af = follower_accel(o.gap, v, o.speed, BASELINE_STANDSTILL_GAP, BASELINE_HEADWAY);
                if af < a {
                    a = af;
                    stopping = af < 0.0;
                }
            }
        }

        // signals at the end of the current lane
        let piece = &st.reference.pieces[k];
        if let (LaneRef::Lane(l), Some(next)) = (here, st.reference.pieces.get(k + 1)) {
            if let LaneRef::Connector(c) = st.route[next.ridx] {
                let junction = &map.junctions()[map.connectors()[c].junction];
                let road = &map.roads()[map.lanes()[l].road].id;
                let d = piece.end - st.s - half_len - STOP_STANDOFF;
                let must_stop = match obs.signal(&junction.id, road) {
                    Some(SignalState::Red) => true,
                    Some(SignalState::Yellow) => v * v / (2.0 * d.max(0.1)) <= YELLOW_STOP_DECEL,
                    _ => false,
                };
                if must_stop {
                    let ar = if self.has(Fault::RedLightRolling) {
                        approach_accel(v, limit, d, ROLLING_SPEED)
                    } else {
                        stop_accel(v, limit, d)
                    };
                    if ar < a {
                        a = ar;
                        stopping = true;
                    }
                }
            }
        }

        // end of the reference with a lane change still pending
        let last = st.reference.last_ridx();
        if st.reference.changing_to.is_none() && last + 1 < st.route.len() {
            let d = path.length() - st.s - half_len - STOP_STANDOFF;
            let ar = stop_accel(v, limit, d);
            if ar < a {
                a = ar;
                stopping = true;
            }
        }
        (a.clamp(MAX_DECEL, MAX_ACCEL), stopping)
    }
}

impl EgoController for BaselineController {
    fn name(&self) -> String {
        if self.faults.is_empty() {
            "baseline".into()
        } else {
            let f: Vec<&str> = self.faults.iter().map(|f| f.as_str()).collect();
            format!("baseline:{}", f.join(","))
        }
    }

    fn reset(&mut self, map: &MapGraph, plan: &RoutePlan) {
        let reference = normal_reference(map, &plan.route, 0);
        let s = reference.path.project(map.path(plan.start.0).point_at(plan.start.1)).s;
        self.state = Some(State { route: plan.route.clone(), idx: 0, reference, s, steer: 0.0 });
    }

    fn step(&mut self, obs: &Observation) -> Result<Control, ControllerError> {
        let mut st = self.state.take().ok_or_else(|| ControllerError("controller was not reset".into()))?;
        let map = obs.map;
        let pos = obs.ego.position();

        if let Some(r) = map.lane_ref(&obs.ego.lane) {
            if let Some(p) = st.route[st.idx..].iter().position(|&x| x == r) {
                st.idx += p;
            }
        }
        if let Some(t) = st.reference.changing_to {
            if st.idx >= t {
                st.reference.changing_to = None;
            }
        }
        let on_reference = (st.reference.pieces.iter().any(|p| p.ridx == st.idx)
            || st.reference.changing_to == Some(st.idx + 1))
            && st.reference.path.project_within(pos, st.s - 5.0, st.s + 20.0).distance < 8.0;
        if !on_reference {
            st.reference = normal_reference(map, &st.route, st.idx);
            st.s = st.reference.path.project(pos).s;
        }
        self.try_lane_change(obs, &mut st);
        st.s = st.reference.path.project_within(pos, st.s - 5.0, st.s + 20.0).s;

        let steer = self.steer(obs, &mut st);
        let (accel, stopping) = self.longitudinal(obs, &st);
        let intent = if stopping {
            Intent::Stop
        } else if let Some(t) = st.reference.changing_to {
            let (LaneRef::Lane(a), LaneRef::Lane(b)) = (st.route[t - 1], st.route[t]) else { unreachable!() };
            if map.adjacent_lane(a, true) == Some(b) {
                Intent::ChangeLeft
            } else {
                Intent::ChangeRight
            }
        } else if matches!(st.route[st.reference.pieces[st.reference.piece_at(st.s)].ridx], LaneRef::Connector(_)) {
            Intent::Turn
        } else {
            Intent::Keep
        };
        self.state = Some(st);
        Ok(Control { accel, steer, intent })
    }
}
