//! Spawn strategies: where the extra NPC goes and how it drives.

use serde::{Deserialize, Serialize};

use crate::concretize::{
    pedestrian_endpoints, spawn_headroom, Behavior, ConcreteScenario, LanePose, NpcSpec, CAR_LENGTH, CAR_WIDTH,
    PEDESTRIAN_SIZE,
};
use crate::geometry::Obb;
use crate::mapsem::{LaneRef, MapGraph};
use crate::route::{pose_on, Track};

use super::{BehavioralPattern, CollisionPoint, PatternClass, PerturbError, SearchConfig};

/// Id prefix of spawned NPCs.
pub const SPAWN_PREFIX: &str = "spawn_";
/// Lowest speed accepted when a short approach forces the NPC to slow down.
const MIN_NPC_SPEED: f64 = 2.0;
/// Resolution of the collision-free placement scan.
const PLACEMENT_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NpcProgram {
    FollowLane,
    /// Drive toward the point and brake at `decel` on reaching it.
    BrakeAtPoint { decel: f64 },
    Stationary,
}

/// A base scenario plus one NPC whose start distance `d` to the collision
/// point is free within `domain`. The NPC starts `d` meters of route before
/// the point; negative `d` puts it past the point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterizedScenario {
    pub base: ConcreteScenario,
    pub point: CollisionPoint,
    pub npc_id: String,
    /// Lanes and connectors from the furthest usable upstream lane through the point.
    pub route: Vec<String>,
    /// Arc length of the point along `route`.
    pub point_station: f64,
    pub program: NpcProgram,
    pub speed: f64,
    /// `v·t`: the distance at which the NPC reaches the point together with the ego.
    pub nominal: f64,
    pub domain: (f64, f64),
}

impl ParameterizedScenario {
    pub fn clamp(&self, d: f64) -> f64 {
        d.clamp(self.domain.0, self.domain.1)
    }

    /// Concrete scenario for `d`, clamped to the domain.
    pub fn instantiate(&self, map: &MapGraph, d: f64) -> ConcreteScenario {
        let d = self.clamp(d);
        let refs = resolve_ids(map, &self.route);
        let track = Track::new(map, &refs, 0.0).expect("route has length");
        let (idx, offset) = track.locate((self.point_station - d).max(0.0));
        let lane = track.pieces[idx].lane;
        let first = refs.iter().position(|&r| r == lane).expect("piece on route");
        let behavior = match self.program {
            NpcProgram::FollowLane => Behavior::FollowLane { cautious: false },
            NpcProgram::BrakeAtPoint { decel } => Behavior::FollowLaneThenBrake {
                cautious: false,
                trigger_distance: d,
                decel,
            },
            NpcProgram::Stationary => Behavior::Stationary,
        };
        let mut sc = self.base.clone();
        sc.id = format!("{}~{}~d{:.2}", self.base.id, self.point.id, d);
        sc.npcs.push(NpcSpec {
            id: self.npc_id.clone(),
            route: self.route[first..].to_vec(),
            start: LanePose { lane: map.ref_id(lane).to_string(), offset },
            speed: self.speed,
            behavior,
            length: CAR_LENGTH,
            width: CAR_WIDTH,
        });
        sc
    }
}

fn resolve_ids(map: &MapGraph, ids: &[String]) -> Vec<LaneRef> {
    ids.iter().map(|id| map.lane_ref(id).expect("route ids come from the map")).collect()
}

/// Element driving into `r`; for a lane, the straightest incoming connector.
fn predecessor(map: &MapGraph, r: LaneRef) -> Option<LaneRef> {
    match r {
        LaneRef::Connector(c) => Some(LaneRef::Lane(map.connectors()[c].from)),
        LaneRef::Lane(l) => map
            .connectors()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.to == l)
            .min_by(|(a, ca), (b, cb)| {
                let ta = ca.path.total_turn().abs();
                let tb = cb.path.total_turn().abs();
                ta.total_cmp(&tb).then(a.cmp(b))
            })
            .map(|(i, _)| LaneRef::Connector(i)),
    }
}

/// Where the NPC must pass: its route from the point's lane on, the element
/// holding the point, and the point's offset along it.
struct Target {
    tail: Vec<LaneRef>,
    at: LaneRef,
    offset: f64,
    program: NpcProgram,
    speed: f64,
}

fn lane_of(map: &MapGraph, id: &str) -> Result<LaneRef, PerturbError> {
    map.lane_ref(id).ok_or_else(|| PerturbError::NoLegalPlacement(format!("ego is off the road at the point (`{id}`)")))
}

/// NPC in the lane the ego moves into, driving that lane's direction.
fn lateral_target(map: &MapGraph, point: &CollisionPoint) -> Result<Target, PerturbError> {
    let from = point.from_lane.as_deref().unwrap_or(&point.lane);
    let LaneRef::Lane(a) = lane_of(map, from)? else {
        return Err(PerturbError::NoLegalPlacement(format!("`{from}` is a junction connector")));
    };
    let lane_a = &map.lanes()[a];
    let heading_a = lane_a.path.heading_at(lane_a.path.project(point.position).s);
    let with_a = (point.heading - heading_a).cos() >= 0.0;
    let left = matches!(point.pattern, BehavioralPattern::LaneChangeLeft | BehavioralPattern::EncroachingChangeLeft);
    let side = if left { "left" } else { "right" };
    let b = map
        .adjacent_lane(a, left == with_a)
        .ok_or_else(|| PerturbError::NoLegalPlacement(format!("`{from}` has no {side} neighbour")))?;
    let lane_b = &map.lanes()[b];
    Ok(Target {
        tail: vec![LaneRef::Lane(b)],
        at: LaneRef::Lane(b),
        offset: lane_b.path.project(point.position).s,
        program: NpcProgram::FollowLane,
        speed: map.speed_limit(LaneRef::Lane(b)),
    })
}

/// NPC on another approach of the junction, through the connector passing
/// closest to the point.
fn crossing_target(map: &MapGraph, point: &CollisionPoint) -> Result<Target, PerturbError> {
    let LaneRef::Connector(own) = lane_of(map, &point.lane)? else {
        return Err(PerturbError::NoLegalPlacement(format!("turn point on lane `{}`", point.lane)));
    };
    let own = &map.connectors()[own];
    let own_road = map.lanes()[own.from].road;
    let best = map
        .connectors()
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            c.junction == own.junction && map.lanes()[c.from].road != own_road && map.lanes()[c.to].road != own_road
        })
        .map(|(i, c)| (i, c.path.project(point.position)))
        .min_by(|(a, pa), (b, pb)| pa.lateral.abs().total_cmp(&pb.lateral.abs()).then(a.cmp(b)));
    let Some((c, pr)) = best else {
        return Err(PerturbError::NoLegalPlacement(format!("no crossing approach at `{}`", map.junctions()[own.junction].id)));
    };
    let conn = &map.connectors()[c];
    Ok(Target {
        tail: vec![LaneRef::Lane(conn.from), LaneRef::Connector(c), LaneRef::Lane(conn.to)],
        at: LaneRef::Connector(c),
        offset: pr.s,
        program: NpcProgram::FollowLane,
        speed: map.speed_limit(LaneRef::Lane(conn.from)),
    })
}

/// NPC ahead of the ego in its own lane, braking hard at the point.
fn same_lane_target(map: &MapGraph, point: &CollisionPoint, cfg: &SearchConfig) -> Result<Target, PerturbError> {
    let at = lane_of(map, &point.lane)?;
    Ok(Target {
        tail: vec![at],
        at,
        offset: map.path(at).project(point.position).s,
        program: NpcProgram::BrakeAtPoint { decel: cfg.brake_decel },
        speed: cfg.same_lane_speed_fraction * map.speed_limit(at),
    })
}

fn initial_boxes(map: &MapGraph, sc: &ConcreteScenario) -> Result<Vec<Obb>, PerturbError> {
    let unknown = |id: &str| PerturbError::NoLegalPlacement(format!("base scenario names unknown lane `{id}`"));
    let mut out = Vec::new();
    let r = map.lane_ref(&sc.ego.start.lane).ok_or_else(|| unknown(&sc.ego.start.lane))?;
    let (p, h) = pose_on(map, r, sc.ego.start.offset);
    out.push(Obb::new(p, h, sc.ego.length, sc.ego.width));
    for n in &sc.npcs {
        let r = map.lane_ref(&n.start.lane).ok_or_else(|| unknown(&n.start.lane))?;
        let (p, h) = pose_on(map, r, n.start.offset);
        out.push(Obb::new(p, h, n.length, n.width));
    }
    for ped in &sc.pedestrians {
        if let Some((from, _)) = pedestrian_endpoints(map, ped) {
            out.push(Obb::new(from, 0.0, PEDESTRIAN_SIZE, PEDESTRIAN_SIZE));
        }
    }
    Ok(out)
}

/// Builds the spawn scenario for `point` on top of `base`.
///
/// Lane changes and encroachments put a free-flowing NPC at the speed limit
/// in the lane the ego moves into; turns put one on the crossing approach;
/// lane following puts an abruptly braking NPC ahead in the same lane, or a
/// stationary one at the point when the lane is too short to approach it.
/// The route is extended upstream through the straightest predecessors. The
/// domain `[v·t − Δ, v·t + Δ]` is narrowed to the contiguous interval of
/// start positions that are on the route and clear of every initial agent.
pub fn build_parameterized_scenario(
    map: &MapGraph,
    point: &CollisionPoint,
    base: &ConcreteScenario,
    cfg: &SearchConfig,
) -> Result<ParameterizedScenario, PerturbError> {
    if let Some(density) = base.density {
        if spawn_headroom(base, density)? == 0 {
            return Err(PerturbError::NoHeadroom);
        }
    }
    let target = match point.pattern.class() {
        PatternClass::LaneChange | PatternClass::Encroaching => lateral_target(map, point)?,
        PatternClass::Turn | PatternClass::UTurn => crossing_target(map, point)?,
        PatternClass::LaneFollowing => same_lane_target(map, point, cfg)?,
    };
    let t = point.t.max(0.0);
    let mut speed = target.speed;
    let mut program = target.program;

    let mut refs = target.tail.clone();
    let need = speed * t + cfg.delta + CAR_LENGTH;
    let mut upstream = target.offset;
    while upstream < need {
        let Some(p) = predecessor(map, refs[0]) else { break };
        if refs.contains(&p) {
            break;
        }
        upstream += map.path(p).length();
        refs.insert(0, p);
    }
    let track = Track::new(map, &refs, 0.0)
        .ok_or_else(|| PerturbError::NoLegalPlacement("spawn route has no length".into()))?;
    let point_station = track
        .station_of(target.at, target.offset)
        .ok_or_else(|| PerturbError::NoLegalPlacement("point not on spawn route".into()))?;

    let boxes = initial_boxes(map, base)?;
    let mut available = point_station;
    if program != NpcProgram::FollowLane {
        // stay ahead of the ego when sharing its lane
        let (p, _) = pose_on(map, lane_of(map, &base.ego.start.lane)?, base.ego.start.offset);
        let pr = track.path.project(p);
        if pr.lateral.abs() < map.width(target.at) / 2.0 && pr.s <= point_station {
            available = available.min(point_station - pr.s - base.ego.length - cfg.clearance);
        }
    }
    if speed * t - cfg.delta > available {
        if matches!(program, NpcProgram::BrakeAtPoint { .. }) {
            program = NpcProgram::Stationary;
            speed = 0.0;
        } else {
            let lowered = if t > 0.0 { (available - cfg.delta) / t } else { 0.0 };
            if lowered < MIN_NPC_SPEED {
                return Err(PerturbError::NoLegalPlacement(format!(
                    "approach of {available:.1} m too short for arrival at t = {t:.1} s"
                )));
            }
            speed = lowered;
        }
    }
    let nominal = speed * t;
    // keep the whole car on the route
    let ahead = point_station - track.length() + CAR_LENGTH;
    let lo = (nominal - cfg.delta).max(ahead);
    let hi = (nominal + cfg.delta).min(available.max(ahead));
    if lo > hi {
        return Err(PerturbError::NoLegalPlacement("empty distance domain".into()));
    }

    let clear = |d: f64| {
        let s = (point_station - d).clamp(0.0, track.length());
        let me = Obb::new(track.path.point_at(s), track.path.heading_at(s), CAR_LENGTH, CAR_WIDTH);
        boxes.iter().all(|b| !me.overlaps(b) && me.distance(b) >= cfg.clearance)
    };
    let mut grid: Vec<f64> = Vec::new();
    let mut d = lo;
    while d < hi {
        grid.push(d);
        d += PLACEMENT_STEP;
    }
    grid.push(hi);
    let free: Vec<bool> = grid.iter().map(|&d| clear(d)).collect();
    let center = grid
        .iter()
        .enumerate()
        .filter(|&(i, _)| free[i])
        .min_by(|(_, a), (_, b)| (*a - nominal).abs().total_cmp(&(*b - nominal).abs()))
        .map(|(i, _)| i)
        .ok_or_else(|| PerturbError::NoLegalPlacement("every start position overlaps an agent".into()))?;
    let (mut i0, mut i1) = (center, center);
    while i0 > 0 && free[i0 - 1] {
        i0 -= 1;
    }
    while i1 + 1 < grid.len() && free[i1 + 1] {
        i1 += 1;
    }

    let spawned = base.npcs.iter().filter(|n| n.id.starts_with(SPAWN_PREFIX)).count();
    Ok(ParameterizedScenario {
        base: base.clone(),
        point: point.clone(),
        npc_id: format!("{SPAWN_PREFIX}{spawned}"),
        route: refs.iter().map(|&r| map.ref_id(r).to_string()).collect(),
        point_station,
        program,
        speed,
        nominal,
        domain: (grid[i0], grid[i1]),
    })
}
