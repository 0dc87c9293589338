use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    sample_count, sample_parameter, Behavior, Binding, ConcreteScenario, ConcretizeError, CrosswalkRef, EgoSpec,
    LanePose, NpcSpec, ParameterMap, PedestrianSpec, Phase, Policy, SignalProgram, CAR_LENGTH, CAR_WIDTH,
    PEDESTRIAN_SIZE, SCENARIO_SCHEMA,
};
use crate::catalog::{AbstractScenario, Catalog};
use crate::geometry::{Obb, Vec2};
use crate::mapsem::{Direction, LaneRef, MapGraph, Structure, SubMap, SubMapId, SubMapQuery};
use crate::route::{pose_on, Track};
use crate::seed;

pub const PLACEMENT_RETRIES: usize = 100;
/// Fresh draws of sub-map and ego start before placement gives up.
pub const PLACEMENT_REDRAWS: usize = 8;
/// NPC target speed as a fraction of the lane speed limit.
pub const NPC_SPEED_FRACTION: (f64, f64) = (0.5, 0.9);
/// Minimum surface distance between agents at t = 0.
const CLEARANCE: f64 = 2.0;
/// Deceleration assumed when checking that an NPC can stop behind what is ahead.
const PLACEMENT_DECEL: f64 = 3.0;
const PEDESTRIAN_SPEED: f64 = 1.4;
const PEDESTRIAN_TRIGGER_MAX: f64 = 8.0;
/// How far outside the road edge a pedestrian waits.
pub const PEDESTRIAN_WAIT: f64 = 1.0;
const GREEN: f64 = 12.0;
const YELLOW: f64 = 3.0;
const ALL_RED: f64 = 2.0;

#[derive(Debug, Default)]
struct Requirements {
    structure: Option<Structure>,
    action: Option<Direction>,
    count: Option<[usize; 2]>,
    pedestrians: Option<[usize; 2]>,
    crosswalk: Option<bool>,
    signalized: Option<bool>,
    params: Vec<(String, [f64; 2], Policy)>,
}

fn set_once<T: PartialEq + Copy>(slot: &mut Option<T>, v: T, what: &str) -> Result<(), ConcretizeError> {
    match slot {
        Some(old) if *old != v => Err(ConcretizeError::Conflict(what.into())),
        _ => {
            *slot = Some(v);
            Ok(())
        }
    }
}

fn requirements(abs: &AbstractScenario, catalog: &Catalog, pmap: &ParameterMap) -> Result<Requirements, ConcretizeError> {
    let mut req = Requirements::default();
    for (ci, c) in catalog.categories().iter().enumerate() {
        let element = &c.elements[abs.elements[ci]];
        for b in pmap.bindings(&c.name, element) {
            match b {
                Binding::Param { param, range, policy } => req.params.push((param.clone(), *range, *policy)),
                Binding::Count { count_range } => set_once(&mut req.count, *count_range, "vehicle count")?,
                Binding::Structure { structure } => set_once(&mut req.structure, *structure, "road structure")?,
                Binding::EgoAction { ego_action } => set_once(&mut req.action, *ego_action, "ego action")?,
                Binding::Pedestrians { pedestrians } => set_once(&mut req.pedestrians, *pedestrians, "pedestrians")?,
                Binding::Crosswalk { crosswalk } => set_once(&mut req.crosswalk, *crosswalk, "crosswalk")?,
                Binding::Signalized { signalized } => set_once(&mut req.signalized, *signalized, "signal")?,
            }
        }
    }
    Ok(req)
}

/// One legal way to realize the ego action on a sub-map.
#[derive(Debug, Clone, Copy)]
struct EgoOption {
    start_lane: usize,
    connector: Option<usize>,
}

const MIN_APPROACH_LENGTH: f64 = 50.0;

fn lane_changes_between(map: &MapGraph, from: usize, to: usize) -> Option<Vec<usize>> {
    if from == to {
        return Some(vec![from]);
    }
    let dir = map.lanes()[from].dir;
    for left in [true, false] {
        let mut path = vec![from];
        let mut probe = from;
        while let Some(n) = map.adjacent_lane(probe, left).filter(|&n| map.lanes()[n].dir == dir) {
            path.push(n);
            if n == to {
                return Some(path);
            }
            probe = n;
        }
    }
    None
}

fn ego_options(map: &MapGraph, sub: &SubMap, action: Direction) -> Vec<EgoOption> {
    let mut out = Vec::new();
    match &sub.id {
        SubMapId::Road(id) => {
            if action != Direction::Straight {
                return out;
            }
            let r = map.road(id).expect("sub-map road exists");
            for &l in &map.roads()[r].lanes {
                out.push(EgoOption { start_lane: l, connector: None });
            }
        }
        SubMapId::Junction(id) => {
            let j = map.junction(id).expect("sub-map junction exists");
            for inc in &map.junctions()[j].incident {
                let approach = &map.roads()[inc.road].id;
                let labels = map.relative_direction(id, approach).expect("incident road");
                let ins = map.lanes_entering(j, inc.road);
                let matching: Vec<usize> = ins
                    .iter()
                    .flat_map(|&l| map.connectors_from(l))
                    .filter(|&c| labels[&map.roads()[map.lanes()[map.connectors()[c].to].road].id] == action)
                    .collect();
                if matching.is_empty() {
                    continue;
                }
                for &lane in &ins {
                    if map.lanes()[lane].path.length() < MIN_APPROACH_LENGTH {
                        continue;
                    }
                    // the matching connector needing the fewest lane changes
                    let best = matching
                        .iter()
                        .filter_map(|&c| lane_changes_between(map, lane, map.connectors()[c].from).map(|p| (p.len(), c)))
                        .min();
                    if let Some((_, c)) = best {
                        out.push(EgoOption { start_lane: lane, connector: Some(c) });
                    }
                }
            }
        }
    }
    out
}

struct Placed {
    obb: Obb,
    track: Option<Track>,
    speed: f64,
}

impl Placed {
    /// Along-track gap from this agent to `other` when `other` sits on its track ahead.
    fn gap_to(&self, other: &Obb) -> Option<f64> {
        let track = self.track.as_ref()?;
        let pr = track.path.project(other.center);
        if pr.distance > 2.0 || pr.s <= 0.0 {
            return None;
        }
        Some(pr.s - self.obb.half_length - other.half_length)
    }

    fn compatible(&self, other: &Placed) -> bool {
        if self.obb.distance(&other.obb) < CLEARANCE {
            return false;
        }
        let needs = |a: &Placed, b: &Placed| match a.gap_to(&b.obb) {
            Some(gap) => gap >= a.speed * a.speed / (2.0 * PLACEMENT_DECEL) + 4.0,
            None => true,
        };
        needs(self, other) && needs(other, self)
    }
}

fn lane_box(map: &MapGraph, lane: LaneRef, offset: f64, length: f64, width: f64) -> Obb {
    let (p, h) = pose_on(map, lane, offset);
    Obb::new(p, h, length, width)
}

/// Waiting and far-side positions of a pedestrian on its crosswalk.
pub fn pedestrian_endpoints(map: &MapGraph, spec: &PedestrianSpec) -> Option<(Vec2, Vec2)> {
    let j = map.junction(&spec.crosswalk.junction)?;
    let r = map.road(&spec.crosswalk.road)?;
    let cw = map.crosswalks().iter().find(|c| c.junction == j && c.road == r)?;
    let (a, b) = if spec.from_left { (cw.left, cw.right) } else { (cw.right, cw.left) };
    let d = (b - a).normalized();
    Some((a - d * (PEDESTRIAN_WAIT + spec.queue_offset), b + d * PEDESTRIAN_WAIT))
}

fn signal_programs<R: Rng>(map: &MapGraph, rng: &mut R) -> Vec<SignalProgram> {
    let mut out = Vec::new();
    for j in map.junctions().iter().filter(|j| j.signalized) {
        let mut grouped = vec![false; j.incident.len()];
        let mut phases = Vec::new();
        for (i, inc) in j.incident.iter().enumerate() {
            if grouped[i] {
                continue;
            }
            grouped[i] = true;
            let road = map.roads()[inc.road].id.clone();
            let labels = map.relative_direction(&j.id, &road).expect("incident road");
            let mut roads = vec![road];
            for (k, other) in j.incident.iter().enumerate().skip(i + 1) {
                let oid = &map.roads()[other.road].id;
                if !grouped[k] && labels[oid] == Direction::Straight {
                    grouped[k] = true;
                    roads.push(oid.clone());
                    break;
                }
            }
            phases.push(Phase { roads, green: GREEN, yellow: YELLOW, all_red: ALL_RED });
        }
        let cycle: f64 = phases.iter().map(Phase::duration).sum();
        let offset = (rng.gen_range(0.0..cycle) * 10.0).round() / 10.0;
        out.push(SignalProgram { junction: j.id.clone(), offset, phases });
    }
    out
}

fn describe(req: &Requirements) -> String {
    let mut parts = vec![format!("{:?}", req.structure.expect("checked"))];
    parts.push(format!("ego {}", req.action.expect("checked")));
    if let Some(s) = req.signalized {
        parts.push(if s { "signalized".into() } else { "unsignalized".into() });
    }
    if req.crosswalk == Some(true) || req.pedestrians.is_some_and(|p| p[0] > 0) {
        parts.push("crosswalk".into());
    }
    parts.join(", ")
}

/// Instantiates `abs` on `map`. Pure in its inputs and `seed`.
pub fn instantiate(
    abs: &AbstractScenario,
    catalog: &Catalog,
    map: &MapGraph,
    pmap: &ParameterMap,
    seed: u64,
) -> Result<ConcreteScenario, ConcretizeError> {
    let req = requirements(abs, catalog, pmap)?;
    let structure = req.structure.ok_or(ConcretizeError::MissingBinding("structure"))?;
    let action = req.action.ok_or(ConcretizeError::MissingBinding("ego_action"))?;
    let mut rng = seed::rng(seed);

    // Step 1: sub-map and ego start
    let needs_crosswalk = req.crosswalk == Some(true) || req.pedestrians.is_some_and(|p| p[0] > 0);
    let query = SubMapQuery {
        structure: Some(structure),
        crosswalk: if needs_crosswalk { Some(true) } else { req.crosswalk },
        signalized: req.signalized,
    };
    let candidates: Vec<(SubMap, Vec<EgoOption>)> = map
        .find_submaps(&query)
        .into_iter()
        .map(|s| {
            let o = ego_options(map, &s, action);
            (s, o)
        })
        .filter(|(_, o)| !o.is_empty())
        .collect();
    if candidates.is_empty() {
        return Err(ConcretizeError::NoMatchingSubMap(describe(&req)));
    }
    // a draw whose agents do not fit is redrawn, sub-map and ego included
    let mut last = None;
    for _ in 0..PLACEMENT_REDRAWS {
        match draw(abs, catalog, map, &req, &candidates, seed, &mut rng) {
            Err(ConcretizeError::PlacementExhausted(id)) => last = Some(id),
            other => return other,
        }
    }
    Err(ConcretizeError::PlacementExhausted(last.expect("at least one draw")))
}

/// One draw of sub-map, ego, agents, signals and environment.
fn draw(
    abs: &AbstractScenario,
    catalog: &Catalog,
    map: &MapGraph,
    req: &Requirements,
    candidates: &[(SubMap, Vec<EgoOption>)],
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<ConcreteScenario, ConcretizeError> {
    let structure = req.structure.ok_or(ConcretizeError::MissingBinding("structure"))?;
    let action = req.action.ok_or(ConcretizeError::MissingBinding("ego_action"))?;
    let (sub, options) = &candidates[rng.gen_range(0..candidates.len())];
    let option = options[rng.gen_range(0..options.len())];
    let start_path = &map.lanes()[option.start_lane].path;
    let l0 = start_path.length();

    // Step 2: destination
    let (route, start_offset, dest_lane, dest_offset) = match option.connector {
        None => {
            let s0 = rng.gen_range(0.1 * l0..=0.3 * l0);
            let d = s0 + rng.gen_range(0.4 * l0..=0.6 * l0);
            (vec![option.start_lane_ref()], s0, option.start_lane, d)
        }
        Some(c) => {
            let conn = &map.connectors()[c];
            let to_end = rng.gen_range(45f64.min(0.8 * l0)..=80f64.min(0.9 * l0));
            let s0 = l0 - to_end;
            let mut route: Vec<LaneRef> = lane_changes_between(map, option.start_lane, conn.from)
                .expect("option was built from a reachable lane")
                .into_iter()
                .map(LaneRef::Lane)
                .collect();
            route.push(LaneRef::Connector(c));
            route.push(LaneRef::Lane(conn.to));
            let l2 = map.lanes()[conn.to].path.length();
            let d = rng.gen_range(0.3 * l2..=(0.6 * l2).min(l2 - 10.0).max(0.3 * l2));
            (route, s0, conn.to, d)
        }
    };
    let ego = EgoSpec {
        route: route.iter().map(|&r| map.ref_id(r).to_string()).collect(),
        start: LanePose { lane: map.lanes()[option.start_lane].id.clone(), offset: start_offset },
        destination: LanePose { lane: map.lanes()[dest_lane].id.clone(), offset: dest_offset },
        speed: 0.0,
        action,
        length: CAR_LENGTH,
        width: CAR_WIDTH,
    };
    let ego_lane = LaneRef::Lane(option.start_lane);
    let mut placed = vec![Placed {
        obb: lane_box(map, ego_lane, start_offset, CAR_LENGTH, CAR_WIDTH),
        track: Track::new(map, &crate::route::longitudinal(map, &route), start_offset),
        speed: 0.0,
    }];

    // Step 3: other agents, signals, environment
    let junction = match &sub.id {
        SubMapId::Junction(id) => map.junction(id),
        SubMapId::Road(_) => None,
    };
    let lane_pool: Vec<usize> = match &sub.id {
        SubMapId::Junction(_) => map.junctions()[junction.expect("junction sub-map")]
            .incident
            .iter()
            .flat_map(|i| map.roads()[i.road].lanes.iter().copied())
            .collect(),
        SubMapId::Road(id) => map.roads()[map.road(id).expect("road")].lanes.clone(),
    };
    let n_npcs = req.count.map_or(0, |[lo, hi]| sample_count(lo, hi, rng));
    let mut npcs = Vec::with_capacity(n_npcs);
    for k in 0..n_npcs {
        let id = format!("npc_{}", k + 1);
        let mut done = false;
        for _ in 0..PLACEMENT_RETRIES {
            let lane = lane_pool[rng.gen_range(0..lane_pool.len())];
            let len = map.lanes()[lane].path.length();
            if len < 15.0 {
                continue;
            }
            let offset = rng.gen_range(5.0..len - 5.0);
            let limit = map.roads()[map.lanes()[lane].road].speed_limit;
            let speed = rng.gen_range(NPC_SPEED_FRACTION.0..=NPC_SPEED_FRACTION.1) * limit;
            let mut route = vec![LaneRef::Lane(lane)];
            let exits: Vec<usize> = map.connectors_from(lane).collect();
            if let Some(&c) = exits.choose(rng) {
                route.push(LaneRef::Connector(c));
                route.push(LaneRef::Lane(map.connectors()[c].to));
            }
            let cand = Placed {
                obb: lane_box(map, LaneRef::Lane(lane), offset, CAR_LENGTH, CAR_WIDTH),
                track: Track::new(map, &route, offset),
                speed,
            };
            if placed.iter().all(|p| p.compatible(&cand)) {
                placed.push(cand);
                npcs.push(NpcSpec {
                    id: id.clone(),
                    route: route.iter().map(|&r| map.ref_id(r).to_string()).collect(),
                    start: LanePose { lane: map.lanes()[lane].id.clone(), offset },
                    speed,
                    behavior: Behavior::FollowLane { cautious: true },
                    length: CAR_LENGTH,
                    width: CAR_WIDTH,
                });
                done = true;
                break;
            }
        }
        if !done {
            return Err(ConcretizeError::PlacementExhausted(id));
        }
    }

    let n_peds = req.pedestrians.map_or(0, |[lo, hi]| rng.gen_range(lo..=hi));
    let mut pedestrians = Vec::with_capacity(n_peds);
    if n_peds > 0 {
        let crosswalks: Vec<_> = map
            .crosswalks()
            .iter()
            .filter(|c| Some(c.junction) == junction)
            .collect();
        if crosswalks.is_empty() {
            return Err(ConcretizeError::NoMatchingSubMap(describe(&req)));
        }
        let mut waiting: BTreeMap<(usize, usize, bool), usize> = BTreeMap::new();
        for k in 0..n_peds {
            let cw = crosswalks[rng.gen_range(0..crosswalks.len())];
            let from_left = rng.gen_bool(0.5);
            let trigger = (rng.gen_range(0.0..=PEDESTRIAN_TRIGGER_MAX) * 10.0).round() / 10.0;
            let spec = PedestrianSpec {
                id: format!("ped_{}", k + 1),
                crosswalk: CrosswalkRef {
                    junction: map.junctions()[cw.junction].id.clone(),
                    road: map.roads()[cw.road].id.clone(),
                },
                from_left,
                trigger_time: trigger,
                speed: PEDESTRIAN_SPEED,
                queue_offset: 0.0,
            };
            // queue behind pedestrians already waiting on the same side
            let q = waiting.entry((cw.junction, cw.road, from_left)).or_insert(0);
            let spec = PedestrianSpec { queue_offset: *q as f64 * (PEDESTRIAN_SIZE + 0.3), ..spec };
            *q += 1;
            let (pos, b) = pedestrian_endpoints(map, &spec).expect("crosswalk exists");
            let d = (b - pos).normalized();
            let ped = Placed { obb: Obb::new(pos, d.heading(), PEDESTRIAN_SIZE, PEDESTRIAN_SIZE), track: None, speed: 0.0 };
            if placed.iter().any(|p| p.obb.overlaps(&ped.obb)) {
                return Err(ConcretizeError::PlacementExhausted(spec.id));
            }
            placed.push(ped);
            pedestrians.push(spec);
        }
    }

    let signals = signal_programs(map, rng);
    let mut environment = BTreeMap::new();
    for (name, [lo, hi], policy) in &req.params {
        environment.insert(name.clone(), sample_parameter(*lo, *hi, *policy, rng)?);
    }

    Ok(ConcreteScenario {
        schema: SCENARIO_SCHEMA.into(),
        id: format!("scenario-{seed}"),
        seed,
        map: map.name.clone(),
        abstract_scenario: abs.named(catalog),
        submap: sub.id.clone(),
        structure,
        ego,
        npcs,
        pedestrians,
        environment,
        signals,
        density: req.count,
    })
}

impl EgoOption {
    fn start_lane_ref(&self) -> LaneRef {
        LaneRef::Lane(self.start_lane)
    }
}
