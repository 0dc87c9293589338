//! Agent state and stepping for one episode.

use crate::concretize::{pedestrian_endpoints, Behavior, ConcreteScenario, SignalProgram, SignalState, PEDESTRIAN_SIZE};
use crate::geometry::{wrap_angle, Projection, Vec2};
use crate::mapsem::{LaneRef, MapGraph};
use crate::route::{longitudinal, pose_on, resolve, Track};

use super::follow::{approach_accel, cruise_accel, follower_accel, nearest_obstacle, stop_accel, Body, STOP_STANDOFF};
use super::{
    frame_time, AgentInfo, AgentKind, AgentState, Control, Frame, Observation, OtherAgent, RoutePlan, SignalRecord,
    SimError, MAX_ACCEL, MAX_DECEL, MAX_STEER, ROUTE_TRACKING_RADIUS, WHEELBASE,
};

/// Extra lateral slack for connectors: the whole junction area is drivable.
const JUNCTION_SLACK: f64 = 2.0;
const NPC_STANDSTILL_GAP: f64 = 3.0;
const NPC_HEADWAY: f64 = 1.2;
/// Route is extended once fewer than this many meters remain.
const NPC_EXTEND_AHEAD: f64 = 60.0;

/// Lane or connector under `p`, with the projection onto it. `preferred`
/// refs win over other lanes; connectors only match inside their junction.
pub fn annotate(map: &MapGraph, p: Vec2, preferred: &[LaneRef]) -> Option<(LaneRef, Projection)> {
    let contains = |r: LaneRef, pr: &Projection| {
        let len = map.path(r).length();
        if pr.s <= 1e-6 || pr.s >= len - 1e-6 {
            return false;
        }
        let half = map.width(r) / 2.0;
        match r {
            LaneRef::Lane(_) => pr.lateral.abs() <= half,
            LaneRef::Connector(c) => {
                pr.lateral.abs() <= half + JUNCTION_SLACK && map.in_junction_area(map.connectors()[c].junction, p)
            }
        }
    };
    let pick = |cands: &mut dyn Iterator<Item = (LaneRef, Projection)>| {
        cands.fold(None, |best: Option<(LaneRef, Projection)>, (r, pr)| match best {
            Some((_, b)) if b.lateral.abs() <= pr.lateral.abs() => best,
            _ => Some((r, pr)),
        })
    };
    let hit = pick(&mut preferred.iter().map(|&r| (r, map.path(r).project(p))).filter(|(r, pr)| contains(*r, pr)));
    if hit.is_some() {
        return hit;
    }
    let hit = pick(&mut map.lanes_at(p).into_iter().map(|(l, pr)| (LaneRef::Lane(l), pr)));
    if hit.is_some() {
        return hit;
    }
    let j = (0..map.junctions().len()).find(|&j| map.in_junction_area(j, p))?;
    let conns = &map.junctions()[j].connectors;
    let in_pref = |c: usize| preferred.contains(&LaneRef::Connector(c));
    conns
        .iter()
        .map(|&c| (LaneRef::Connector(c), map.connectors()[c].path.project(p), in_pref(c)))
        .fold(None, |best: Option<(LaneRef, Projection, bool)>, cur| match best {
            Some(b) if (b.2, -b.1.distance) >= (cur.2, -cur.1.distance) => Some(b),
            _ => Some(cur),
        })
        .map(|(r, pr, _)| (r, pr))
}

struct Ego {
    pos: Vec2,
    heading: f64,
    speed: f64,
    accel: f64,
    steer: f64,
}

struct Npc {
    refs: Vec<LaneRef>,
    start_offset: f64,
    track: Track,
    s: f64,
    speed: f64,
    accel: f64,
    target: f64,
    behavior: Behavior,
    braking: bool,
    travelled: f64,
}

struct Pedestrian {
    from: Vec2,
    to: Vec2,
    trigger: f64,
    speed: f64,
    walked: f64,
    current_speed: f64,
    accel: f64,
}

pub(crate) struct World<'a> {
    map: &'a MapGraph,
    dt: f64,
    t: f64,
    pub infos: Vec<AgentInfo>,
    pub plan: RoutePlan,
    ego: Ego,
    progress_track: Track,
    progress_s: f64,
    dest_station: f64,
    pub progress: f64,
    pub arrival: Option<f64>,
    npcs: Vec<Npc>,
    peds: Vec<Pedestrian>,
    signals: Vec<(SignalProgram, Vec<String>)>,
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::InvalidScenario(msg.into())
}

impl<'a> World<'a> {
    pub fn new(sc: &ConcreteScenario, map: &'a MapGraph, dt: f64) -> Result<Self, SimError> {
        if sc.map != map.name {
            return Err(SimError::MapMismatch { scenario: sc.map.clone(), map: map.name.clone() });
        }
        let route = resolve(map, &sc.ego.route).map_err(|e| invalid(format!("ego route: {e}")))?;
        let lane_of = |id: &str| map.lane_ref(id).ok_or_else(|| invalid(format!("unknown lane `{id}`")));
        let start = lane_of(&sc.ego.start.lane)?;
        let dest = lane_of(&sc.ego.destination.lane)?;
        if route.first() != Some(&start) || route.last() != Some(&dest) {
            return Err(invalid("ego route must begin at the start lane and end at the destination lane"));
        }
        let plan = RoutePlan {
            route: route.clone(),
            start: (start, sc.ego.start.offset),
            destination: (dest, sc.ego.destination.offset),
        };
        let progress_track = Track::new(map, &longitudinal(map, &route), sc.ego.start.offset)
            .ok_or_else(|| invalid("ego route has no length"))?;
        let dest_station = progress_track
            .station_of(dest, sc.ego.destination.offset)
            .ok_or_else(|| invalid("destination not on route"))?
            .max(1e-6);
        let (pos, heading) = pose_on(map, start, sc.ego.start.offset);
        let ego = Ego { pos, heading, speed: sc.ego.speed, accel: 0.0, steer: 0.0 };

        let mut infos = vec![AgentInfo {
            id: "ego".into(),
            kind: AgentKind::Ego,
            length: sc.ego.length,
            width: sc.ego.width,
        }];
        let mut npcs = Vec::new();
        for n in &sc.npcs {
            let refs = resolve(map, &n.route).map_err(|e| invalid(format!("{}: {e}", n.id)))?;
            let refs = longitudinal(map, &refs);
            if map.lane_ref(&n.start.lane) != refs.first().copied() {
                return Err(invalid(format!("{}: route must begin at its start lane", n.id)));
            }
            let track = Track::new(map, &refs, n.start.offset).ok_or_else(|| invalid(format!("{}: empty route", n.id)))?;
            let speed = if n.behavior == Behavior::Stationary { 0.0 } else { n.speed };
            npcs.push(Npc {
                refs,
                start_offset: n.start.offset,
                track,
                s: 0.0,
                speed,
                accel: 0.0,
                target: n.speed,
                behavior: n.behavior.clone(),
                braking: false,
                travelled: 0.0,
            });
            infos.push(AgentInfo { id: n.id.clone(), kind: AgentKind::Vehicle, length: n.length, width: n.width });
        }
        let mut peds = Vec::new();
        for p in &sc.pedestrians {
            let (from, to) = pedestrian_endpoints(map, p).ok_or_else(|| invalid(format!("{}: unknown crosswalk", p.id)))?;
            peds.push(Pedestrian {
                from,
                to,
                trigger: p.trigger_time,
                speed: p.speed,
                walked: 0.0,
                current_speed: 0.0,
                accel: 0.0,
            });
            infos.push(AgentInfo {
                id: p.id.clone(),
                kind: AgentKind::Pedestrian,
                length: PEDESTRIAN_SIZE,
                width: PEDESTRIAN_SIZE,
            });
        }
        let mut signals = Vec::new();
        for prog in &sc.signals {
            let j = map.junction(&prog.junction).ok_or_else(|| invalid(format!("unknown junction `{}`", prog.junction)))?;
            let roads = map.junctions()[j].incident.iter().map(|i| map.roads()[i.road].id.clone()).collect();
            signals.push((prog.clone(), roads));
        }
        let mut w = World {
            map,
            dt,
            t: 0.0,
            infos,
            plan,
            ego,
            progress_track,
            progress_s: 0.0,
            dest_station,
            progress: 0.0,
            arrival: None,
            npcs,
            peds,
            signals,
        };
        w.update_progress();
        Ok(w)
    }

    fn signal_records(&self, t: f64) -> Vec<SignalRecord> {
        let mut out = Vec::new();
        for (prog, roads) in &self.signals {
            for r in roads {
                out.push(SignalRecord { junction: prog.junction.clone(), road: r.clone(), state: prog.state_at(t, r) });
            }
        }
        out
    }

    fn signal_for(&self, junction: usize, road: usize, t: f64) -> Option<SignalState> {
        let jid = &self.map.junctions()[junction].id;
        self.signals
            .iter()
            .find(|(p, _)| &p.junction == jid)
            .map(|(p, _)| p.state_at(t, &self.map.roads()[road].id))
    }

    fn ego_state(&self) -> AgentState {
        let (lane, offset, lat) = match annotate(self.map, self.ego.pos, &self.plan.route) {
            Some((r, pr)) => (self.map.ref_id(r).to_string(), pr.s, pr.lateral),
            None => (String::new(), 0.0, 0.0),
        };
        AgentState {
            x: self.ego.pos.x,
            y: self.ego.pos.y,
            heading: self.ego.heading,
            speed: self.ego.speed,
            accel: self.ego.accel,
            lane,
            offset,
            lat,
        }
    }

    fn npc_state(&self, n: &Npc) -> AgentState {
        let p = n.track.path.point_at(n.s);
        let heading = n.track.path.heading_at(n.s);
        let (idx, offset) = n.track.locate(n.s);
        AgentState {
            x: p.x,
            y: p.y,
            heading,
            speed: n.speed,
            accel: n.accel,
            lane: self.map.ref_id(n.track.pieces[idx].lane).to_string(),
            offset,
            lat: 0.0,
        }
    }

    fn ped_state(&self, p: &Pedestrian) -> AgentState {
        let dir = (p.to - p.from).normalized();
        let pos = p.from + dir * p.walked;
        AgentState {
            x: pos.x,
            y: pos.y,
            heading: dir.heading(),
            speed: p.current_speed,
            accel: p.accel,
            lane: String::new(),
            offset: p.walked,
            lat: 0.0,
        }
    }

    pub fn frame(&self, i: usize) -> Frame {
        let t = frame_time(i, self.dt);
        let mut agents = Vec::with_capacity(self.infos.len());
        agents.push(self.ego_state());
        agents.extend(self.npcs.iter().map(|n| self.npc_state(n)));
        agents.extend(self.peds.iter().map(|p| self.ped_state(p)));
        Frame { t, agents, signals: self.signal_records(t) }
    }

    pub fn observation<'f>(&'f self, prev: &'f Frame) -> Observation<'f> {
        Observation {
            t: prev.t,
            dt: self.dt,
            ego: &prev.agents[0],
            ego_info: &self.infos[0],
            steer: self.ego.steer,
            others: self.infos[1..]
                .iter()
                .zip(&prev.agents[1..])
                .map(|(info, state)| OtherAgent { info, state })
                .collect(),
            signals: &prev.signals,
            map: self.map,
        }
    }

    fn bodies(&self) -> Vec<Body> {
        let mut out = vec![Body {
            pos: self.ego.pos,
            heading: self.ego.heading,
            speed: self.ego.speed,
            length: self.infos[0].length,
            width: self.infos[0].width,
        }];
        for (k, n) in self.npcs.iter().enumerate() {
            let info = &self.infos[1 + k];
            out.push(Body {
                pos: n.track.path.point_at(n.s),
                heading: n.track.path.heading_at(n.s),
                speed: n.speed,
                length: info.length,
                width: info.width,
            });
        }
        for p in &self.peds {
            let dir = (p.to - p.from).normalized();
            out.push(Body {
                pos: p.from + dir * p.walked,
                heading: dir.heading(),
                speed: p.current_speed,
                length: PEDESTRIAN_SIZE,
                width: PEDESTRIAN_SIZE,
            });
        }
        out
    }

    /// Appends a connector and its outgoing lane when the route runs short,
    /// preferring the straightest continuation.
    fn extend_npc(map: &MapGraph, n: &mut Npc) {
        if n.track.length() - n.s > NPC_EXTEND_AHEAD {
            return;
        }
        let Some(&LaneRef::Lane(last)) = n.refs.last() else { return };
        let next = map
            .connectors_from(last)
            .min_by(|&a, &b| {
                let ta = map.connectors()[a].path.total_turn().abs();
                let tb = map.connectors()[b].path.total_turn().abs();
                ta.partial_cmp(&tb).unwrap().then(a.cmp(&b))
            });
        if let Some(c) = next {
            n.refs.push(LaneRef::Connector(c));
            n.refs.push(LaneRef::Lane(map.connectors()[c].to));
            if let Some(track) = Track::new(map, &n.refs, n.start_offset) {
                n.track = track;
            }
        }
    }

    fn npc_accel(&self, k: usize, bodies: &[Body], t: f64) -> f64 {
        let n = &self.npcs[k];
        let info = &self.infos[1 + k];
        let cautious = match n.behavior {
            Behavior::Stationary => return 0.0,
            Behavior::FollowLane { cautious } => cautious,
            Behavior::FollowLaneThenBrake { cautious, decel, .. } => {
                if n.braking {
                    return if n.speed > 0.0 { -decel } else { 0.0 };
                }
                cautious
            }
        };
        let mut a = cruise_accel(n.speed, n.target);
        if !cautious {
            return a;
        }
        let others: Vec<Body> =
            bodies.iter().enumerate().filter(|(i, _)| *i != 1 + k).map(|(_, b)| *b).collect();
        let me = bodies[1 + k];
        let horizon = 40.0 + 2.0 * n.speed;
        if let Some(o) = nearest_obstacle(&n.track.path, n.s, &me, &others, horizon) {
            a = a.min(follower_accel(o.gap, n.speed, o.speed, NPC_STANDSTILL_GAP, NPC_HEADWAY));
        }
        // stop line of the next signalized junction
        let (idx, _) = n.track.locate(n.s);
        let piece = &n.track.pieces[idx];
        if let (LaneRef::Lane(l), Some(next)) = (piece.lane, n.track.pieces.get(idx + 1)) {
            if let LaneRef::Connector(c) = next.lane {
                let j = self.map.connectors()[c].junction;
                let d = piece.end - n.s - info.length / 2.0 - STOP_STANDOFF;
                match self.signal_for(j, self.map.lanes()[l].road, t) {
                    Some(SignalState::Red) => a = a.min(stop_accel(n.speed, n.target, d)),
                    Some(SignalState::Yellow) if n.speed * n.speed / (2.0 * d.max(0.1)) <= 3.0 => {
                        a = a.min(stop_accel(n.speed, n.target, d))
                    }
                    _ => {}
                }
            }
        }
        if self.npcs[k].track.length() - n.s < 30.0 {
            a = a.min(approach_accel(n.speed, n.target, n.track.length() - n.s - info.length / 2.0, 0.0));
        }
        a
    }

    /// Advances every agent by one step; `t` is the time of the new frame.
    pub fn advance(&mut self, control: &Control, t: f64) {
        let dt = self.dt;
        let bodies = self.bodies();
        let accels: Vec<f64> = (0..self.npcs.len()).map(|k| self.npc_accel(k, &bodies, self.t)).collect();

        // ego: kinematic bicycle, semi-implicit Euler
        let a = control.accel.clamp(MAX_DECEL, MAX_ACCEL);
        let steer = control.steer.clamp(-MAX_STEER, MAX_STEER);
        let e = &mut self.ego;
        let v = (e.speed + a * dt).max(0.0);
        e.accel = (v - e.speed) / dt;
        e.speed = v;
        e.steer = steer;
        e.pos = e.pos + Vec2::from_heading(e.heading) * (v * dt);
        e.heading = wrap_angle(e.heading + v / WHEELBASE * steer.tan() * dt);

        for (k, a) in accels.into_iter().enumerate() {
            let map = self.map;
            let n = &mut self.npcs[k];
            let a = a.clamp(MAX_DECEL, MAX_ACCEL);
            let v = (n.speed + a * dt).max(0.0);
            let mut ds = v * dt;
            Self::extend_npc(map, n);
            let room = n.track.length() - n.s;
            let mut v = v;
            if ds >= room {
                ds = room.max(0.0);
                v = 0.0;
            }
            n.accel = (v - n.speed) / dt;
            n.speed = v;
            n.s += ds;
            n.travelled += ds;
            if let Behavior::FollowLaneThenBrake { trigger_distance, .. } = n.behavior {
                if n.travelled >= trigger_distance {
                    n.braking = true;
                }
            }
        }

        for p in &mut self.peds {
            let total = p.from.distance(p.to);
            let v = if t > p.trigger && p.walked < total { p.speed } else { 0.0 };
            let step = (v * dt).min(total - p.walked);
            p.walked += step;
            let actual = step / dt;
            p.accel = (actual - p.current_speed) / dt;
            p.current_speed = actual;
        }
        self.t = t;
        self.update_progress();
    }

    fn update_progress(&mut self) {
        let path = &self.progress_track.path;
        let pr = path.project_within(self.ego.pos, self.progress_s - 5.0, self.progress_s + 30.0);
        if pr.distance <= ROUTE_TRACKING_RADIUS && pr.s > self.progress_s {
            self.progress_s = pr.s;
        }
        self.progress = (self.progress_s / self.dest_station).clamp(0.0, 1.0);
        if self.arrival.is_none() {
            let (dest, off) = self.plan.destination;
            if let Some((r, pr)) = annotate(self.map, self.ego.pos, &self.plan.route) {
                if r == dest && pr.s >= off - 0.5 {
                    self.arrival = Some(self.t);
                    self.progress = 1.0;
                }
            }
        }
    }

    pub fn ego_collides(&self, frame: &Frame) -> bool {
        let ego = frame.agents[0].obb(&self.infos[0]);
        self.infos[1..].iter().zip(&frame.agents[1..]).any(|(info, s)| ego.overlaps(&s.obb(info)))
    }
}
