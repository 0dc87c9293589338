//! Programmatic construction of map files with straight roads and
//! automatically derived junction connections.

use std::collections::BTreeMap;

use super::query::Direction;
use super::{
    Boundary, CrosswalkSpec, IncidentSpec, JunctionSpec, LaneDir, LaneSpec, Link, Links, MapFile, MapGraph, RoadEnd,
    RoadSpec, DEFAULT_SPEED_LIMIT,
};
use crate::geometry::Vec2;

/// A dead-end road leaving a junction along a fixed heading.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSpec {
    pub road: String,
    pub heading_deg: f64,
    pub length: f64,
    /// Lanes travelling away from the junction.
    pub lanes_out: usize,
    /// Lanes travelling towards the junction.
    pub lanes_in: usize,
}

impl ArmSpec {
    pub fn new(road: &str, heading_deg: f64, length: f64) -> Self {
        ArmSpec { road: road.into(), heading_deg, length, lanes_out: 1, lanes_in: 1 }
    }

    pub fn lanes(mut self, out: usize, inbound: usize) -> Self {
        self.lanes_out = out;
        self.lanes_in = inbound;
        self
    }
}

#[derive(Debug, Clone)]
pub struct MapBuilder {
    file: MapFile,
    centers: BTreeMap<String, Vec2>,
    lane_width: f64,
    radius: f64,
    uturns: bool,
}

fn lane_layout(fwd: usize, bwd: usize, width: f64) -> Vec<LaneSpec> {
    let mut lanes = Vec::with_capacity(fwd + bwd);
    let total = fwd + bwd;
    for i in 0..total {
        let dir = if i < bwd { LaneDir::Backward } else { LaneDir::Forward };
        let left_boundary = if i == 0 {
            Boundary::SolidWhite
        } else if i == bwd {
            Boundary::DoubleYellow
        } else {
            Boundary::DashedWhite
        };
        let right_boundary = if i + 1 == total {
            Boundary::SolidWhite
        } else if i + 1 == bwd {
            Boundary::DoubleYellow
        } else {
            Boundary::DashedWhite
        };
        lanes.push(LaneSpec { dir, width, left_boundary, right_boundary });
    }
    lanes
}

impl MapBuilder {
    pub fn new(name: &str) -> Self {
        MapBuilder {
            file: MapFile { name: name.into(), ..Default::default() },
            centers: BTreeMap::new(),
            lane_width: 3.5,
            radius: 12.0,
            uturns: true,
        }
    }

    pub fn lane_width(mut self, w: f64) -> Self {
        self.lane_width = w;
        self
    }

    /// Distance from a junction centre to where its roads begin.
    pub fn junction_radius(mut self, r: f64) -> Self {
        self.radius = r;
        self
    }

    pub fn allow_uturns(mut self, yes: bool) -> Self {
        self.uturns = yes;
        self
    }

    pub fn junction(&mut self, id: &str, center: Vec2, signalized: bool) -> &mut Self {
        self.centers.insert(id.into(), center);
        self.file.junctions.push(JunctionSpec {
            id: id.into(),
            incident: Vec::new(),
            connections: Vec::new(),
            signalized,
        });
        self
    }

    fn junction_mut(&mut self, id: &str) -> &mut JunctionSpec {
        self.file.junctions.iter_mut().find(|j| j.id == id).expect("junction declared before use")
    }

    /// Free-standing road along `points`.
    pub fn road(&mut self, id: &str, points: &[Vec2], fwd: usize, bwd: usize) -> &mut Self {
        self.file.roads.push(RoadSpec {
            id: id.into(),
            centerline: points.iter().map(|p| [p.x, p.y]).collect(),
            speed_limit: DEFAULT_SPEED_LIMIT,
            lanes: lane_layout(fwd, bwd, self.lane_width),
            links: Links::default(),
        });
        self
    }

    pub fn arm(&mut self, junction: &str, arm: ArmSpec) -> &mut Self {
        let c = self.centers[junction];
        let d = Vec2::from_heading(arm.heading_deg.to_radians());
        let a = c + d * self.radius;
        let b = c + d * (self.radius + arm.length);
        self.road(&arm.road, &[a, b], arm.lanes_out, arm.lanes_in);
        self.file.roads.last_mut().unwrap().links.start = Some(Link::Junction(junction.into()));
        self.junction_mut(junction).incident.push(IncidentSpec { road: arm.road, end: RoadEnd::Start });
        self
    }

    /// Straight road from junction `from` to junction `to`; forward lanes
    /// travel from `from` to `to`.
    pub fn link(&mut self, id: &str, from: &str, to: &str, fwd: usize, bwd: usize) -> &mut Self {
        let a = self.centers[from];
        let b = self.centers[to];
        let d = (b - a).normalized();
        self.road(id, &[a + d * self.radius, b - d * self.radius], fwd, bwd);
        let links = &mut self.file.roads.last_mut().unwrap().links;
        links.start = Some(Link::Junction(from.into()));
        links.end = Some(Link::Junction(to.into()));
        self.junction_mut(from).incident.push(IncidentSpec { road: id.into(), end: RoadEnd::Start });
        self.junction_mut(to).incident.push(IncidentSpec { road: id.into(), end: RoadEnd::End });
        self
    }

    pub fn speed_limit(&mut self, road: &str, v: f64) -> &mut Self {
        self.file.roads.iter_mut().find(|r| r.id == road).expect("road declared").speed_limit = v;
        self
    }

    pub fn crosswalk(&mut self, junction: &str, road: &str) -> &mut Self {
        self.file.crosswalks.push(CrosswalkSpec { junction: junction.into(), road: road.into() });
        self
    }

    /// Finishes the map, deriving lane connections for every junction:
    /// right turns join the rightmost lanes, left turns and turnarounds the
    /// leftmost lanes, and straight movements pair lanes counted from the right.
    pub fn build(&self) -> MapFile {
        let mut file = self.file.clone();
        for j in &mut file.junctions {
            j.connections.clear();
        }
        let graph = MapGraph::from_file(file.clone()).expect("builder produces a consistent map");
        for (ji, junc) in graph.junctions().iter().enumerate() {
            let mut conns = Vec::new();
            for inc in &junc.incident {
                let approach = &graph.roads()[inc.road].id;
                let labels = graph.relative_direction(&junc.id, approach).expect("incident road");
                let ins = graph.lanes_entering(ji, inc.road);
                for out in &junc.incident {
                    let dir = labels[&graph.roads()[out.road].id];
                    if dir == Direction::UTurn && !self.uturns {
                        continue;
                    }
                    let outs = graph.lanes_leaving(ji, out.road);
                    if ins.is_empty() || outs.is_empty() {
                        continue;
                    }
                    let pairs: Vec<(usize, usize)> = match dir {
                        Direction::Right => vec![(ins[0], outs[0])],
                        Direction::Left | Direction::UTurn => vec![(*ins.last().unwrap(), *outs.last().unwrap())],
                        Direction::Straight => ins.iter().zip(&outs).map(|(&a, &b)| (a, b)).collect(),
                    };
                    for (a, b) in pairs {
                        conns.push([graph.lanes()[a].id.clone(), graph.lanes()[b].id.clone()]);
                    }
                }
            }
            file.junctions[ji].connections = conns;
        }
        file
    }
}

impl MapGraph {
    /// Lateral position of a lane centre in its own travel frame, left positive.
    pub fn travel_offset(&self, lane: usize) -> f64 {
        let l = &self.lanes[lane];
        match l.dir {
            LaneDir::Forward => l.center_offset,
            LaneDir::Backward => -l.center_offset,
        }
    }

    fn lanes_sorted_right_to_left(&self, road: usize, keep: impl Fn(LaneDir) -> bool) -> Vec<usize> {
        let mut v: Vec<usize> = self.roads[road].lanes.iter().copied().filter(|&l| keep(self.lanes[l].dir)).collect();
        v.sort_by(|&a, &b| self.travel_offset(a).partial_cmp(&self.travel_offset(b)).unwrap());
        v
    }

    /// Lanes of `road` driving into `junction`, rightmost first.
    pub fn lanes_entering(&self, junction: usize, road: usize) -> Vec<usize> {
        match self.incident_end(junction, road) {
            Some(RoadEnd::End) => self.lanes_sorted_right_to_left(road, |d| d == LaneDir::Forward),
            Some(RoadEnd::Start) => self.lanes_sorted_right_to_left(road, |d| d == LaneDir::Backward),
            None => Vec::new(),
        }
    }

    /// Lanes of `road` driving away from `junction`, rightmost first.
    pub fn lanes_leaving(&self, junction: usize, road: usize) -> Vec<usize> {
        match self.incident_end(junction, road) {
            Some(RoadEnd::Start) => self.lanes_sorted_right_to_left(road, |d| d == LaneDir::Forward),
            Some(RoadEnd::End) => self.lanes_sorted_right_to_left(road, |d| d == LaneDir::Backward),
            None => Vec::new(),
        }
    }
}
