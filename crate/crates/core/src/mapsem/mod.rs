//! Lane-graph maps with semantic queries.
//!
//! # Map file
//!
//! ```json
//! {
//!   "roads": [{
//!     "id": "road_115",
//!     "centerline": [[0.0, 0.0], [80.0, 0.0]],
//!     "speed_limit": 13.9,
//!     "lanes": [
//!       {"dir": "backward", "width": 3.5, "left_boundary": "solid_white", "right_boundary": "double_yellow"},
//!       {"dir": "forward",  "width": 3.5, "left_boundary": "double_yellow", "right_boundary": "solid_white"}
//!     ],
//!     "links": {"start": {"junction": "J_5"}, "end": null}
//!   }],
//!   "junctions": [{
//!     "id": "J_5",
//!     "incident": [{"road": "road_115", "end": "start"}],
//!     "connections": [["road_115:0", "road_117:1"]],
//!     "signalized": false
//!   }],
//!   "crosswalks": [{"junction": "J_5", "road": "road_115"}]
//! }
//! ```
//!
//! Coordinates are meters in a planar frame, x east, y north. Lanes are listed
//! left to right when looking along the centerline; all `backward` lanes
//! (travelling against the centerline) come before all `forward` lanes and the
//! centerline runs along the boundary between the two groups. A lane is
//! referenced as `<road id>:<index into lanes>`. `speed_limit` (m/s) defaults
//! to 13.9. A crosswalk spans its road 2 m from the junction end.

mod build;
mod classify;
mod query;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{bezier_connector, convex_hull, point_in_convex, uturn_keyhole, Polyline, Projection, Vec2};

pub use build::{ArmSpec, MapBuilder};
pub use classify::{classify_gaps, JunctionClass, JunctionKind, DEFAULT_TOLERANCE_DEG};
pub use query::{Direction, Structure, SubMap, SubMapId, SubMapQuery};

pub const DEFAULT_SPEED_LIMIT: f64 = 13.9;
/// Distance from the junction end of a road to its crosswalk centre line.
pub const CROSSWALK_SETBACK: f64 = 2.0;
/// Loop radius of turnaround connectors.
pub const UTURN_RADIUS: f64 = 5.5;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("map syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("dangling reference: {what} `{id}` referenced by {from}")]
    DanglingReference { what: &'static str, id: String, from: String },
    #[error("degenerate geometry on road `{0}`: centerline needs two distinct points")]
    DegenerateGeometry(String),
    #[error("invalid map: {0}")]
    Invalid(String),
    #[error("unknown junction `{0}`")]
    UnknownJunction(String),
    #[error("unknown road `{0}`")]
    UnknownRoad(String),
    #[error("road `{road}` is not incident to junction `{junction}`")]
    NotIncident { junction: String, road: String },
    #[error("junction `{junction}` has {count} incident roads, need at least {needed}")]
    TooFewRoads { junction: String, count: usize, needed: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneDir {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    SolidWhite,
    DashedWhite,
    SolidYellow,
    DashedYellow,
    DoubleYellow,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadEnd {
    Start,
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneSpec {
    pub dir: LaneDir,
    pub width: f64,
    pub left_boundary: Boundary,
    pub right_boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Junction(String),
    Road(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Links {
    pub start: Option<Link>,
    pub end: Option<Link>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadSpec {
    pub id: String,
    pub centerline: Vec<[f64; 2]>,
    #[serde(default = "default_speed_limit")]
    pub speed_limit: f64,
    pub lanes: Vec<LaneSpec>,
    #[serde(default)]
    pub links: Links,
}

fn default_speed_limit() -> f64 {
    DEFAULT_SPEED_LIMIT
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidentSpec {
    pub road: String,
    pub end: RoadEnd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JunctionSpec {
    pub id: String,
    pub incident: Vec<IncidentSpec>,
    #[serde(default)]
    pub connections: Vec<[String; 2]>,
    #[serde(default)]
    pub signalized: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrosswalkSpec {
    pub junction: String,
    pub road: String,
}

/// On-disk representation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    #[serde(default)]
    pub name: String,
    pub roads: Vec<RoadSpec>,
    #[serde(default)]
    pub junctions: Vec<JunctionSpec>,
    #[serde(default)]
    pub crosswalks: Vec<CrosswalkSpec>,
}

impl MapFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("map file serializes") + "\n"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Road {
    pub id: String,
    pub centerline: Polyline,
    pub speed_limit: f64,
    pub lanes: Vec<usize>,
    pub links: Links,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub id: String,
    pub road: usize,
    /// Position in the road's lane list (left to right along the centerline).
    pub index: usize,
    pub dir: LaneDir,
    pub width: f64,
    pub left_boundary: Boundary,
    pub right_boundary: Boundary,
    /// Lateral offset of the lane centre from the road centerline, left positive.
    pub center_offset: f64,
    /// Lane centre line in the direction of travel.
    pub path: Polyline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Incident {
    pub road: usize,
    pub end: RoadEnd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Junction {
    pub id: String,
    pub incident: Vec<Incident>,
    pub connectors: Vec<usize>,
    pub signalized: bool,
    /// Convex hull of the incident roads' end cross-sections.
    pub area: Vec<Vec2>,
}

/// A drivable path through a junction from an incoming to an outgoing lane.
#[derive(Debug, Clone, PartialEq)]
pub struct Connector {
    pub id: String,
    pub junction: usize,
    pub from: usize,
    pub to: usize,
    pub width: f64,
    pub path: Polyline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crosswalk {
    pub junction: usize,
    pub road: usize,
    /// Endpoints on the road's left and right edges.
    pub left: Vec2,
    pub right: Vec2,
}

/// Either a lane or a junction connector; both carry a travel-direction path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LaneRef {
    Lane(usize),
    Connector(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapGraph {
    pub name: String,
    roads: Vec<Road>,
    lanes: Vec<Lane>,
    junctions: Vec<Junction>,
    connectors: Vec<Connector>,
    crosswalks: Vec<Crosswalk>,
    road_index: BTreeMap<String, usize>,
    junction_index: BTreeMap<String, usize>,
    lane_index: BTreeMap<String, LaneRef>,
    source: MapFile,
}

fn json_error(err: serde_json::Error) -> MapError {
    MapError::Syntax {
        line: err.line(),
        column: err.column(),
        message: err.to_string(),
    }
}

/// Parses and validates map file contents.
pub fn parse_map(text: &str) -> Result<MapGraph, MapError> {
    let file: MapFile = serde_json::from_str(text).map_err(json_error)?;
    MapGraph::from_file(file)
}

pub fn lane_id(road: &str, index: usize) -> String {
    format!("{road}:{index}")
}

pub fn connector_id(junction: &str, from: &str, to: &str) -> String {
    format!("{junction}/{from}>{to}")
}

impl MapGraph {
    pub fn from_file(file: MapFile) -> Result<Self, MapError> {
        let mut road_index = BTreeMap::new();
        for (i, r) in file.roads.iter().enumerate() {
            if road_index.insert(r.id.clone(), i).is_some() {
                return Err(MapError::Invalid(format!("duplicate road id `{}`", r.id)));
            }
        }
        let mut junction_index = BTreeMap::new();
        for (i, j) in file.junctions.iter().enumerate() {
            if junction_index.insert(j.id.clone(), i).is_some() {
                return Err(MapError::Invalid(format!("duplicate junction id `{}`", j.id)));
            }
        }

        let mut roads = Vec::with_capacity(file.roads.len());
        let mut lanes = Vec::new();
        let mut lane_index = BTreeMap::new();
        for (ri, spec) in file.roads.iter().enumerate() {
            let centerline = Polyline::new(spec.centerline.iter().map(|p| Vec2::new(p[0], p[1])).collect())
                .ok_or_else(|| MapError::DegenerateGeometry(spec.id.clone()))?;
            if spec.lanes.is_empty() {
                return Err(MapError::Invalid(format!("road `{}` has no lanes", spec.id)));
            }
            if !(spec.speed_limit.is_finite() && spec.speed_limit > 0.0) {
                return Err(MapError::Invalid(format!("road `{}` speed limit must be positive", spec.id)));
            }
            let first_forward = spec.lanes.iter().position(|l| l.dir == LaneDir::Forward).unwrap_or(spec.lanes.len());
            if spec.lanes[first_forward..].iter().any(|l| l.dir == LaneDir::Backward) {
                return Err(MapError::Invalid(format!(
                    "road `{}`: backward lanes must be listed before forward lanes",
                    spec.id
                )));
            }
            for (link, end) in [(&spec.links.start, "start"), (&spec.links.end, "end")] {
                match link {
                    Some(Link::Junction(j)) if !junction_index.contains_key(j) => {
                        return Err(MapError::DanglingReference {
                            what: "junction",
                            id: j.clone(),
                            from: format!("road `{}` {end} link", spec.id),
                        })
                    }
                    Some(Link::Road(r)) if !road_index.contains_key(r) => {
                        return Err(MapError::DanglingReference {
                            what: "road",
                            id: r.clone(),
                            from: format!("road `{}` {end} link", spec.id),
                        })
                    }
                    _ => {}
                }
            }
            let mut lane_ids = Vec::with_capacity(spec.lanes.len());
            for (li, l) in spec.lanes.iter().enumerate() {
                if !(l.width.is_finite() && l.width > 0.0) {
                    return Err(MapError::Invalid(format!("lane {li} of road `{}` has non-positive width", spec.id)));
                }
                let center_offset = if li < first_forward {
                    let outer: f64 = spec.lanes[li + 1..first_forward].iter().map(|x| x.width).sum();
                    outer + l.width / 2.0
                } else {
                    let inner: f64 = spec.lanes[first_forward..li].iter().map(|x| x.width).sum();
                    -(inner + l.width / 2.0)
                };
                let along = centerline.offset(center_offset);
                let path = match l.dir {
                    LaneDir::Forward => along,
                    LaneDir::Backward => along.reversed(),
                };
                let id = lane_id(&spec.id, li);
                lane_index.insert(id.clone(), LaneRef::Lane(lanes.len()));
                lane_ids.push(lanes.len());
                lanes.push(Lane {
                    id,
                    road: ri,
                    index: li,
                    dir: l.dir,
                    width: l.width,
                    left_boundary: l.left_boundary,
                    right_boundary: l.right_boundary,
                    center_offset,
                    path,
                });
            }
            roads.push(Road {
                id: spec.id.clone(),
                centerline,
                speed_limit: spec.speed_limit,
                lanes: lane_ids,
                links: spec.links.clone(),
            });
        }

        let mut junctions = Vec::with_capacity(file.junctions.len());
        let mut connectors = Vec::new();
        for (ji, spec) in file.junctions.iter().enumerate() {
            let mut incident = Vec::with_capacity(spec.incident.len());
            for inc in &spec.incident {
                let &road = road_index.get(&inc.road).ok_or_else(|| MapError::DanglingReference {
                    what: "road",
                    id: inc.road.clone(),
                    from: format!("junction `{}`", spec.id),
                })?;
                if incident.iter().any(|i: &Incident| i.road == road) {
                    return Err(MapError::Invalid(format!(
                        "junction `{}` lists road `{}` twice",
                        spec.id, inc.road
                    )));
                }
                let link = match inc.end {
                    RoadEnd::Start => &file.roads[road].links.start,
                    RoadEnd::End => &file.roads[road].links.end,
                };
                if let Some(Link::Junction(other)) = link {
                    if other != &spec.id {
                        return Err(MapError::Invalid(format!(
                            "road `{}` links to `{other}` at the end incident to `{}`",
                            inc.road, spec.id
                        )));
                    }
                }
                incident.push(Incident { road, end: inc.end });
            }
            let mut connector_ids = Vec::new();
            for [from, to] in &spec.connections {
                let from_lane = resolve_lane(&road_index, &roads, from, &spec.id)?;
                let to_lane = resolve_lane(&road_index, &roads, to, &spec.id)?;
                let enters = |lane: &Lane| {
                    incident.iter().find(|i| i.road == lane.road).map(|i| lane_enters(lane.dir, i.end))
                };
                match enters(&lanes[from_lane]) {
                    Some(true) => {}
                    Some(false) => {
                        return Err(MapError::Invalid(format!(
                            "connection {from} -> {to} in `{}`: `{from}` leaves the junction",
                            spec.id
                        )))
                    }
                    None => {
                        return Err(MapError::NotIncident {
                            junction: spec.id.clone(),
                            road: roads[lanes[from_lane].road].id.clone(),
                        })
                    }
                }
                match enters(&lanes[to_lane]) {
                    Some(false) => {}
                    Some(true) => {
                        return Err(MapError::Invalid(format!(
                            "connection {from} -> {to} in `{}`: `{to}` enters the junction",
                            spec.id
                        )))
                    }
                    None => {
                        return Err(MapError::NotIncident {
                            junction: spec.id.clone(),
                            road: roads[lanes[to_lane].road].id.clone(),
                        })
                    }
                }
                let a = &lanes[from_lane].path;
                let b = &lanes[to_lane].path;
                let pts = if lanes[from_lane].road == lanes[to_lane].road {
                    let left = Vec2::from_heading(a.end_heading()).perp();
                    let w = (b.start() - a.end()).dot(left);
                    if w <= 0.0 || w >= 2.0 * UTURN_RADIUS {
                        return Err(MapError::Invalid(format!(
                            "connection {from} -> {to}: turnaround needs the target lane to the left within {}",
                            2.0 * UTURN_RADIUS
                        )));
                    }
                    let mut pts = uturn_keyhole(a.end(), a.end_heading(), w, UTURN_RADIUS);
                    pts.push(b.start());
                    pts
                } else {
                    bezier_connector(a.end(), a.end_heading(), b.start(), b.start_heading())
                };
                let path = Polyline::new(pts)
                    .ok_or_else(|| MapError::Invalid(format!("connection {from} -> {to} has zero length")))?;
                let id = connector_id(&spec.id, from, to);
                lane_index.insert(id.clone(), LaneRef::Connector(connectors.len()));
                connector_ids.push(connectors.len());
                connectors.push(Connector {
                    id,
                    junction: ji,
                    from: from_lane,
                    to: to_lane,
                    width: lanes[from_lane].width,
                    path,
                });
            }
            let mut rim = Vec::new();
            for inc in &incident {
                let road = &roads[inc.road];
                let s = match inc.end {
                    RoadEnd::Start => 0.0,
                    RoadEnd::End => road.centerline.length(),
                };
                let (left, right) = road_edges(road, &lanes);
                rim.push(road.centerline.offset(left).point_at(s));
                rim.push(road.centerline.offset(right).point_at(s));
            }
            junctions.push(Junction {
                id: spec.id.clone(),
                incident,
                connectors: connector_ids,
                signalized: spec.signalized,
                area: convex_hull(&rim),
            });
        }

        let mut crosswalks = Vec::with_capacity(file.crosswalks.len());
        for cw in &file.crosswalks {
            let &junction = junction_index.get(&cw.junction).ok_or_else(|| MapError::DanglingReference {
                what: "junction",
                id: cw.junction.clone(),
                from: "crosswalk".into(),
            })?;
            let &road = road_index.get(&cw.road).ok_or_else(|| MapError::DanglingReference {
                what: "road",
                id: cw.road.clone(),
                from: "crosswalk".into(),
            })?;
            let inc = junctions[junction]
                .incident
                .iter()
                .find(|i| i.road == road)
                .ok_or_else(|| MapError::NotIncident {
                    junction: cw.junction.clone(),
                    road: cw.road.clone(),
                })?;
            let r = &roads[road];
            let s = match inc.end {
                RoadEnd::Start => CROSSWALK_SETBACK,
                RoadEnd::End => r.centerline.length() - CROSSWALK_SETBACK,
            };
            let (left, right) = road_edges(r, &lanes);
            crosswalks.push(Crosswalk {
                junction,
                road,
                left: r.centerline.offset(left).point_at(s),
                right: r.centerline.offset(right).point_at(s),
            });
        }

        Ok(MapGraph {
            name: file.name.clone(),
            roads,
            lanes,
            junctions,
            connectors,
            crosswalks,
            road_index,
            junction_index,
            lane_index,
            source: file,
        })
    }

    pub fn file(&self) -> &MapFile {
        &self.source
    }

    pub fn roads(&self) -> &[Road] {
        &self.roads
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn junctions(&self) -> &[Junction] {
        &self.junctions
    }

    pub fn connectors(&self) -> &[Connector] {
        &self.connectors
    }

    pub fn crosswalks(&self) -> &[Crosswalk] {
        &self.crosswalks
    }

    pub fn road(&self, id: &str) -> Option<usize> {
        self.road_index.get(id).copied()
    }

    pub fn junction(&self, id: &str) -> Option<usize> {
        self.junction_index.get(id).copied()
    }

    pub fn lane_ref(&self, id: &str) -> Option<LaneRef> {
        self.lane_index.get(id).copied()
    }

    pub fn lane_by_id(&self, id: &str) -> Option<usize> {
        match self.lane_ref(id)? {
            LaneRef::Lane(l) => Some(l),
            LaneRef::Connector(_) => None,
        }
    }

    pub fn path(&self, r: LaneRef) -> &Polyline {
        match r {
            LaneRef::Lane(l) => &self.lanes[l].path,
            LaneRef::Connector(c) => &self.connectors[c].path,
        }
    }

    pub fn width(&self, r: LaneRef) -> f64 {
        match r {
            LaneRef::Lane(l) => self.lanes[l].width,
            LaneRef::Connector(c) => self.connectors[c].width,
        }
    }

    pub fn ref_id(&self, r: LaneRef) -> &str {
        match r {
            LaneRef::Lane(l) => &self.lanes[l].id,
            LaneRef::Connector(c) => &self.connectors[c].id,
        }
    }

    pub fn speed_limit(&self, r: LaneRef) -> f64 {
        match r {
            LaneRef::Lane(l) => self.roads[self.lanes[l].road].speed_limit,
            LaneRef::Connector(c) => self.roads[self.lanes[self.connectors[c].to].road].speed_limit,
        }
    }

    /// Which end of the lane's road touches the junction, if any.
    pub fn incident_end(&self, junction: usize, road: usize) -> Option<RoadEnd> {
        self.junctions[junction].incident.iter().find(|i| i.road == road).map(|i| i.end)
    }

    /// Junction the lane drives into at the end of its path.
    pub fn lane_exit_junction(&self, lane: usize) -> Option<usize> {
        let l = &self.lanes[lane];
        let link = match l.dir {
            LaneDir::Forward => &self.roads[l.road].links.end,
            LaneDir::Backward => &self.roads[l.road].links.start,
        };
        match link {
            Some(Link::Junction(j)) => self.junction(j),
            _ => None,
        }
    }

    pub fn connectors_from(&self, lane: usize) -> impl Iterator<Item = usize> + '_ {
        self.connectors.iter().enumerate().filter(move |(_, c)| c.from == lane).map(|(i, _)| i)
    }

    pub fn connector_between(&self, from: usize, to: usize) -> Option<usize> {
        self.connectors.iter().position(|c| c.from == from && c.to == to)
    }

    /// Neighbouring lane on the driver's left (`left = true`) or right, in the
    /// lane's own travel frame, regardless of its direction.
    pub fn adjacent_lane(&self, lane: usize, left: bool) -> Option<usize> {
        let l = &self.lanes[lane];
        let road = &self.roads[l.road];
        let toward_left_in_road = match l.dir {
            LaneDir::Forward => left,
            LaneDir::Backward => !left,
        };
        let idx = if toward_left_in_road { l.index.checked_sub(1)? } else { l.index + 1 };
        road.lanes.get(idx).copied()
    }

    /// Projects a point onto a road's reference frame: arc length along the
    /// centerline and lateral offset (left positive).
    pub fn road_frame(&self, road: usize, p: Vec2) -> Projection {
        self.roads[road].centerline.project(p)
    }

    /// Lateral interval `[right, left]` of a lane in its road's frame.
    pub fn lane_bounds(&self, lane: usize) -> (f64, f64) {
        let l = &self.lanes[lane];
        (l.center_offset - l.width / 2.0, l.center_offset + l.width / 2.0)
    }

    pub fn in_junction_area(&self, junction: usize, p: Vec2) -> bool {
        point_in_convex(&self.junctions[junction].area, p)
    }

    /// Lanes (not connectors) whose footprint contains `p`.
    pub fn lanes_at(&self, p: Vec2) -> Vec<(usize, Projection)> {
        let mut out = Vec::new();
        for (i, lane) in self.lanes.iter().enumerate() {
            let pr = lane.path.project(p);
            if pr.s > 1e-6 && pr.s < lane.path.length() - 1e-6 && pr.lateral.abs() <= lane.width / 2.0 {
                out.push((i, pr));
            }
        }
        out
    }
}

fn lane_enters(dir: LaneDir, end: RoadEnd) -> bool {
    matches!((dir, end), (LaneDir::Forward, RoadEnd::End) | (LaneDir::Backward, RoadEnd::Start))
}

/// Left and right edge offsets of a road, relative to its centerline.
fn road_edges(road: &Road, lanes: &[Lane]) -> (f64, f64) {
    let mut left = f64::NEG_INFINITY;
    let mut right = f64::INFINITY;
    for &l in &road.lanes {
        let lane = &lanes[l];
        left = left.max(lane.center_offset + lane.width / 2.0);
        right = right.min(lane.center_offset - lane.width / 2.0);
    }
    (left, right)
}

fn resolve_lane(
    road_index: &BTreeMap<String, usize>,
    roads: &[Road],
    id: &str,
    junction: &str,
) -> Result<usize, MapError> {
    let dangling = || MapError::DanglingReference {
        what: "lane",
        id: id.to_string(),
        from: format!("junction `{junction}` connection"),
    };
    let (road, idx) = id.rsplit_once(':').ok_or_else(dangling)?;
    let &r = road_index.get(road).ok_or_else(|| MapError::DanglingReference {
        what: "road",
        id: road.to_string(),
        from: format!("junction `{junction}` connection `{id}`"),
    })?;
    let idx: usize = idx.parse().map_err(|_| dangling())?;
    roads[r].lanes.get(idx).copied().ok_or_else(dangling)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    #[test]
    fn t_fixture_parses() {
        let map = parse_map(&fixtures::t_junction().to_json()).unwrap();
        assert_eq!(map.junctions().len(), 1);
        assert_eq!(map.roads().len(), 3);
    }

    #[test]
    fn grid_fixture_parses() {
        let map = parse_map(&fixtures::grid().to_json()).unwrap();
        assert_eq!(map.junctions().len(), 4);
        assert!(map.junctions().iter().all(|j| j.incident.len() == 4));
    }

    #[test]
    fn missing_road_in_connection_is_dangling() {
        let mut file = fixtures::t_junction();
        file.junctions[0].connections[0][1] = "road_404:0".into();
        let err = MapGraph::from_file(file).unwrap_err();
        assert!(matches!(err, MapError::DanglingReference { what: "road", ref id, .. } if id == "road_404"), "{err}");
    }

    #[test]
    fn missing_link_target_is_dangling() {
        let mut file = fixtures::two_lane_straight();
        file.roads[0].links.end = Some(Link::Road("nowhere".into()));
        assert!(matches!(MapGraph::from_file(file), Err(MapError::DanglingReference { .. })));
    }

    #[test]
    fn zero_length_centerline_is_degenerate() {
        let mut file = fixtures::two_lane_straight();
        file.roads[0].centerline = vec![[1.0, 1.0], [1.0, 1.0]];
        assert_eq!(
            MapGraph::from_file(file).unwrap_err(),
            MapError::DegenerateGeometry(fixtures::STRAIGHT_ROAD.into())
        );
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_map("{\n \"roads\": [}\n").unwrap_err();
        assert!(matches!(err, MapError::Syntax { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn lane_offsets_follow_layout() {
        // backward, forward, forward
        let file = MapFile {
            name: String::new(),
            roads: vec![RoadSpec {
                id: "r".into(),
                centerline: vec![[0.0, 0.0], [50.0, 0.0]],
                speed_limit: 10.0,
                lanes: vec![
                    LaneSpec { dir: LaneDir::Backward, width: 3.0, left_boundary: Boundary::SolidWhite, right_boundary: Boundary::DoubleYellow },
                    LaneSpec { dir: LaneDir::Forward, width: 3.5, left_boundary: Boundary::DoubleYellow, right_boundary: Boundary::DashedWhite },
                    LaneSpec { dir: LaneDir::Forward, width: 4.0, left_boundary: Boundary::DashedWhite, right_boundary: Boundary::SolidWhite },
                ],
                links: Links::default(),
            }],
            junctions: vec![],
            crosswalks: vec![],
        };
        let map = MapGraph::from_file(file).unwrap();
        let offs: Vec<f64> = map.lanes().iter().map(|l| l.center_offset).collect();
        assert_eq!(offs, vec![1.5, -1.75, -5.5]);
        // backward lane travels towards -x
        assert_abs_diff_eq!(map.lanes()[0].path.start().x, 50.0);
        // driver's left of the backward lane is forward lane 1
        assert_eq!(map.adjacent_lane(0, true), Some(1));
        assert_eq!(map.adjacent_lane(0, false), None);
        assert_eq!(map.adjacent_lane(1, false), Some(2));
        assert_eq!(map.adjacent_lane(1, true), Some(0));
    }

    #[test]
    fn backward_after_forward_is_rejected() {
        let mut file = fixtures::two_lane_straight();
        file.roads[0].lanes[1].dir = LaneDir::Backward;
        assert!(matches!(MapGraph::from_file(file), Err(MapError::Invalid(_))));
    }
}
