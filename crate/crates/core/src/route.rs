//! Routes: ordered lanes and junction connectors, and the drivable track
//! they describe.

use thiserror::Error;

use crate::geometry::{Polyline, Vec2};
use crate::mapsem::{LaneRef, MapGraph};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RouteError {
    #[error("route is empty")]
    Empty,
    #[error("unknown lane or connector `{0}`")]
    Unknown(String),
    #[error("`{0}` cannot be followed by `{1}`")]
    Disconnected(String, String),
}

pub fn resolve(map: &MapGraph, ids: &[String]) -> Result<Vec<LaneRef>, RouteError> {
    if ids.is_empty() {
        return Err(RouteError::Empty);
    }
    let refs: Vec<LaneRef> = ids
        .iter()
        .map(|id| map.lane_ref(id).ok_or_else(|| RouteError::Unknown(id.clone())))
        .collect::<Result<_, _>>()?;
    for w in refs.windows(2) {
        if !follows(map, w[0], w[1]) {
            return Err(RouteError::Disconnected(map.ref_id(w[0]).into(), map.ref_id(w[1]).into()));
        }
    }
    Ok(refs)
}

/// Whether `b` may directly follow `a` in a route.
pub fn follows(map: &MapGraph, a: LaneRef, b: LaneRef) -> bool {
    match (a, b) {
        (LaneRef::Lane(x), LaneRef::Lane(y)) => {
            map.adjacent_lane(x, true) == Some(y) && map.lanes()[x].dir == map.lanes()[y].dir
                || map.adjacent_lane(x, false) == Some(y) && map.lanes()[x].dir == map.lanes()[y].dir
        }
        (LaneRef::Lane(x), LaneRef::Connector(c)) => map.connectors()[c].from == x,
        (LaneRef::Connector(c), LaneRef::Lane(y)) => map.connectors()[c].to == y,
        (LaneRef::Connector(_), LaneRef::Connector(_)) => false,
    }
}

/// Collapses lane changes: of consecutive lanes on one road only the last
/// is kept.
pub fn longitudinal(map: &MapGraph, refs: &[LaneRef]) -> Vec<LaneRef> {
    let mut out: Vec<LaneRef> = Vec::with_capacity(refs.len());
    for &r in refs {
        if let (Some(LaneRef::Lane(prev)), LaneRef::Lane(cur)) = (out.last().copied(), r) {
            if map.lanes()[prev].road == map.lanes()[cur].road {
                out.pop();
            }
        }
        out.push(r);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub lane: LaneRef,
    /// Arc length on the track where the piece begins and ends.
    pub start: f64,
    pub end: f64,
    /// Offset along the lane's own path at `start`.
    pub lane_offset: f64,
}

/// A continuous path through lanes and connectors without lane changes.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub path: Polyline,
    pub pieces: Vec<Piece>,
}

impl Track {
    /// Track along `refs` (no lane changes) starting `offset` meters into the first element.
    pub fn new(map: &MapGraph, refs: &[LaneRef], offset: f64) -> Option<Track> {
        let mut pts: Vec<Vec2> = Vec::new();
        let mut pieces = Vec::with_capacity(refs.len());
        let mut s = 0.0;
        for (i, &r) in refs.iter().enumerate() {
            let p = map.path(r);
            let from = if i == 0 { offset.clamp(0.0, p.length()) } else { 0.0 };
            let part = match p.slice(from, p.length()) {
                Some(x) => x,
                None => continue,
            };
            let len = part.length();
            pieces.push(Piece { lane: r, start: s, end: s + len, lane_offset: from });
            s += len;
            pts.extend_from_slice(part.points());
        }
        Some(Track { path: Polyline::new(pts)?, pieces })
    }

    pub fn length(&self) -> f64 {
        self.path.length()
    }

    /// Piece index and lane offset at track arc length `s`.
    pub fn locate(&self, s: f64) -> (usize, f64) {
        let idx = self
            .pieces
            .iter()
            .position(|p| s < p.end)
            .unwrap_or(self.pieces.len() - 1);
        let p = &self.pieces[idx];
        (idx, p.lane_offset + (s - p.start).max(0.0))
    }

    /// Track arc length of a lane offset, if that lane is on the track.
    pub fn station_of(&self, lane: LaneRef, offset: f64) -> Option<f64> {
        self.pieces
            .iter()
            .find(|p| p.lane == lane)
            .map(|p| p.start + (offset - p.lane_offset))
    }
}

/// Point and heading at `offset` along a lane or connector.
pub fn pose_on(map: &MapGraph, r: LaneRef, offset: f64) -> (Vec2, f64) {
    let p = map.path(r);
    (p.point_at(offset), p.heading_at(offset))
}
