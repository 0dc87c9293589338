//! Behavioral sequences and targeted collision points.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::mapsem::{Direction, LaneRef, MapGraph};
use crate::simcore::TimedTrace;

use super::PerturbError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BehavioralPattern {
    LaneFollowing,
    LaneChangeLeft,
    LaneChangeRight,
    EncroachingChangeLeft,
    EncroachingChangeRight,
    TurnLeft,
    TurnRight,
    UTurn,
}

/// Coarse pattern families used for priority ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternClass {
    Encroaching,
    LaneChange,
    Turn,
    UTurn,
    LaneFollowing,
}

impl BehavioralPattern {
    pub fn as_str(self) -> &'static str {
        match self {
            BehavioralPattern::LaneFollowing => "lane-following",
            BehavioralPattern::LaneChangeLeft => "lane-change-left",
            BehavioralPattern::LaneChangeRight => "lane-change-right",
            BehavioralPattern::EncroachingChangeLeft => "encroaching-change-left",
            BehavioralPattern::EncroachingChangeRight => "encroaching-change-right",
            BehavioralPattern::TurnLeft => "turn-left",
            BehavioralPattern::TurnRight => "turn-right",
            BehavioralPattern::UTurn => "u-turn",
        }
    }

    pub fn class(self) -> PatternClass {
        use BehavioralPattern::*;
        match self {
            LaneFollowing => PatternClass::LaneFollowing,
            LaneChangeLeft | LaneChangeRight => PatternClass::LaneChange,
            EncroachingChangeLeft | EncroachingChangeRight => PatternClass::Encroaching,
            TurnLeft | TurnRight => PatternClass::Turn,
            UTurn => PatternClass::UTurn,
        }
    }
}

impl fmt::Display for BehavioralPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Frames `start..=end` of the ego trace showing one pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub pattern: BehavioralPattern,
    pub start: usize,
    pub end: usize,
}

pub type BehavioralSequence = Vec<Segment>;

/// The patterns of a sequence without frame boundaries.
pub fn pattern_word(seq: &[Segment]) -> Vec<BehavioralPattern> {
    seq.iter().map(|s| s.pattern).collect()
}

fn ego_corners(trace: &TimedTrace, i: usize) -> [Vec2; 4] {
    trace.ego(i).obb(&trace.agents[0]).corners()
}

/// Whether the ego box lies entirely within the lane's footprint.
fn contained(map: &MapGraph, trace: &TimedTrace, i: usize, lane: usize) -> bool {
    let l = &map.lanes()[lane];
    ego_corners(trace, i).iter().all(|&c| l.path.project(c).lateral.abs() <= l.width / 2.0 + 1e-9)
}

fn turn_pattern(map: &MapGraph, conn: usize, cache: &mut BTreeMap<usize, BehavioralPattern>) -> BehavioralPattern {
    *cache.entry(conn).or_insert_with(|| {
        let c = &map.connectors()[conn];
        let from = &map.roads()[map.lanes()[c.from].road].id;
        let to = &map.roads()[map.lanes()[c.to].road].id;
        let junction = &map.junctions()[c.junction].id;
        match map.relative_direction(junction, from).ok().and_then(|m| m.get(to).copied()) {
            Some(Direction::Left) => BehavioralPattern::TurnLeft,
            Some(Direction::Right) => BehavioralPattern::TurnRight,
            Some(Direction::UTurn) => BehavioralPattern::UTurn,
            _ => BehavioralPattern::LaneFollowing,
        }
    })
}

/// Lateral move from lane `a` into lane `b` at frame `i`, if they are neighbours.
fn lateral_move(map: &MapGraph, trace: &TimedTrace, i: usize, a: usize, b: usize) -> Option<BehavioralPattern> {
    let (la, lb) = (&map.lanes()[a], &map.lanes()[b]);
    if la.road != lb.road {
        return None;
    }
    let left_of_a = if map.adjacent_lane(a, true) == Some(b) {
        true
    } else if map.adjacent_lane(a, false) == Some(b) {
        false
    } else {
        return None;
    };
    let ego = trace.ego(i);
    let travel = Vec2::from_heading(ego.heading);
    let p = ego.position();
    let with_a = travel.dot(Vec2::from_heading(la.path.heading_at(la.path.project(p).s))) >= 0.0;
    let with_b = travel.dot(Vec2::from_heading(lb.path.heading_at(lb.path.project(p).s))) >= 0.0;
    let left = left_of_a == with_a;
    Some(match (with_b, left) {
        (true, true) => BehavioralPattern::LaneChangeLeft,
        (true, false) => BehavioralPattern::LaneChangeRight,
        (false, true) => BehavioralPattern::EncroachingChangeLeft,
        (false, false) => BehavioralPattern::EncroachingChangeRight,
    })
}

/// Splits the ego trace into maximal runs of one behavioral pattern.
///
/// A lane change starts at the first frame whose bounding box crosses the
/// separator toward the target lane (the start of the run of frames not
/// contained in the source lane that ends where the centre crosses) and
/// ends at the first frame fully contained in the target lane. Moving into a
/// lane whose traffic runs against the ego is an encroaching change. Frames
/// on a junction connector take the connector's turn label; everything else
/// is lane following.
pub fn extract_behavioral_sequence(trace: &TimedTrace, map: &MapGraph) -> Result<BehavioralSequence, PerturbError> {
    let n = trace.frames.len();
    if n == 0 {
        return Err(PerturbError::MissingAnnotations("empty trace".into()));
    }
    let refs: Vec<Option<LaneRef>> = (0..n)
        .map(|i| {
            let id = &trace.ego(i).lane;
            if id.is_empty() {
                Ok(None)
            } else {
                map.lane_ref(id).map(Some).ok_or_else(|| PerturbError::MissingAnnotations(format!("unknown lane `{id}`")))
            }
        })
        .collect::<Result<_, _>>()?;

    let mut cache = BTreeMap::new();
    let mut labels: Vec<BehavioralPattern> = refs
        .iter()
        .map(|r| match r {
            Some(LaneRef::Connector(c)) => turn_pattern(map, *c, &mut cache),
            _ => BehavioralPattern::LaneFollowing,
        })
        .collect();

    let mut floor = 0;
    let mut i = 1;
    while i < n {
        let (Some(LaneRef::Lane(a)), Some(LaneRef::Lane(b))) = (refs[i - 1], refs[i]) else {
            i += 1;
            continue;
        };
        let Some(pattern) = (a != b).then(|| lateral_move(map, trace, i, a, b)).flatten() else {
            i += 1;
            continue;
        };
        let mut start = i;
        while start > floor && refs[start - 1] == Some(LaneRef::Lane(a)) && !contained(map, trace, start - 1, a) {
            start -= 1;
        }
        let mut end = i;
        while end + 1 < n && refs[end] == Some(LaneRef::Lane(b)) && !contained(map, trace, end, b) {
            end += 1;
        }
        if refs[end] != Some(LaneRef::Lane(b)) {
            end -= 1;
        }
        for l in &mut labels[start..=end] {
            *l = pattern;
        }
        floor = end + 1;
        i = end + 1;
    }

    let mut seq: Vec<Segment> = Vec::new();
    for (i, &p) in labels.iter().enumerate() {
        match seq.last_mut() {
            Some(s) if s.pattern == p => s.end = i,
            _ => seq.push(Segment { pattern: p, start: i, end: i }),
        }
    }
    Ok(seq)
}

/// Where a spawned NPC should meet the ego.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionPoint {
    pub id: String,
    pub position: Vec2,
    /// Ego heading at the point.
    pub heading: f64,
    /// Time the ego reaches `position` in the source trace.
    pub t: f64,
    pub frame: usize,
    pub pattern: BehavioralPattern,
    pub segment: usize,
    /// Lane or connector the ego occupies at the point.
    pub lane: String,
    /// For lateral moves, the lane the ego leaves.
    pub from_lane: Option<String>,
}

/// Minimum arc length of a lane-following segment that yields points.
pub const MIN_FOLLOWING_LENGTH: f64 = 3.0;

/// Lateral moves give the first frame whose centre is over the boundary;
/// turns give the junction entry; lane following gives the positions at
/// one and two thirds of the segment's arc length.
pub fn extract_collision_points(seq: &[Segment], trace: &TimedTrace) -> Vec<CollisionPoint> {
    let mut out = Vec::new();
    for (k, s) in seq.iter().enumerate() {
        let ego = |i: usize| trace.ego(i);
        let mut push = |frame: usize, position: Vec2, from_lane: Option<String>| {
            out.push(CollisionPoint {
                id: String::new(),
                position,
                heading: ego(frame).heading,
                t: trace.frames[frame].t,
                frame,
                pattern: s.pattern,
                segment: k,
                lane: ego(frame).lane.clone(),
                from_lane,
            });
        };
        match s.pattern.class() {
            PatternClass::LaneChange | PatternClass::Encroaching => {
                let first_lane = &ego(s.start).lane;
                let cross = (s.start..=s.end).find(|&i| &ego(i).lane != first_lane).unwrap_or(s.start);
                let from = (cross > 0).then(|| ego(cross - 1).lane.clone()).filter(|l| l != &ego(cross).lane);
                push(cross, ego(cross).position(), from);
            }
            PatternClass::Turn | PatternClass::UTurn => push(s.start, ego(s.start).position(), None),
            PatternClass::LaneFollowing => {
                let pts: Vec<Vec2> = (s.start..=s.end).map(|i| ego(i).position()).collect();
                let mut cum = vec![0.0];
                for w in pts.windows(2) {
                    cum.push(cum.last().unwrap() + w[0].distance(w[1]));
                }
                let total = *cum.last().unwrap();
                if total < MIN_FOLLOWING_LENGTH {
                    continue;
                }
                for frac in [1.0 / 3.0, 2.0 / 3.0] {
                    let target = total * frac;
                    let j = cum.iter().position(|&c| c >= target - 1e-9).unwrap();
                    let position = if j == 0 {
                        pts[0]
                    } else {
                        let u = (target - cum[j - 1]) / (cum[j] - cum[j - 1]);
                        pts[j - 1].lerp(pts[j], u)
                    };
                    push(s.start + j, position, None);
                }
            }
        }
    }
    for (i, p) in out.iter_mut().enumerate() {
        p.id = format!("P{}", i + 1);
    }
    out
}
