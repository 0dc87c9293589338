//! Sub-map search and relative direction labels.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::classify::{JunctionKind, DEFAULT_TOLERANCE_DEG};
use super::{LaneDir, MapError, MapGraph};
use crate::geometry::wrap_degrees_signed;

/// Road structure requested by a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Structure {
    Straight,
    TShaped,
    YShaped,
    FourWay,
    Other,
    /// Never matched: roundabouts are not recognized.
    Roundabout,
}

impl Structure {
    pub fn junction_kind(self) -> Option<JunctionKind> {
        match self {
            Structure::TShaped => Some(JunctionKind::TShaped),
            Structure::YShaped => Some(JunctionKind::YShaped),
            Structure::FourWay => Some(JunctionKind::FourWay),
            Structure::Other => Some(JunctionKind::Other),
            Structure::Straight | Structure::Roundabout => None,
        }
    }
}

impl From<JunctionKind> for Structure {
    fn from(k: JunctionKind) -> Self {
        match k {
            JunctionKind::TShaped => Structure::TShaped,
            JunctionKind::YShaped => Structure::YShaped,
            JunctionKind::FourWay => Structure::FourWay,
            JunctionKind::Other => Structure::Other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Left,
    Right,
    Straight,
    UTurn,
}

impl Direction {
    /// Label for a signed offset (degrees, counter-clockwise positive).
    pub fn from_offset(offset: f64) -> Direction {
        if offset.abs() <= 45.0 {
            Direction::Straight
        } else if offset > 45.0 && offset <= 135.0 {
            Direction::Left
        } else if (-135.0..-45.0).contains(&offset) {
            Direction::Right
        } else {
            Direction::UTurn
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::Straight => "straight",
            Direction::UTurn => "u-turn",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubMapQuery {
    pub structure: Option<Structure>,
    /// `Some(true)` requires a crosswalk, `Some(false)` forbids one.
    #[serde(default)]
    pub crosswalk: Option<bool>,
    #[serde(default)]
    pub signalized: Option<bool>,
}

impl SubMapQuery {
    pub fn structure(s: Structure) -> Self {
        SubMapQuery { structure: Some(s), ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubMapId {
    Junction(String),
    Road(String),
}

impl SubMapId {
    pub fn id(&self) -> &str {
        match self {
            SubMapId::Junction(s) | SubMapId::Road(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubMap {
    pub id: SubMapId,
    pub structure: Structure,
    pub crosswalk: bool,
    pub signalized: bool,
    /// Road id → (forward lanes, backward lanes).
    pub lane_counts: BTreeMap<String, (usize, usize)>,
}

/// Minimum length and maximum total turn for a road to count as a straight segment.
pub const STRAIGHT_MIN_LENGTH: f64 = 60.0;
pub const STRAIGHT_MAX_TURN_DEG: f64 = 15.0;

impl MapGraph {
    fn lane_counts(&self, road: usize) -> (usize, usize) {
        let lanes = &self.roads[road].lanes;
        let fwd = lanes.iter().filter(|&&l| self.lanes[l].dir == LaneDir::Forward).count();
        (fwd, lanes.len() - fwd)
    }

    /// Every junction and straight road segment as a sub-map, junctions
    /// first, each group in id order.
    pub fn all_submaps(&self) -> Vec<SubMap> {
        let mut out = Vec::new();
        for (id, &j) in &self.junction_index {
            let junc = &self.junctions[j];
            let structure = if junc.incident.len() >= 3 {
                self.classify_junction(id, DEFAULT_TOLERANCE_DEG).map(|c| c.kind.into()).unwrap_or(Structure::Other)
            } else {
                Structure::Other
            };
            out.push(SubMap {
                id: SubMapId::Junction(id.clone()),
                structure,
                crosswalk: self.crosswalks.iter().any(|c| c.junction == j),
                signalized: junc.signalized,
                lane_counts: junc
                    .incident
                    .iter()
                    .map(|i| (self.roads[i.road].id.clone(), self.lane_counts(i.road)))
                    .collect(),
            });
        }
        for (id, &r) in &self.road_index {
            let road = &self.roads[r];
            if road.centerline.length() >= STRAIGHT_MIN_LENGTH
                && road.centerline.total_turn().to_degrees().abs() <= STRAIGHT_MAX_TURN_DEG
            {
                out.push(SubMap {
                    id: SubMapId::Road(id.clone()),
                    structure: Structure::Straight,
                    crosswalk: false,
                    signalized: false,
                    lane_counts: [(id.clone(), self.lane_counts(r))].into(),
                });
            }
        }
        out
    }

    /// All sub-maps satisfying the query, in deterministic id order.
    pub fn find_submaps(&self, query: &SubMapQuery) -> Vec<SubMap> {
        self.all_submaps()
            .into_iter()
            .filter(|s| query.structure.map_or(true, |q| q == s.structure))
            .filter(|s| query.crosswalk.map_or(true, |q| q == s.crosswalk))
            .filter(|s| query.signalized.map_or(true, |q| q == s.signalized))
            .collect()
    }

    /// Labels every incident road of `junction` relative to a vehicle
    /// arriving on `approach_road`. The approach road itself is `u-turn`.
    pub fn relative_direction(
        &self,
        junction: &str,
        approach_road: &str,
    ) -> Result<BTreeMap<String, Direction>, MapError> {
        let j = self.junction(junction).ok_or_else(|| MapError::UnknownJunction(junction.into()))?;
        let a = self.road(approach_road).ok_or_else(|| MapError::UnknownRoad(approach_road.into()))?;
        let junc = &self.junctions[j];
        let inc = junc.incident.iter().find(|i| i.road == a).ok_or_else(|| MapError::NotIncident {
            junction: junction.into(),
            road: approach_road.into(),
        })?;
        // travel heading while entering = outward heading reversed
        let entering = self.outward_heading(a, inc.end) + 180.0;
        Ok(junc
            .incident
            .iter()
            .map(|i| {
                let label = if i.road == a {
                    Direction::UTurn
                } else {
                    Direction::from_offset(wrap_degrees_signed(self.outward_heading(i.road, i.end) - entering))
                };
                (self.roads[i.road].id.clone(), label)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn offset_labels() {
        assert_eq!(Direction::from_offset(0.0), Direction::Straight);
        assert_eq!(Direction::from_offset(45.0), Direction::Straight);
        assert_eq!(Direction::from_offset(-45.0), Direction::Straight);
        assert_eq!(Direction::from_offset(46.0), Direction::Left);
        assert_eq!(Direction::from_offset(135.0), Direction::Left);
        assert_eq!(Direction::from_offset(-135.0), Direction::Right);
        assert_eq!(Direction::from_offset(-46.0), Direction::Right);
        assert_eq!(Direction::from_offset(136.0), Direction::UTurn);
        assert_eq!(Direction::from_offset(-136.0), Direction::UTurn);
        assert_eq!(Direction::from_offset(180.0), Direction::UTurn);
    }

    #[test]
    fn grid_four_way() {
        let map = MapGraph::from_file(fixtures::grid()).unwrap();
        let found = map.find_submaps(&SubMapQuery::structure(Structure::FourWay));
        assert_eq!(found.len(), 4);
        let ids: Vec<_> = found.iter().map(|s| s.id.id().to_string()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn t_without_crosswalks() {
        let map = MapGraph::from_file(fixtures::t_junction()).unwrap();
        let q = SubMapQuery { structure: Some(Structure::TShaped), crosswalk: Some(true), signalized: None };
        assert!(map.find_submaps(&q).is_empty());
        assert_eq!(map.find_submaps(&SubMapQuery::structure(Structure::TShaped)).len(), 1);
        assert!(map.find_submaps(&SubMapQuery::structure(Structure::Roundabout)).is_empty());
    }

    #[test]
    fn symmetric_t_stem_approach() {
        let map = MapGraph::from_file(fixtures::t_junction()).unwrap();
        let labels = map.relative_direction(fixtures::T_JUNCTION, fixtures::T_STEM).unwrap();
        let mut got: Vec<Direction> = labels
            .iter()
            .filter(|(r, _)| r.as_str() != fixtures::T_STEM)
            .map(|(_, d)| *d)
            .collect();
        got.sort();
        assert_eq!(got, vec![Direction::Left, Direction::Right]);
        assert_eq!(labels[fixtures::T_STEM], Direction::UTurn);
    }

    #[test]
    fn four_way_each_arm() {
        let map = MapGraph::from_file(fixtures::grid()).unwrap();
        let j = &map.junctions()[0];
        for inc in &j.incident {
            let road = &map.roads()[inc.road].id;
            let labels = map.relative_direction(&j.id, road).unwrap();
            let mut others: Vec<Direction> =
                labels.iter().filter(|(r, _)| *r != road).map(|(_, d)| *d).collect();
            others.sort();
            assert_eq!(others, vec![Direction::Left, Direction::Right, Direction::Straight]);
        }
    }

    #[test]
    fn skewed_t_left_road() {
        let map = MapGraph::from_file(fixtures::skewed_t()).unwrap();
        let labels = map.relative_direction(fixtures::SKEWED_T_JUNCTION, "road_115").unwrap();
        assert_eq!(labels["road_117"], Direction::Left);
        assert_eq!(labels["road_116"], Direction::Straight);
    }

    #[test]
    fn approach_must_be_incident() {
        let map = MapGraph::from_file(fixtures::grid()).unwrap();
        let j = &map.junctions()[0].id;
        let far = map
            .roads()
            .iter()
            .find(|r| !map.junctions()[0].incident.iter().any(|i| map.roads()[i.road].id == r.id))
            .unwrap();
        assert!(matches!(map.relative_direction(j, &far.id), Err(MapError::NotIncident { .. })));
    }
}
