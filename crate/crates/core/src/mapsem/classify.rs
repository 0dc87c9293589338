//! Junction shape classification from incident-road headings.
//!
//! Headings are sorted, consecutive cyclic gaps computed, and the gap
//! sequence compared against fixed templates of the same arity under every
//! rotation and reflection. A template matches when every gap is within the
//! tolerance of its counterpart; among matches the smallest worst residual
//! wins.

use serde::{Deserialize, Serialize};

use super::{MapError, MapGraph, RoadEnd};
use crate::geometry::wrap_degrees;

pub const DEFAULT_TOLERANCE_DEG: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JunctionKind {
    TShaped,
    YShaped,
    FourWay,
    Other,
}

impl JunctionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            JunctionKind::TShaped => "T_SHAPED",
            JunctionKind::YShaped => "Y_SHAPED",
            JunctionKind::FourWay => "FOUR_WAY",
            JunctionKind::Other => "OTHER",
        }
    }
}

const TEMPLATES: &[(JunctionKind, &[f64])] = &[
    (JunctionKind::TShaped, &[180.0, 90.0, 90.0]),
    (JunctionKind::YShaped, &[120.0, 120.0, 120.0]),
    (JunctionKind::FourWay, &[90.0, 90.0, 90.0, 90.0]),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JunctionClass {
    pub kind: JunctionKind,
    /// Gaps in ascending-heading order, starting after the smallest heading.
    pub gaps: Vec<f64>,
}

/// Worst per-gap residual of `gaps` against `template` over all cyclic
/// rotations and both orientations.
fn best_residual(gaps: &[f64], template: &[f64]) -> f64 {
    let n = gaps.len();
    let mut best = f64::INFINITY;
    for reflect in [false, true] {
        for r in 0..n {
            let worst = (0..n)
                .map(|i| {
                    let j = if reflect { (r + n - i) % n } else { (r + i) % n };
                    (gaps[j] - template[i]).abs()
                })
                .fold(0.0, f64::max);
            best = best.min(worst);
        }
    }
    best
}

/// Classifies a cyclic gap sequence (degrees).
pub fn classify_gaps(gaps: &[f64], tolerance: f64) -> JunctionKind {
    let mut best: Option<(JunctionKind, f64)> = None;
    for &(kind, template) in TEMPLATES.iter().filter(|(_, t)| t.len() == gaps.len()) {
        let res = best_residual(gaps, template);
        if res <= tolerance && best.map_or(true, |(_, b)| res < b) {
            best = Some((kind, res));
        }
    }
    best.map_or(JunctionKind::Other, |(k, _)| k)
}

/// Consecutive gaps between sorted headings, wrapping around; sums to 360.
pub fn heading_gaps(headings: &[f64]) -> Vec<f64> {
    let mut h: Vec<f64> = headings.iter().map(|&a| wrap_degrees(a)).collect();
    h.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = h.len();
    (0..n)
        .map(|i| if i + 1 < n { h[i + 1] - h[i] } else { h[0] + 360.0 - h[i] })
        .collect()
}

impl MapGraph {
    /// Outward heading (degrees in [0, 360)) of the given incident road,
    /// taken from the centerline segment touching the junction.
    pub(crate) fn outward_heading(&self, road: usize, end: RoadEnd) -> f64 {
        let line = &self.roads[road].centerline;
        let rad = match end {
            RoadEnd::Start => line.start_heading(),
            RoadEnd::End => line.end_heading() + std::f64::consts::PI,
        };
        wrap_degrees(rad.to_degrees())
    }

    /// One outward heading per incident road, in incidence order.
    pub fn incident_road_headings(&self, junction: &str) -> Result<Vec<(String, f64)>, MapError> {
        let j = self.junction(junction).ok_or_else(|| MapError::UnknownJunction(junction.into()))?;
        let junc = &self.junctions[j];
        if junc.incident.is_empty() {
            return Err(MapError::TooFewRoads { junction: junction.into(), count: 0, needed: 1 });
        }
        Ok(junc
            .incident
            .iter()
            .map(|i| (self.roads[i.road].id.clone(), self.outward_heading(i.road, i.end)))
            .collect())
    }

    pub fn classify_junction(&self, junction: &str, tolerance: f64) -> Result<JunctionClass, MapError> {
        let headings = self.incident_road_headings(junction)?;
        if headings.len() < 3 {
            return Err(MapError::TooFewRoads {
                junction: junction.into(),
                count: headings.len(),
                needed: 3,
            });
        }
        let gaps = heading_gaps(&headings.iter().map(|(_, h)| *h).collect::<Vec<_>>());
        Ok(JunctionClass { kind: classify_gaps(&gaps, tolerance), gaps })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mapsem::MapGraph;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn template_examples() {
        assert_eq!(classify_gaps(&[181.7, 90.1, 88.2], 15.0), JunctionKind::TShaped);
        assert_eq!(classify_gaps(&[120.0, 120.0, 120.0], 15.0), JunctionKind::YShaped);
        assert_eq!(classify_gaps(&[150.0, 105.0, 105.0], 15.0), JunctionKind::Other);
        assert_eq!(classify_gaps(&[90.0, 90.0, 90.0, 90.0], 15.0), JunctionKind::FourWay);
        assert_eq!(classify_gaps(&[72.0; 5], 15.0), JunctionKind::Other);
        // order of the T's gaps does not matter
        assert_eq!(classify_gaps(&[90.0, 180.0, 90.0], 15.0), JunctionKind::TShaped);
    }

    #[test]
    fn residuals_against_t_and_y() {
        // Y residual of the figure's T is far beyond the tolerance
        assert!(best_residual(&[181.7, 90.1, 88.2], &[120.0, 120.0, 120.0]) >= 28.0);
        assert_abs_diff_eq!(best_residual(&[150.0, 105.0, 105.0], &[180.0, 90.0, 90.0]), 30.0);
        assert_abs_diff_eq!(best_residual(&[150.0, 105.0, 105.0], &[120.0, 120.0, 120.0]), 30.0);
    }

    #[test]
    fn fixture_headings() {
        let t = MapGraph::from_file(fixtures::t_junction()).unwrap();
        let h: Vec<f64> = t.incident_road_headings(fixtures::T_JUNCTION).unwrap().into_iter().map(|x| x.1).collect();
        let g = sorted(heading_gaps(&h));
        for (a, b) in g.iter().zip([90.0, 90.0, 180.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-6);
        }
        let y = MapGraph::from_file(fixtures::y_junction()).unwrap();
        let h: Vec<f64> = y.incident_road_headings(fixtures::Y_JUNCTION).unwrap().into_iter().map(|x| x.1).collect();
        for g in heading_gaps(&h) {
            assert_abs_diff_eq!(g, 120.0, epsilon = 1e-6);
        }
        assert_eq!(y.classify_junction(fixtures::Y_JUNCTION, 15.0).unwrap().kind, JunctionKind::YShaped);
    }

    #[test]
    fn skewed_t_gaps_recovered() {
        let map = MapGraph::from_file(fixtures::skewed_t()).unwrap();
        let class = map.classify_junction(fixtures::SKEWED_T_JUNCTION, DEFAULT_TOLERANCE_DEG).unwrap();
        assert_eq!(class.kind, JunctionKind::TShaped);
        let mut expected = vec![181.7, 90.1, 88.2];
        let mut got = class.gaps.clone();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 0.1, "{got:?}");
        }
    }

    #[test]
    fn too_few_roads_rejected() {
        let map = MapGraph::from_file(fixtures::two_lane_straight()).unwrap();
        assert!(matches!(map.classify_junction("nope", 15.0), Err(MapError::UnknownJunction(_))));
    }

    proptest! {
        #[test]
        fn gaps_sum_to_full_turn(hs in prop::collection::vec(0.0..360.0f64, 1..8)) {
            let s: f64 = heading_gaps(&hs).iter().sum();
            prop_assert!((s - 360.0).abs() <= 360.0 * 1e-6);
        }

        #[test]
        fn rotation_invariant(rot in 0.0..360.0f64, which in 0usize..3) {
            let base: &[f64] = [&[0.0, 90.0, 270.0][..], &[0.0, 120.0, 240.0], &[10.0, 100.0, 190.0, 280.0]][which];
            let k0 = classify_gaps(&heading_gaps(base), 15.0);
            let moved: Vec<f64> = base.iter().map(|h| h + rot).collect();
            prop_assert_eq!(classify_gaps(&heading_gaps(&moved), 15.0), k0);
        }

        #[test]
        fn stable_under_half_tolerance_jitter(j in prop::collection::vec(-7.5..7.5f64, 4), which in 0usize..3) {
            let (base, kind): (&[f64], JunctionKind) = [
                (&[0.0, 90.0, 270.0][..], JunctionKind::TShaped),
                (&[0.0, 120.0, 240.0], JunctionKind::YShaped),
                (&[0.0, 90.0, 180.0, 270.0], JunctionKind::FourWay),
            ][which];
            let hs: Vec<f64> = base.iter().zip(&j).map(|(h, d)| h + d).collect();
            prop_assert_eq!(classify_gaps(&heading_gaps(&hs), 15.0), kind);
        }
    }
}
