//! Turning abstract scenarios into concrete, simulator-ready ones.
//!
//! # Parameter map file
//!
//! A JSON object keyed by `category.element`; each value is a list of
//! bindings:
//!
//! | binding | meaning |
//! |---|---|
//! | `{"param": "rain", "range": [lo, hi], "policy": "random"}` | environment parameter, sampled with `random` (default), `midpoint` or `interior` |
//! | `{"count_range": [n, m]}` | number of NPC vehicles (the ego is not counted) |
//! | `{"structure": "T_SHAPED"}` | road structure to search for |
//! | `{"ego_action": "left"}` | required ego movement: `straight`, `left`, `right`, `u-turn` |
//! | `{"pedestrians": [n, m]}` | number of crossing pedestrians |
//! | `{"crosswalk": true}` | the sub-map must have a crosswalk |
//! | `{"signalized": true}` | the junction must (or must not) be signalized |
//!
//! Environment parameters: `cloudiness`, `rain`, `wetness`, `fog`, `wind`
//! (all in [0, 1]) and `time_of_day` (hours).

mod instantiate;
mod scenario;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::mapsem::{Direction, Structure};

pub use instantiate::{instantiate, pedestrian_endpoints, NPC_SPEED_FRACTION, PEDESTRIAN_WAIT, PLACEMENT_RETRIES};
pub use scenario::{
    Behavior, ConcreteScenario, CrosswalkRef, EgoSpec, LanePose, NpcSpec, PedestrianSpec, Phase, SignalProgram,
    SignalState, CAR_LENGTH, CAR_WIDTH, PEDESTRIAN_SIZE, SCENARIO_SCHEMA,
};

pub const ENVIRONMENT_PARAMETERS: &[&str] = &["cloudiness", "rain", "wetness", "fog", "wind", "time_of_day"];

/// Fraction of the range width kept clear of each bound by the interior policy.
pub const INTERIOR_MARGIN: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum ConcretizeError {
    #[error("parameter map syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid range [{lo}, {hi}] for `{name}`")]
    InvalidRange { name: String, lo: f64, hi: f64 },
    #[error("unknown simulator parameter `{0}`")]
    UnknownParameter(String),
    #[error("parameter map has no entry for `{0}`")]
    MissingElement(String),
    #[error("parameter map key `{0}` is not a catalog element")]
    UnknownElement(String),
    #[error("conflicting bindings for {0}")]
    Conflict(String),
    #[error("abstract scenario needs a {0} binding")]
    MissingBinding(&'static str),
    #[error("no sub-map realizes {0}")]
    NoMatchingSubMap(String),
    #[error("could not place {0} without overlap after {PLACEMENT_RETRIES} attempts")]
    PlacementExhausted(String),
    #[error("vehicle count {count} outside density range [{lo}, {hi}]")]
    OutsideDensity { count: usize, lo: usize, hi: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    #[default]
    Random,
    Midpoint,
    /// Uniform, keeping [`INTERIOR_MARGIN`] of the width away from both bounds.
    Interior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Binding {
    Param {
        param: String,
        range: [f64; 2],
        #[serde(default)]
        policy: Policy,
    },
    Count {
        count_range: [usize; 2],
    },
    Structure {
        structure: Structure,
    },
    EgoAction {
        ego_action: Direction,
    },
    Pedestrians {
        pedestrians: [usize; 2],
    },
    Crosswalk {
        crosswalk: bool,
    },
    Signalized {
        signalized: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterMap {
    pub entries: BTreeMap<String, Vec<Binding>>,
}

/// Samples a value from `[lo, hi]`. A degenerate range returns `lo`.
pub fn sample_parameter<R: Rng + ?Sized>(lo: f64, hi: f64, policy: Policy, rng: &mut R) -> Result<f64, ConcretizeError> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(ConcretizeError::InvalidRange { name: "range".into(), lo, hi });
    }
    if lo == hi {
        return Ok(lo);
    }
    Ok(match policy {
        Policy::Random => rng.gen_range(lo..=hi),
        Policy::Midpoint => (lo + hi) / 2.0,
        Policy::Interior => {
            let m = INTERIOR_MARGIN * (hi - lo);
            rng.gen_range(lo + m..=hi - m)
        }
    })
}

/// Integer count strictly inside `[lo, hi]` when the range allows it, so
/// that agents can still be added or removed without leaving the range.
pub fn sample_count<R: Rng + ?Sized>(lo: usize, hi: usize, rng: &mut R) -> usize {
    let m = INTERIOR_MARGIN * (hi - lo) as f64;
    let a = (lo as f64 + m).ceil() as usize;
    let b = (hi as f64 - m).floor() as usize;
    if a <= b {
        rng.gen_range(a..=b)
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Number of vehicles that may still be added without leaving the density range.
pub fn spawn_headroom(scenario: &ConcreteScenario, density: [usize; 2]) -> Result<usize, ConcretizeError> {
    let count = scenario.npcs.len();
    let [lo, hi] = density;
    if count < lo || count > hi {
        return Err(ConcretizeError::OutsideDensity { count, lo, hi });
    }
    Ok(hi - count)
}

impl ParameterMap {
    pub fn parse(text: &str) -> Result<Self, ConcretizeError> {
        let map: ParameterMap = serde_json::from_str(text).map_err(|e| ConcretizeError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        map.check_ranges()?;
        Ok(map)
    }

    fn check_ranges(&self) -> Result<(), ConcretizeError> {
        for bindings in self.entries.values() {
            for b in bindings {
                match b {
                    Binding::Param { param, range: [lo, hi], .. } => {
                        if !ENVIRONMENT_PARAMETERS.contains(&param.as_str()) {
                            return Err(ConcretizeError::UnknownParameter(param.clone()));
                        }
                        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                            return Err(ConcretizeError::InvalidRange { name: param.clone(), lo: *lo, hi: *hi });
                        }
                    }
                    Binding::Count { count_range: [lo, hi] } | Binding::Pedestrians { pedestrians: [lo, hi] } => {
                        if lo > hi {
                            return Err(ConcretizeError::InvalidRange {
                                name: "count".into(),
                                lo: *lo as f64,
                                hi: *hi as f64,
                            });
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Every catalog element must have an entry and every key must name one.
    pub fn validate(&self, catalog: &Catalog) -> Result<(), ConcretizeError> {
        for c in catalog.categories() {
            for e in &c.elements {
                let key = format!("{}.{}", c.name, e);
                if !self.entries.contains_key(&key) {
                    return Err(ConcretizeError::MissingElement(key));
                }
            }
        }
        for key in self.entries.keys() {
            let known = key
                .split_once('.')
                .and_then(|(c, e)| catalog.category_index(c).map(|i| (i, e)))
                .is_some_and(|(i, e)| catalog.categories()[i].element_index(e).is_some());
            if !known {
                return Err(ConcretizeError::UnknownElement(key.clone()));
            }
        }
        Ok(())
    }

    pub fn bindings(&self, category: &str, element: &str) -> &[Binding] {
        self.entries.get(&format!("{category}.{element}")).map_or(&[], Vec::as_slice)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::parse_catalog;
    use crate::fixtures;
    use crate::seed::rng;

    #[test]
    fn parameter_sampling_policies() {
        let mut r = rng(1);
        for _ in 0..1000 {
            let v = sample_parameter(0.3, 1.0, Policy::Random, &mut r).unwrap();
            assert!((0.3..=1.0).contains(&v));
            let v = sample_parameter(0.0, 10.0, Policy::Interior, &mut r).unwrap();
            assert!((1.0..=9.0).contains(&v));
        }
        for p in [Policy::Random, Policy::Midpoint, Policy::Interior] {
            assert_eq!(sample_parameter(0.2, 0.2, p, &mut r).unwrap(), 0.2);
        }
        assert_eq!(sample_parameter(2.0, 4.0, Policy::Midpoint, &mut r).unwrap(), 3.0);
        assert!(matches!(sample_parameter(1.0, 0.0, Policy::Random, &mut r), Err(ConcretizeError::InvalidRange { .. })));
    }

    #[test]
    fn counts_stay_off_the_bounds() {
        let mut r = rng(2);
        for _ in 0..200 {
            let n = sample_count(3, 6, &mut r);
            assert!((4..=5).contains(&n));
            assert_eq!(sample_count(2, 2, &mut r), 2);
            assert!((0..=1).contains(&sample_count(0, 1, &mut r)));
        }
    }

    #[test]
    fn town_parameter_map_covers_town_catalog() {
        let cat = parse_catalog(fixtures::TOWN_CATALOG).unwrap();
        let pm = ParameterMap::parse(fixtures::TOWN_PARAMS).unwrap();
        pm.validate(&cat).unwrap();
        assert_eq!(
            pm.bindings("vehicle-density", "mild"),
            &[Binding::Count { count_range: [3, 6] }]
        );
    }

    #[test]
    fn parameter_map_rejects_bad_entries() {
        assert!(matches!(
            ParameterMap::parse(r#"{"weather.sunny": [{"param": "sunshine", "range": [0, 1]}]}"#),
            Err(ConcretizeError::UnknownParameter(_))
        ));
        assert!(matches!(
            ParameterMap::parse(r#"{"weather.sunny": [{"param": "rain", "range": [1, 0]}]}"#),
            Err(ConcretizeError::InvalidRange { .. })
        ));
        assert!(matches!(ParameterMap::parse("{"), Err(ConcretizeError::Syntax { .. })));
        let cat = parse_catalog(fixtures::EXAMPLE_CATALOG).unwrap();
        let pm = ParameterMap::parse(r#"{"weather.sunny": []}"#).unwrap();
        assert!(matches!(pm.validate(&cat), Err(ConcretizeError::MissingElement(_))));
    }
}
