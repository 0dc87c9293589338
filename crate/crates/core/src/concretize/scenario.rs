//! Concrete scenario file format.
//!
//! ```json
//! {
//!   "schema": "covdrive.scenario.v1",
//!   "id": "a00-i0",
//!   "seed": 17,
//!   "map": "town",
//!   "abstract": {"weather": "rainy", "road": "T-shaped"},
//!   "submap": {"junction": "J_2"},
//!   "structure": "T_SHAPED",
//!   "ego": {
//!     "route": ["road_12:2", "road_12:3", "J_2/road_12:3>road_2s:1", "road_2s:1"],
//!     "start": {"lane": "road_12:2", "offset": 100.0},
//!     "destination": {"lane": "road_2s:1", "offset": 45.0},
//!     "speed": 0.0, "action": "right", "length": 4.5, "width": 1.8
//!   },
//!   "npcs": [{"id": "npc_1", "route": ["road_2e:1"], "start": {"lane": "road_2e:1", "offset": 20.0},
//!             "speed": 9.0, "behavior": {"program": "follow_lane", "cautious": true},
//!             "length": 4.5, "width": 1.8}],
//!   "pedestrians": [{"id": "ped_1", "crosswalk": {"junction": "J_2", "road": "road_2s"},
//!                    "from_left": true, "trigger_time": 3.5, "speed": 1.4}],
//!   "environment": {"cloudiness": 0.8, "rain": 0.6, "wetness": 0.7},
//!   "signals": [{"junction": "J_1", "offset": 4.2,
//!                "phases": [{"roads": ["road_41", "road_12"], "green": 12.0, "yellow": 3.0, "all_red": 2.0}]}],
//!   "density": [3, 6]
//! }
//! ```
//!
//! Routes list lanes and junction connectors in driving order. Two
//! consecutive lanes of the same road denote a lane change. Offsets are
//! meters along the lane in its direction of travel.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::mapsem::{Direction, Structure, SubMapId};

pub const SCENARIO_SCHEMA: &str = "covdrive.scenario.v1";
pub const CAR_LENGTH: f64 = 4.5;
pub const CAR_WIDTH: f64 = 1.8;
pub const PEDESTRIAN_SIZE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanePose {
    pub lane: String,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoSpec {
    pub route: Vec<String>,
    pub start: LanePose,
    pub destination: LanePose,
    pub speed: f64,
    pub action: Direction,
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "program", rename_all = "snake_case", deny_unknown_fields)]
pub enum Behavior {
    /// Drive the route at the target speed. A cautious driver keeps a gap to
    /// whatever is ahead on its route and stops for red signals; otherwise
    /// the vehicle ignores everything.
    FollowLane { cautious: bool },
    /// As `FollowLane`, then brake to a standstill at `decel` (m/s², positive)
    /// once `trigger_distance` meters of route have been driven.
    FollowLaneThenBrake { cautious: bool, trigger_distance: f64, decel: f64 },
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NpcSpec {
    pub id: String,
    pub route: Vec<String>,
    pub start: LanePose,
    /// Initial and target speed.
    pub speed: f64,
    pub behavior: Behavior,
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrosswalkRef {
    pub junction: String,
    pub road: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PedestrianSpec {
    pub id: String,
    pub crosswalk: CrosswalkRef,
    /// Starts at the road's left edge (looking along the centerline).
    pub from_left: bool,
    pub trigger_time: f64,
    pub speed: f64,
    /// Extra distance back from the kerb when several wait on the same side.
    #[serde(default)]
    pub queue_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalState {
    Green,
    Yellow,
    Red,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    /// Approach roads with right of way during this phase.
    pub roads: Vec<String>,
    pub green: f64,
    pub yellow: f64,
    pub all_red: f64,
}

impl Phase {
    pub fn duration(&self) -> f64 {
        self.green + self.yellow + self.all_red
    }
}

/// Fixed-time cycle through the phases, shifted by `offset` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalProgram {
    pub junction: String,
    pub offset: f64,
    pub phases: Vec<Phase>,
}

impl SignalProgram {
    pub fn cycle(&self) -> f64 {
        self.phases.iter().map(Phase::duration).sum()
    }

    /// Signal shown to traffic arriving on `road` at time `t`.
    pub fn state_at(&self, t: f64, road: &str) -> SignalState {
        let cycle = self.cycle();
        if cycle <= 0.0 {
            return SignalState::Green;
        }
        let mut tau = (t + self.offset).rem_euclid(cycle);
        for p in &self.phases {
            if tau < p.duration() {
                if !p.roads.iter().any(|r| r == road) {
                    return SignalState::Red;
                }
                return if tau < p.green {
                    SignalState::Green
                } else if tau < p.green + p.yellow {
                    SignalState::Yellow
                } else {
                    SignalState::Red
                };
            }
            tau -= p.duration();
        }
        SignalState::Red
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcreteScenario {
    pub schema: String,
    pub id: String,
    pub seed: u64,
    pub map: String,
    #[serde(rename = "abstract")]
    pub abstract_scenario: BTreeMap<String, String>,
    pub submap: SubMapId,
    pub structure: Structure,
    pub ego: EgoSpec,
    pub npcs: Vec<NpcSpec>,
    pub pedestrians: Vec<PedestrianSpec>,
    pub environment: BTreeMap<String, f64>,
    pub signals: Vec<SignalProgram>,
    /// NPC vehicle count range of the abstract density element, if any.
    pub density: Option<[usize; 2]>,
}

impl ConcreteScenario {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn signal(&self, junction: &str) -> Option<&SignalProgram> {
        self.signals.iter().find(|s| s.junction == junction)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn program() -> SignalProgram {
        SignalProgram {
            junction: "J".into(),
            offset: 0.0,
            phases: vec![
                Phase { roads: vec!["a".into(), "b".into()], green: 12.0, yellow: 3.0, all_red: 2.0 },
                Phase { roads: vec!["c".into()], green: 12.0, yellow: 3.0, all_red: 2.0 },
            ],
        }
    }

    #[test]
    fn phase_schedule() {
        let p = program();
        assert_eq!(p.cycle(), 34.0);
        assert_eq!(p.state_at(0.0, "a"), SignalState::Green);
        assert_eq!(p.state_at(0.0, "c"), SignalState::Red);
        assert_eq!(p.state_at(12.0, "b"), SignalState::Yellow);
        assert_eq!(p.state_at(15.5, "a"), SignalState::Red);
        assert_eq!(p.state_at(17.0, "c"), SignalState::Green);
        assert_eq!(p.state_at(34.0 + 1.0, "a"), SignalState::Green);
        let shifted = SignalProgram { offset: 17.0, ..p };
        assert_eq!(shifted.state_at(0.0, "c"), SignalState::Green);
    }

    #[test]
    fn behavior_json_shape() {
        let b = Behavior::FollowLaneThenBrake { cautious: false, trigger_distance: 30.0, decel: 6.0 };
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(s, r#"{"program":"follow_lane_then_brake","cautious":false,"trigger_distance":30.0,"decel":6.0}"#);
        assert_eq!(serde_json::from_str::<Behavior>(&s).unwrap(), b);
    }
}
