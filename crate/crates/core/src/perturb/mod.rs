//! Local scenario variation by agent spawning.
//!
//! A base trace is split into a [`BehavioralSequence`]; every segment yields
//! targeted collision points; each point becomes a scenario with one extra
//! NPC whose start distance `d` is searched by simulation
//! ([`search_parameter`]); [`meta_search`] drives the points through a
//! priority queue under a simulation budget.

mod search;
mod sequence;
mod spawn;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concretize::ConcretizeError;
use crate::kpi::KpiError;
use crate::simcore::SimError;

pub use search::{
    meta_search, search_distance, search_parameter, Counting, Found, LogEntry, Probe, ProbeVerdict, Probed, Run,
    ScenarioSimulator, SearchOutcome, SearchState, SimRunner, StopReason,
};
pub use sequence::{
    extract_behavioral_sequence, extract_collision_points, pattern_word, BehavioralPattern, BehavioralSequence,
    CollisionPoint, PatternClass, Segment, MIN_FOLLOWING_LENGTH,
};
pub use spawn::{build_parameterized_scenario, NpcProgram, ParameterizedScenario, SPAWN_PREFIX};

#[derive(Debug, PartialEq, Error)]
pub enum PerturbError {
    #[error("trace lacks lane annotations: {0}")]
    MissingAnnotations(String),
    #[error("no legal NPC placement: {0}")]
    NoLegalPlacement(String),
    #[error("no spawn headroom left in the density range")]
    NoHeadroom,
    #[error(transparent)]
    Density(#[from] ConcretizeError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Kpi(#[from] KpiError),
}

/// Tunables of the spawn strategies and the distance search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Half-width of the distance domain around `v·t` (m).
    pub delta: f64,
    pub initial_step: f64,
    pub min_step: f64,
    /// NPC arrival earlier than the ego by more than this counts as early (s).
    pub eps_early: f64,
    pub eps_late: f64,
    /// Simulations per collision point.
    pub max_iters: usize,
    /// Pattern classes, highest priority first.
    pub priority: Vec<PatternClass>,
    /// Same-lane NPC speed as a fraction of the speed limit.
    pub same_lane_speed_fraction: f64,
    /// Deceleration of the abrupt-brake program (m/s², positive).
    pub brake_decel: f64,
    /// Required free distance between the spawned NPC and every initial agent.
    pub clearance: f64,
    /// The ego counts as at the point within this distance.
    pub arrival_radius: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            delta: 10.0,
            initial_step: 4.0,
            min_step: 0.25,
            eps_early: 0.5,
            eps_late: 0.5,
            max_iters: 10,
            priority: vec![
                PatternClass::Encroaching,
                PatternClass::LaneChange,
                PatternClass::Turn,
                PatternClass::UTurn,
                PatternClass::LaneFollowing,
            ],
            same_lane_speed_fraction: 0.5,
            brake_decel: 6.0,
            clearance: 1.0,
            arrival_radius: 2.5,
        }
    }
}

impl SearchConfig {
    /// Rank of a pattern; lower pops first. Unlisted classes rank last.
    pub fn rank(&self, p: BehavioralPattern) -> usize {
        self.priority.iter().position(|&c| c == p.class()).unwrap_or(self.priority.len())
    }

    /// Iterations after which the halving schedule has collapsed below `min_step`.
    pub fn convergence_bound(&self) -> usize {
        (2.0 * self.delta / self.min_step).log2().ceil() as usize + 2
    }
}
