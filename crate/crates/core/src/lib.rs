//! Coverage-driven scenario generation and testing for driving planners.
//!
//! The pipeline runs abstract scenario generation ([`covgen`]) over a
//! constrained catalog ([`catalog`]), instantiation on a lane-graph map
//! ([`mapsem`], [`concretize`]), simulation against an ego controller
//! ([`simcore`]), trace scoring ([`kpi`]) and local perturbation by agent
//! spawning ([`perturb`]). [`campaign`] ties the stages together.

pub mod campaign;
pub mod catalog;
pub mod concretize;
pub mod covgen;
pub mod fixtures;
pub mod geometry;
pub mod kpi;
pub mod mapsem;
pub mod perturb;
pub mod route;
pub mod seed;
pub mod simcore;

pub use catalog::{parse_catalog, AbstractScenario, Catalog, CatalogError, CoverageModel, CoverageRatio};
pub use covgen::{generate_suite, generate_suite_with, Emitted, GenerationState, Strategy, SuiteLimit};
pub use mapsem::{parse_map, MapError, MapGraph};
