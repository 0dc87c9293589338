//! Shared inputs for the criterion benchmarks in `benches/`.

use covdrive_core::concretize::{instantiate, ConcreteScenario, ParameterMap};
use covdrive_core::fixtures;
use covdrive_core::{generate_suite, parse_catalog, Catalog, MapGraph, SuiteLimit};

/// Town catalog, map and parameters plus a few instantiated scenarios.
pub struct Town {
    pub catalog: Catalog,
    pub map: MapGraph,
    pub params: ParameterMap,
    pub scenarios: Vec<ConcreteScenario>,
}

impl Town {
    /// Instantiates the first `n` scenarios of the pairwise suite with seed 0.
    pub fn load(n: usize) -> Self {
        let catalog = parse_catalog(fixtures::TOWN_CATALOG).expect("bundled catalog parses");
        let map = MapGraph::from_file(fixtures::town()).expect("bundled map is valid");
        let params = ParameterMap::parse(fixtures::TOWN_PARAMS).expect("bundled params parse");
        let suite = generate_suite(&catalog, 2, SuiteLimit::Count(n)).expect("suite generates");
        let scenarios = suite
            .iter()
            .filter_map(|e| instantiate(&e.scenario, &catalog, &map, &params, 0).ok())
            .collect();
        Town { catalog, map, params, scenarios }
    }
}
