//! Coverage-maximizing abstract scenario generation.
//!
//! [`GenerationState::next_scenario`] returns the feasible total assignment
//! that covers the most still-uncovered k-tuples. The exact strategy is a
//! depth-first branch-and-bound over categories in declaration order; a
//! subtree is cut when a constraint is already false or when the optimistic
//! gain bound cannot beat the incumbent. Because only strictly better
//! leaves replace the incumbent, the result is the lexicographically first
//! maximizer.

use serde::Serialize;

use crate::catalog::{AbstractScenario, Catalog, CatalogError, CoverageModel, CoverageRatio, Formula};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Strategy {
    /// Exact maximum-gain search.
    #[default]
    Exact,
    /// Seed with the first uncovered tuple, then fix remaining categories one
    /// at a time by best immediate gain. Not optimal; for catalogs too large
    /// for exact search.
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteLimit {
    Count(usize),
    FullCoverage,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emitted {
    pub scenario: AbstractScenario,
    pub gain: usize,
}

#[derive(Debug, Clone)]
pub struct GenerationState {
    catalog: Catalog,
    model: CoverageModel,
    emitted: Vec<Emitted>,
    exhausted: bool,
    strategy: Strategy,
}

impl GenerationState {
    pub fn new(catalog: &Catalog, k: usize) -> Result<Self, CatalogError> {
        Self::with_strategy(catalog, k, Strategy::Exact)
    }

    pub fn with_strategy(catalog: &Catalog, k: usize, strategy: Strategy) -> Result<Self, CatalogError> {
        let model = CoverageModel::new(catalog, k)?;
        let exhausted = model.is_complete();
        Ok(GenerationState {
            catalog: catalog.clone(),
            model,
            emitted: Vec::new(),
            exhausted,
            strategy,
        })
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn model(&self) -> &CoverageModel {
        &self.model
    }

    pub fn emitted(&self) -> &[Emitted] {
        &self.emitted
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn coverage(&self) -> CoverageRatio {
        self.model.ratio()
    }

    /// Marks a scenario covered without searching (e.g. seeding with an
    /// existing test). Returns the number of newly covered tuples.
    pub fn record(&mut self, scenario: AbstractScenario) -> usize {
        let gain = self.model.cover(&scenario.elements);
        self.emitted.push(Emitted { scenario, gain });
        self.exhausted = self.model.is_complete();
        gain
    }

    /// Next scenario with maximal gain, or `None` once every feasible tuple is covered.
    pub fn next_scenario(&mut self) -> Option<Emitted> {
        if self.exhausted || self.model.is_complete() {
            self.exhausted = true;
            return None;
        }
        let found = match self.strategy {
            Strategy::Exact => self.best_exact(),
            Strategy::Greedy => self.best_greedy(),
        };
        let Some((elements, gain)) = found.filter(|(_, g)| *g > 0) else {
            self.exhausted = true;
            return None;
        };
        let covered = self.model.cover(&elements);
        debug_assert_eq!(covered, gain);
        let e = Emitted {
            scenario: AbstractScenario::new(elements),
            gain,
        };
        self.emitted.push(e.clone());
        self.exhausted = self.model.is_complete();
        Some(e)
    }

    /// Forbids the exact assignment from ever being generated again and
    /// re-derives the feasible tuple set.
    pub fn add_blocking_constraint(&mut self, scenario: &AbstractScenario) {
        self.catalog.push_formula(Formula::blocking(&scenario.elements));
        self.model.refresh(&self.catalog);
        self.exhausted = self.model.is_complete();
    }

    fn best_exact(&self) -> Option<(Vec<usize>, usize)> {
        let sizes = self.catalog.sizes();
        let mut search = BranchAndBound {
            catalog: &self.catalog,
            model: &self.model,
            sizes: &sizes,
            max_possible: self.model.tables().len(),
            best: None,
        };
        let mut partial = vec![None; sizes.len()];
        search.descend(&mut partial, 0);
        search.best
    }

    fn best_greedy(&self) -> Option<(Vec<usize>, usize)> {
        let arity = self.catalog.categories().len();
        let sizes = self.catalog.sizes();
        let (table, idx) = self
            .model
            .tables()
            .iter()
            .find_map(|t| t.first_open().map(|i| (t, i)))?;
        let mut partial = table.tuple(idx).partial(arity);
        for c in 0..arity {
            if partial[c].is_some() {
                continue;
            }
            let mut best: Option<(usize, usize)> = None;
            for e in 0..sizes[c] {
                partial[c] = Some(e);
                if self.catalog.violates_locally(&partial) || !self.catalog.is_feasible(&partial) {
                    continue;
                }
                let settled = self
                    .model
                    .tables()
                    .iter()
                    .filter(|t| t.index_partial(&partial).is_some_and(|i| t.is_open(i)))
                    .count();
                if best.map_or(true, |(_, g)| settled > g) {
                    best = Some((e, settled));
                }
            }
            partial[c] = Some(best.expect("seed tuple is feasible, so some element extends it").0);
        }
        let elements: Vec<usize> = partial.into_iter().flatten().collect();
        let gain = self.model.gain(&elements);
        Some((elements, gain))
    }
}

struct BranchAndBound<'a> {
    catalog: &'a Catalog,
    model: &'a CoverageModel,
    sizes: &'a [usize],
    max_possible: usize,
    best: Option<(Vec<usize>, usize)>,
}

impl BranchAndBound<'_> {
    fn incumbent(&self) -> usize {
        self.best.as_ref().map_or(0, |(_, g)| *g)
    }

    /// Returns true once a provably optimal leaf has been found.
    fn descend(&mut self, partial: &mut [Option<usize>], depth: usize) -> bool {
        if self.catalog.violates_locally(partial) {
            return false;
        }
        if self.best.is_some() && self.model.gain_bound(partial) <= self.incumbent() {
            return false;
        }
        if depth == partial.len() {
            let elements: Vec<usize> = partial.iter().map(|e| e.expect("leaf is total")).collect();
            let gain = self.model.gain(&elements);
            if self.best.is_none() || gain > self.incumbent() {
                self.best = Some((elements, gain));
            }
            return self.incumbent() == self.max_possible;
        }
        for e in 0..self.sizes[depth] {
            partial[depth] = Some(e);
            if self.descend(partial, depth + 1) {
                partial[depth] = None;
                return true;
            }
        }
        partial[depth] = None;
        false
    }
}

/// Iterates [`GenerationState::next_scenario`] until the limit or full coverage.
pub fn generate_suite(catalog: &Catalog, k: usize, limit: SuiteLimit) -> Result<Vec<Emitted>, CatalogError> {
    generate_suite_with(catalog, k, limit, Strategy::Exact)
}

pub fn generate_suite_with(
    catalog: &Catalog,
    k: usize,
    limit: SuiteLimit,
    strategy: Strategy,
) -> Result<Vec<Emitted>, CatalogError> {
    let mut state = GenerationState::with_strategy(catalog, k, strategy)?;
    let cap = match limit {
        SuiteLimit::Count(n) => n,
        SuiteLimit::FullCoverage => usize::MAX,
    };
    let mut out = Vec::new();
    while out.len() < cap {
        match state.next_scenario() {
            Some(e) => out.push(e),
            None => break,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{coverage_ratio, parse_catalog};
    use crate::fixtures::EXAMPLE_CATALOG;

    fn example() -> Catalog {
        parse_catalog(EXAMPLE_CATALOG).unwrap()
    }

    #[test]
    fn second_scenario_fills_three_cells() {
        let c = example();
        let mut st = GenerationState::new(&c, 2).unwrap();
        st.record(c.scenario(&[("weather", "sunny"), ("road", "straight"), ("ego-action", "drive-straight")]).unwrap());
        let next = st.next_scenario().unwrap();
        assert_eq!(next.gain, 3);
        // the figure's pick is one of the maximizers
        let rainy_uturn = c.scenario(&[("weather", "rainy"), ("road", "T-shaped"), ("ego-action", "u-turn")]).unwrap();
        let mut probe = GenerationState::new(&c, 2).unwrap();
        probe.record(c.scenario(&[("weather", "sunny"), ("road", "straight"), ("ego-action", "drive-straight")]).unwrap());
        assert_eq!(probe.model().gain(&rainy_uturn.elements), 3);
    }

    #[test]
    fn fresh_state_first_gain_is_number_of_pairs() {
        let mut st = GenerationState::new(&example(), 2).unwrap();
        assert_eq!(st.next_scenario().unwrap().gain, 3);
    }

    #[test]
    fn completion_signal_after_full_coverage() {
        let c = example();
        let mut st = GenerationState::new(&c, 2).unwrap();
        while st.next_scenario().is_some() {}
        assert!(st.is_exhausted());
        assert_eq!(st.coverage(), CoverageRatio::new(20, 20));
        assert!(st.next_scenario().is_none());
    }

    #[test]
    fn suites_for_example_catalog() {
        let c = example();
        let full = generate_suite(&c, 2, SuiteLimit::FullCoverage).unwrap();
        assert_eq!(full.len(), 9);
        let one = generate_suite(&c, 2, SuiteLimit::Count(1)).unwrap();
        assert_eq!(one.len(), 1);
        let model = CoverageModel::new(&c, 2).unwrap();
        let scen: Vec<_> = one.iter().map(|e| e.scenario.clone()).collect();
        assert_eq!(coverage_ratio(&scen, &model), CoverageRatio::new(3, 20));
        let single = generate_suite(&c, 1, SuiteLimit::FullCoverage).unwrap();
        assert_eq!(single.len(), 3);
    }

    #[test]
    fn blocking_excludes_exact_triple() {
        let c = example();
        let rainy_uturn = c.scenario(&[("weather", "rainy"), ("road", "T-shaped"), ("ego-action", "u-turn")]).unwrap();
        let mut st = GenerationState::new(&c, 2).unwrap();
        st.add_blocking_constraint(&rainy_uturn);
        // every pair of the blocked triple still has other witnesses
        assert_eq!(st.model().feasible_count(), 20);
        while let Some(e) = st.next_scenario() {
            assert_ne!(e.scenario, rainy_uturn);
        }
        assert!(st.model().is_complete());
    }

    #[test]
    fn blocking_everything_signals_completion() {
        let c = example();
        let mut st = GenerationState::new(&c, 2).unwrap();
        for w in 0..3 {
            for r in 0..2 {
                for a in 0..3 {
                    if c.satisfies(&[w, r, a]) {
                        st.add_blocking_constraint(&AbstractScenario::new(vec![w, r, a]));
                    }
                }
            }
        }
        assert_eq!(st.model().feasible_count(), 0);
        assert!(st.next_scenario().is_none());
    }

    #[test]
    fn greedy_strategy_reaches_full_coverage() {
        let c = example();
        let suite = generate_suite_with(&c, 2, SuiteLimit::FullCoverage, Strategy::Greedy).unwrap();
        assert!(suite.iter().all(|e| e.gain > 0 && c.satisfies(&e.scenario.elements)));
        let model = CoverageModel::new(&c, 2).unwrap();
        let scen: Vec<_> = suite.iter().map(|e| e.scenario.clone()).collect();
        assert!(coverage_ratio(&scen, &model).is_complete());
    }
}
