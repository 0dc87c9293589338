//! k-way coverage bookkeeping.
//!
//! One [`TupleTable`] per size-k category subset (lexicographic subset order).
//! Cells are indexed mixed-radix over the subset's element counts, so a total
//! assignment projects onto exactly one cell per table.

use std::fmt;

use serde::Serialize;

use super::{AbstractScenario, Catalog, CatalogError};

/// A k-tuple: category indices (ascending) and one element per category.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Tuple {
    pub categories: Vec<usize>,
    pub elements: Vec<usize>,
}

impl Tuple {
    pub fn partial(&self, arity: usize) -> Vec<Option<usize>> {
        let mut p = vec![None; arity];
        for (&c, &e) in self.categories.iter().zip(&self.elements) {
            p[c] = Some(e);
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TupleTable {
    categories: Vec<usize>,
    radices: Vec<usize>,
    feasible: Vec<bool>,
    covered: Vec<bool>,
}

impl TupleTable {
    fn new(catalog: &Catalog, categories: Vec<usize>) -> Self {
        let radices: Vec<usize> = categories.iter().map(|&c| catalog.categories[c].elements.len()).collect();
        let cells = radices.iter().product();
        let mut table = TupleTable {
            categories,
            radices,
            feasible: vec![false; cells],
            covered: vec![false; cells],
        };
        table.refresh(catalog);
        table
    }

    fn refresh(&mut self, catalog: &Catalog) {
        let arity = catalog.categories.len();
        for idx in 0..self.feasible.len() {
            let tuple = self.tuple(idx);
            let p = tuple.partial(arity);
            let ok = !catalog.violates_locally(&p) && catalog.is_feasible(&p);
            self.feasible[idx] = ok;
            if !ok {
                self.covered[idx] = false;
            }
        }
    }

    pub fn categories(&self) -> &[usize] {
        &self.categories
    }

    pub fn cells(&self) -> usize {
        self.feasible.len()
    }

    pub fn feasible_count(&self) -> usize {
        self.feasible.iter().filter(|&&f| f).count()
    }

    pub fn covered_count(&self) -> usize {
        self.covered.iter().filter(|&&c| c).count()
    }

    pub fn uncovered_count(&self) -> usize {
        self.feasible_count() - self.covered_count()
    }

    fn elements_of(&self, idx: usize) -> Vec<usize> {
        let mut rest = idx;
        let mut out = vec![0; self.radices.len()];
        for i in (0..self.radices.len()).rev() {
            out[i] = rest % self.radices[i];
            rest /= self.radices[i];
        }
        out
    }

    pub fn tuple(&self, idx: usize) -> Tuple {
        Tuple {
            categories: self.categories.clone(),
            elements: self.elements_of(idx),
        }
    }

    pub(crate) fn index(&self, assignment: &[usize]) -> usize {
        self.categories
            .iter()
            .zip(&self.radices)
            .fold(0, |acc, (&c, &r)| acc * r + assignment[c])
    }

    fn index_of_tuple(&self, elements: &[usize]) -> usize {
        elements.iter().zip(&self.radices).fold(0, |acc, (&e, &r)| acc * r + e)
    }

    pub(crate) fn is_open(&self, idx: usize) -> bool {
        self.feasible[idx] && !self.covered[idx]
    }

    pub(crate) fn index_partial(&self, partial: &[Option<usize>]) -> Option<usize> {
        let mut acc = 0;
        for (&c, &r) in self.categories.iter().zip(&self.radices) {
            acc = acc * r + partial[c]?;
        }
        Some(acc)
    }

    /// Whether some uncovered feasible cell agrees with the assigned part of `partial`.
    pub(crate) fn has_open_consistent(&self, partial: &[Option<usize>]) -> bool {
        (0..self.feasible.len()).any(|idx| {
            self.is_open(idx)
                && self
                    .elements_of(idx)
                    .iter()
                    .zip(&self.categories)
                    .all(|(&e, &c)| partial[c].map_or(true, |p| p == e))
        })
    }

    pub(crate) fn first_open(&self) -> Option<usize> {
        (0..self.feasible.len()).find(|&idx| self.is_open(idx))
    }
}

/// Covered / feasible, kept as an exact ratio.
#[derive(Debug, Clone, Copy, Eq, Serialize)]
pub struct CoverageRatio {
    pub covered: usize,
    pub feasible: usize,
}

impl CoverageRatio {
    pub fn new(covered: usize, feasible: usize) -> Self {
        CoverageRatio { covered, feasible }
    }

    /// An empty feasible set counts as fully covered.
    pub fn as_f64(&self) -> f64 {
        if self.feasible == 0 {
            1.0
        } else {
            self.covered as f64 / self.feasible as f64
        }
    }

    pub fn is_complete(&self) -> bool {
        self.covered == self.feasible
    }
}

impl PartialEq for CoverageRatio {
    fn eq(&self, other: &Self) -> bool {
        match (self.feasible, other.feasible) {
            (0, 0) => true,
            (0, _) | (_, 0) => self.as_f64() == other.as_f64(),
            _ => self.covered * other.feasible == other.covered * self.feasible,
        }
    }
}

impl fmt::Display for CoverageRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.covered, self.feasible)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageModel {
    k: usize,
    tables: Vec<TupleTable>,
}

impl CoverageModel {
    pub fn new(catalog: &Catalog, k: usize) -> Result<Self, CatalogError> {
        let n = catalog.categories.len();
        if k == 0 || k > n {
            return Err(CatalogError::StrengthOutOfRange { k, max: n });
        }
        let mut tables = Vec::new();
        let mut subset: Vec<usize> = (0..k).collect();
        loop {
            tables.push(TupleTable::new(catalog, subset.clone()));
            // next k-subset in lexicographic order
            let mut i = k;
            while i > 0 && subset[i - 1] == n - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            subset[i - 1] += 1;
            for j in i..k {
                subset[j] = subset[j - 1] + 1;
            }
        }
        Ok(CoverageModel { k, tables })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tables(&self) -> &[TupleTable] {
        &self.tables
    }

    pub fn feasible_count(&self) -> usize {
        self.tables.iter().map(TupleTable::feasible_count).sum()
    }

    pub fn covered_count(&self) -> usize {
        self.tables.iter().map(TupleTable::covered_count).sum()
    }

    pub fn ratio(&self) -> CoverageRatio {
        CoverageRatio::new(self.covered_count(), self.feasible_count())
    }

    pub fn is_complete(&self) -> bool {
        self.tables.iter().all(|t| t.uncovered_count() == 0)
    }

    pub fn feasible_tuples(&self) -> impl Iterator<Item = Tuple> + '_ {
        self.tables.iter().flat_map(|t| {
            (0..t.cells()).filter(move |&i| t.feasible[i]).map(move |i| t.tuple(i))
        })
    }

    pub fn covered_tuples(&self) -> impl Iterator<Item = Tuple> + '_ {
        self.tables.iter().flat_map(|t| {
            (0..t.cells()).filter(move |&i| t.covered[i]).map(move |i| t.tuple(i))
        })
    }

    fn table_for(&self, tuple: &Tuple) -> Option<&TupleTable> {
        self.tables.iter().find(|t| t.categories == tuple.categories)
    }

    pub fn is_feasible_tuple(&self, tuple: &Tuple) -> bool {
        self.table_for(tuple)
            .map_or(false, |t| t.feasible[t.index_of_tuple(&tuple.elements)])
    }

    pub fn is_covered_tuple(&self, tuple: &Tuple) -> bool {
        self.table_for(tuple)
            .map_or(false, |t| t.covered[t.index_of_tuple(&tuple.elements)])
    }

    /// Number of uncovered feasible tuples a total assignment would cover.
    pub fn gain(&self, assignment: &[usize]) -> usize {
        self.tables.iter().filter(|t| t.is_open(t.index(assignment))).count()
    }

    /// Marks the assignment's projections covered; returns how many were new.
    pub fn cover(&mut self, assignment: &[usize]) -> usize {
        let mut fresh = 0;
        for t in &mut self.tables {
            let idx = t.index(assignment);
            if t.is_open(idx) {
                t.covered[idx] = true;
                fresh += 1;
            }
        }
        fresh
    }

    /// Re-derives feasibility after the catalog's constraints changed.
    /// Covered cells that became infeasible are dropped.
    pub fn refresh(&mut self, catalog: &Catalog) {
        for t in &mut self.tables {
            t.refresh(catalog);
        }
    }

    /// Upper bound on the gain of any completion of `partial`.
    pub(crate) fn gain_bound(&self, partial: &[Option<usize>]) -> usize {
        self.tables
            .iter()
            .filter(|t| match t.index_partial(partial) {
                Some(idx) => t.is_open(idx),
                None => t.has_open_consistent(partial),
            })
            .count()
    }
}

/// Fraction of the model's feasible tuples covered by `scenarios` (the
/// model's own covered set is ignored). Duplicates count once.
pub fn coverage_ratio(scenarios: &[AbstractScenario], model: &CoverageModel) -> CoverageRatio {
    let mut hit: Vec<Vec<bool>> = model.tables.iter().map(|t| vec![false; t.cells()]).collect();
    for s in scenarios {
        for (t, seen) in model.tables.iter().zip(&mut hit) {
            let idx = t.index(&s.elements);
            if t.feasible[idx] {
                seen[idx] = true;
            }
        }
    }
    let covered = hit.iter().flatten().filter(|&&h| h).count();
    CoverageRatio::new(covered, model.feasible_count())
}
