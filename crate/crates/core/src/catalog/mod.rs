//! Scenario meta-model: discrete categories, their elements, and propositional
//! feasibility constraints.
//!
//! A catalog file is JSON:
//!
//! ```json
//! {
//!   "categories": [
//!     { "name": "weather", "elements": ["sunny", "rainy", "cloudy"] },
//!     { "name": "road", "elements": ["straight", "T-shaped"] }
//!   ],
//!   "constraints": ["road.straight -> !ego-action.left-turn"]
//! }
//! ```
//!
//! See [`formula`] for the constraint grammar. Feasibility of partial
//! assignments is decided by exhaustive extension search with three-valued
//! pruning, which is exact and fast at catalog scale (tens of categories,
//! a handful of elements each).

mod coverage;
pub mod formula;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coverage::{coverage_ratio, CoverageModel, CoverageRatio, Tuple, TupleTable};
pub use formula::{Atom, Formula};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CatalogError {
    #[error("catalog syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("constraint #{index}: syntax error at column {column}: {message}")]
    ConstraintSyntax { index: usize, column: usize, message: String },
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("unknown element `{category}.{element}`")]
    UnknownElement { category: String, element: String },
    #[error("category `{0}` needs at least 2 elements")]
    TooFewElements(String),
    #[error("duplicate category `{0}`")]
    DuplicateCategory(String),
    #[error("duplicate element `{category}.{element}`")]
    DuplicateElement { category: String, element: String },
    #[error("assignment has {got} entries, catalog has {expected} categories")]
    ArityMismatch { expected: usize, got: usize },
    #[error("strength k={k} outside 1..={max}")]
    StrengthOutOfRange { k: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    pub elements: Vec<String>,
}

impl Category {
    pub fn new<S: Into<String>>(name: &str, elements: impl IntoIterator<Item = S>) -> Self {
        Category {
            name: name.to_string(),
            elements: elements.into_iter().map(Into::into).collect(),
        }
    }

    pub fn element_index(&self, name: &str) -> Option<usize> {
        self.elements.iter().position(|e| e == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    /// Text as written in the catalog file (or generated for blocking constraints).
    pub source: String,
    pub formula: Formula,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    categories: Vec<Category>,
    #[serde(default)]
    constraints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    categories: Vec<Category>,
    constraints: Vec<Constraint>,
}

/// One element per category, by declaration index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AbstractScenario {
    pub elements: Vec<usize>,
}

impl AbstractScenario {
    pub fn new(elements: Vec<usize>) -> Self {
        AbstractScenario { elements }
    }

    pub fn element<'a>(&self, catalog: &'a Catalog, category: &str) -> Option<&'a str> {
        let c = catalog.category_index(category)?;
        Some(catalog.categories[c].elements[self.elements[c]].as_str())
    }

    /// `category -> element` by name.
    pub fn named(&self, catalog: &Catalog) -> BTreeMap<String, String> {
        catalog
            .categories
            .iter()
            .zip(&self.elements)
            .map(|(c, &e)| (c.name.clone(), c.elements[e].clone()))
            .collect()
    }

    /// Inverse of [`AbstractScenario::named`].
    pub fn from_named(catalog: &Catalog, named: &BTreeMap<String, String>) -> Result<Self, CatalogError> {
        for name in named.keys() {
            if catalog.category_index(name).is_none() {
                return Err(CatalogError::UnknownCategory(name.clone()));
            }
        }
        let mut elements = Vec::with_capacity(catalog.categories.len());
        for c in &catalog.categories {
            let e = named.get(&c.name).ok_or_else(|| CatalogError::ArityMismatch {
                expected: catalog.categories.len(),
                got: named.len(),
            })?;
            let idx = c.element_index(e).ok_or_else(|| CatalogError::UnknownElement {
                category: c.name.clone(),
                element: e.clone(),
            })?;
            elements.push(idx);
        }
        Ok(AbstractScenario { elements })
    }

    /// `⟨weather.sunny, road.straight, ...⟩` in declaration order.
    pub fn describe(&self, catalog: &Catalog) -> String {
        let parts: Vec<String> = catalog
            .categories
            .iter()
            .zip(&self.elements)
            .map(|(c, &e)| format!("{}.{}", c.name, c.elements[e]))
            .collect();
        format!("<{}>", parts.join(", "))
    }
}

fn json_error(err: serde_json::Error) -> CatalogError {
    CatalogError::Syntax {
        line: err.line(),
        column: err.column(),
        message: err.to_string(),
    }
}

/// Parses catalog file contents.
pub fn parse_catalog(text: &str) -> Result<Catalog, CatalogError> {
    let file: CatalogFile = serde_json::from_str(text).map_err(json_error)?;
    let mut catalog = Catalog::new(file.categories)?;
    for src in file.constraints {
        catalog.add_constraint(&src)?;
    }
    Ok(catalog)
}

impl Catalog {
    pub fn new(categories: Vec<Category>) -> Result<Self, CatalogError> {
        let mut names = BTreeSet::new();
        for c in &categories {
            if !names.insert(c.name.as_str()) {
                return Err(CatalogError::DuplicateCategory(c.name.clone()));
            }
            if c.elements.len() < 2 {
                return Err(CatalogError::TooFewElements(c.name.clone()));
            }
            let mut seen = BTreeSet::new();
            for e in &c.elements {
                if !seen.insert(e.as_str()) {
                    return Err(CatalogError::DuplicateElement {
                        category: c.name.clone(),
                        element: e.clone(),
                    });
                }
            }
        }
        Ok(Catalog {
            categories,
            constraints: Vec::new(),
        })
    }

    /// Parses and appends one constraint.
    pub fn add_constraint(&mut self, source: &str) -> Result<(), CatalogError> {
        let formula = formula::parse_formula(source, &self.categories, self.constraints.len())?;
        self.constraints.push(Constraint {
            source: source.to_string(),
            formula,
        });
        Ok(())
    }

    pub fn push_formula(&mut self, formula: Formula) {
        let source = formula.display(&self.categories).to_string();
        self.constraints.push(Constraint { source, formula });
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn category_index(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|c| c.name == name)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.categories.iter().map(|c| c.elements.len()).collect()
    }

    /// Number of total assignments, ignoring constraints (saturating).
    pub fn assignment_space(&self) -> u128 {
        self.categories
            .iter()
            .fold(1u128, |acc, c| acc.saturating_mul(c.elements.len() as u128))
    }

    /// Builds a partial assignment from `(category, element)` names.
    pub fn partial(&self, pairs: &[(&str, &str)]) -> Result<Vec<Option<usize>>, CatalogError> {
        let mut out = vec![None; self.categories.len()];
        for (cat, elem) in pairs {
            let c = self
                .category_index(cat)
                .ok_or_else(|| CatalogError::UnknownCategory(cat.to_string()))?;
            let e = self.categories[c].element_index(elem).ok_or_else(|| CatalogError::UnknownElement {
                category: cat.to_string(),
                element: elem.to_string(),
            })?;
            out[c] = Some(e);
        }
        Ok(out)
    }

    /// Builds a total assignment from names, in any order.
    pub fn scenario(&self, pairs: &[(&str, &str)]) -> Result<AbstractScenario, CatalogError> {
        let partial = self.partial(pairs)?;
        if partial.iter().any(Option::is_none) {
            return Err(CatalogError::ArityMismatch {
                expected: self.categories.len(),
                got: pairs.len(),
            });
        }
        Ok(AbstractScenario::new(partial.into_iter().flatten().collect()))
    }

    /// True iff every constraint holds on the total assignment.
    pub fn satisfies(&self, assignment: &[usize]) -> bool {
        self.constraints.iter().all(|c| c.formula.eval(assignment))
    }

    /// For a total assignment: all constraints hold. For a partial one: some
    /// constraint-satisfying total extension exists.
    pub fn is_feasible(&self, assignment: &[Option<usize>]) -> bool {
        self.witness(assignment).is_some()
    }

    /// First (lexicographic in declaration order) feasible total extension.
    pub fn witness(&self, assignment: &[Option<usize>]) -> Option<Vec<usize>> {
        assert_eq!(assignment.len(), self.categories.len(), "assignment arity");
        let sizes = self.sizes();
        let mut work = assignment.to_vec();
        if extend(&sizes, &self.constraints, &mut work) {
            Some(work.into_iter().map(|e| e.expect("extension is total")).collect())
        } else {
            None
        }
    }

    /// Projection-only fast path: some constraint that mentions only assigned
    /// categories already evaluates to false.
    pub fn violates_locally(&self, assignment: &[Option<usize>]) -> bool {
        self.constraints
            .iter()
            .any(|c| c.formula.eval_partial(assignment) == Some(false))
    }

    /// All feasible k-tuples, grouped per category subset.
    pub fn enumerate_feasible_tuples(&self, k: usize) -> Result<BTreeSet<Tuple>, CatalogError> {
        let model = CoverageModel::new(self, k)?;
        Ok(model.feasible_tuples().collect())
    }
}

/// Depth-first extension search. Categories are filled in declaration order,
/// elements in declaration order; any constraint that already evaluates false
/// prunes the subtree.
fn extend(sizes: &[usize], constraints: &[Constraint], work: &mut [Option<usize>]) -> bool {
    if constraints.iter().any(|c| c.formula.eval_partial(work) == Some(false)) {
        return false;
    }
    let Some(next) = work.iter().position(Option::is_none) else {
        return true;
    };
    for e in 0..sizes[next] {
        work[next] = Some(e);
        if extend(sizes, constraints, work) {
            return true;
        }
    }
    work[next] = None;
    false
}
