//! Propositional constraint formulas over `category.element` atoms.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! formula     := implication
//! implication := disjunction ( "->" implication )?      right-associative
//! disjunction := conjunction ( "|" conjunction )*
//! conjunction := unary ( "&" unary )*
//! unary       := "!" unary | "(" formula ")" | atom
//! atom        := name "." name
//! name        := [A-Za-z0-9_] ( [A-Za-z0-9_] | "-" not followed by ">" )*
//! ```
//!
//! Whitespace is insignificant between tokens.

use std::collections::BTreeSet;
use std::fmt;

use super::{CatalogError, Category};

/// A resolved `category.element` reference, by declaration index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub category: usize,
    pub element: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    Atom(Atom),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
}

impl Formula {
    /// Evaluates against a total assignment (`assignment[c]` is the element of category `c`).
    pub fn eval(&self, assignment: &[usize]) -> bool {
        match self {
            Formula::Atom(a) => assignment[a.category] == a.element,
            Formula::Not(f) => !f.eval(assignment),
            Formula::And(l, r) => l.eval(assignment) && r.eval(assignment),
            Formula::Or(l, r) => l.eval(assignment) || r.eval(assignment),
            Formula::Implies(l, r) => !l.eval(assignment) || r.eval(assignment),
        }
    }

    /// Kleene three-valued evaluation over a partial assignment. `None` means the
    /// value depends on categories that are still unassigned.
    pub fn eval_partial(&self, assignment: &[Option<usize>]) -> Option<bool> {
        match self {
            Formula::Atom(a) => assignment[a.category].map(|e| e == a.element),
            Formula::Not(f) => f.eval_partial(assignment).map(|v| !v),
            Formula::And(l, r) => match (l.eval_partial(assignment), r.eval_partial(assignment)) {
                (Some(false), _) | (_, Some(false)) => Some(false),
                (Some(true), Some(true)) => Some(true),
                _ => None,
            },
            Formula::Or(l, r) => match (l.eval_partial(assignment), r.eval_partial(assignment)) {
                (Some(true), _) | (_, Some(true)) => Some(true),
                (Some(false), Some(false)) => Some(false),
                _ => None,
            },
            Formula::Implies(l, r) => match (l.eval_partial(assignment), r.eval_partial(assignment)) {
                (Some(false), _) | (_, Some(true)) => Some(true),
                (Some(true), Some(false)) => Some(false),
                _ => None,
            },
        }
    }

    /// Category indices mentioned anywhere in the formula.
    pub fn categories(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_categories(&mut out);
        out
    }

    fn collect_categories(&self, out: &mut BTreeSet<usize>) {
        match self {
            Formula::Atom(a) => {
                out.insert(a.category);
            }
            Formula::Not(f) => f.collect_categories(out),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) => {
                l.collect_categories(out);
                r.collect_categories(out);
            }
        }
    }

    /// `!(a & b & ...)` over the given total assignment.
    pub fn blocking(assignment: &[usize]) -> Formula {
        let mut atoms = assignment.iter().enumerate().map(|(category, &element)| {
            Formula::Atom(Atom { category, element })
        });
        let first = atoms.next().expect("blocking an empty assignment");
        let conj = atoms.fold(first, |acc, a| Formula::And(Box::new(acc), Box::new(a)));
        Formula::Not(Box::new(conj))
    }

    /// Renders the formula back into the constraint grammar using catalog names.
    pub fn display<'a>(&'a self, categories: &'a [Category]) -> impl fmt::Display + 'a {
        FormulaDisplay { formula: self, categories }
    }
}

struct FormulaDisplay<'a> {
    formula: &'a Formula,
    categories: &'a [Category],
}

impl fmt::Display for FormulaDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(x: &Formula, cats: &[Category], f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match x {
                Formula::Atom(a) => {
                    let c = &cats[a.category];
                    write!(f, "{}.{}", c.name, c.elements[a.element])
                }
                Formula::Not(inner) => {
                    write!(f, "!")?;
                    match **inner {
                        Formula::Atom(_) | Formula::Not(_) => go(inner, cats, f),
                        _ => {
                            write!(f, "(")?;
                            go(inner, cats, f)?;
                            write!(f, ")")
                        }
                    }
                }
                Formula::And(l, r) => binary(l, "&", r, cats, f),
                Formula::Or(l, r) => binary(l, "|", r, cats, f),
                Formula::Implies(l, r) => binary(l, "->", r, cats, f),
            }
        }
        fn binary(
            l: &Formula,
            op: &str,
            r: &Formula,
            cats: &[Category],
            f: &mut fmt::Formatter<'_>,
        ) -> fmt::Result {
            write!(f, "(")?;
            go(l, cats, f)?;
            write!(f, " {op} ")?;
            go(r, cats, f)?;
            write!(f, ")")
        }
        go(self.formula, self.categories, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Name(String),
    Dot,
    Not,
    And,
    Or,
    Arrow,
    LParen,
    RParen,
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn tokenize(src: &str) -> Result<Vec<(Token, usize)>, (usize, String)> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            c if c.is_whitespace() => i += 1,
            '.' => {
                out.push((Token::Dot, col));
                i += 1;
            }
            '!' => {
                out.push((Token::Not, col));
                i += 1;
            }
            '&' => {
                out.push((Token::And, col));
                i += 1;
            }
            '|' => {
                out.push((Token::Or, col));
                i += 1;
            }
            '(' => {
                out.push((Token::LParen, col));
                i += 1;
            }
            ')' => {
                out.push((Token::RParen, col));
                i += 1;
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                out.push((Token::Arrow, col));
                i += 2;
            }
            c if is_name_char(c) => {
                let start = i;
                while i < chars.len() {
                    let d = chars[i];
                    if is_name_char(d) || (d == '-' && chars.get(i + 1) != Some(&'>')) {
                        i += 1;
                    } else {
                        break;
                    }
                }
                out.push((Token::Name(chars[start..i].iter().collect()), col));
            }
            other => return Err((col, format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    end_col: usize,
    categories: &'a [Category],
    index: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.tokens.get(self.pos).map(|(_, c)| *c).unwrap_or(self.end_col)
    }

    fn syntax(&self, message: impl Into<String>) -> CatalogError {
        CatalogError::ConstraintSyntax {
            index: self.index,
            column: self.col(),
            message: message.into(),
        }
    }

    fn implication(&mut self) -> Result<Formula, CatalogError> {
        let lhs = self.disjunction()?;
        if self.peek() == Some(&Token::Arrow) {
            self.pos += 1;
            let rhs = self.implication()?;
            return Ok(Formula::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula, CatalogError> {
        let mut lhs = self.conjunction()?;
        while self.peek() == Some(&Token::Or) {
            self.pos += 1;
            let rhs = self.conjunction()?;
            lhs = Formula::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula, CatalogError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Token::And) {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Formula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, CatalogError> {
        match self.peek().cloned() {
            Some(Token::Not) => {
                self.pos += 1;
                Ok(Formula::Not(Box::new(self.unary()?)))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.implication()?;
                if self.peek() != Some(&Token::RParen) {
                    return Err(self.syntax("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(Token::Name(cat)) => {
                self.pos += 1;
                if self.peek() != Some(&Token::Dot) {
                    return Err(self.syntax("expected `.` after category name"));
                }
                self.pos += 1;
                let Some(Token::Name(elem)) = self.peek().cloned() else {
                    return Err(self.syntax("expected element name"));
                };
                self.pos += 1;
                self.resolve(&cat, &elem)
            }
            Some(_) => Err(self.syntax("expected atom, `!` or `(`")),
            None => Err(self.syntax("unexpected end of constraint")),
        }
    }

    fn resolve(&self, cat: &str, elem: &str) -> Result<Formula, CatalogError> {
        let category = self
            .categories
            .iter()
            .position(|c| c.name == cat)
            .ok_or_else(|| CatalogError::UnknownCategory(cat.to_string()))?;
        let element = self.categories[category]
            .elements
            .iter()
            .position(|e| e == elem)
            .ok_or_else(|| CatalogError::UnknownElement {
                category: cat.to_string(),
                element: elem.to_string(),
            })?;
        Ok(Formula::Atom(Atom { category, element }))
    }
}

/// Parses constraint number `index` (used only for error reporting).
pub fn parse_formula(src: &str, categories: &[Category], index: usize) -> Result<Formula, CatalogError> {
    let tokens = tokenize(src).map_err(|(column, message)| CatalogError::ConstraintSyntax {
        index,
        column,
        message,
    })?;
    let mut p = Parser {
        tokens,
        pos: 0,
        end_col: src.chars().count() + 1,
        categories,
        index,
    };
    let f = p.implication()?;
    if p.pos != p.tokens.len() {
        return Err(p.syntax("trailing input"));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cats() -> Vec<Category> {
        vec![
            Category::new("road", ["straight", "T-shaped"]),
            Category::new("ego-action", ["drive-straight", "left-turn", "u-turn"]),
        ]
    }

    #[test]
    fn dashes_inside_names_are_not_arrows() {
        let f = parse_formula("road.straight -> !ego-action.left-turn", &cats(), 0).unwrap();
        assert_eq!(
            f,
            Formula::Implies(
                Box::new(Formula::Atom(Atom { category: 0, element: 0 })),
                Box::new(Formula::Not(Box::new(Formula::Atom(Atom { category: 1, element: 1 })))),
            )
        );
        // no whitespace around the arrow
        let g = parse_formula("road.T-shaped->ego-action.u-turn", &cats(), 0).unwrap();
        assert!(matches!(g, Formula::Implies(..)));
    }

    #[test]
    fn precedence_and_associativity() {
        let c = cats();
        // a | b & c parses as a | (b & c)
        let f = parse_formula("road.straight | road.T-shaped & ego-action.u-turn", &c, 0).unwrap();
        assert!(matches!(f, Formula::Or(_, ref r) if matches!(**r, Formula::And(..))));
        // implication is right-associative
        let g = parse_formula("road.straight -> road.T-shaped -> ego-action.u-turn", &c, 0).unwrap();
        assert!(matches!(g, Formula::Implies(_, ref r) if matches!(**r, Formula::Implies(..))));
    }

    #[test]
    fn syntax_errors_carry_columns() {
        let err = parse_formula("road.straight &", &cats(), 3).unwrap_err();
        match err {
            CatalogError::ConstraintSyntax { index, column, .. } => {
                assert_eq!(index, 3);
                assert_eq!(column, 16);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_formula("road straight", &cats(), 0),
            Err(CatalogError::ConstraintSyntax { column: 6, .. })
        ));
        assert!(matches!(
            parse_formula("road.straight # x", &cats(), 0),
            Err(CatalogError::ConstraintSyntax { column: 15, .. })
        ));
    }

    #[test]
    fn partial_evaluation_is_kleene() {
        let f = parse_formula("road.straight -> !ego-action.left-turn", &cats(), 0).unwrap();
        assert_eq!(f.eval_partial(&[None, None]), None);
        assert_eq!(f.eval_partial(&[Some(1), None]), Some(true));
        assert_eq!(f.eval_partial(&[None, Some(0)]), Some(true));
        assert_eq!(f.eval_partial(&[Some(0), Some(1)]), Some(false));
        assert!(!f.eval(&[0, 1]));
        assert!(f.eval(&[0, 2]));
    }

    #[test]
    fn display_round_trips() {
        let c = cats();
        for src in [
            "road.straight -> !ego-action.left-turn",
            "!(road.T-shaped & ego-action.u-turn) | road.straight",
            "!!road.straight",
        ] {
            let f = parse_formula(src, &c, 0).unwrap();
            let printed = f.display(&c).to_string();
            assert_eq!(parse_formula(&printed, &c, 0).unwrap(), f, "{printed}");
        }
    }
}
