use serde::{Deserialize, Serialize};

use crate::calculus::differentiate;
use crate::expr::{depth, Expr};

/// A differentiation task `d/dx[expr]` with its cached difficulty and
/// reference solution.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Problem {
    pub id: String,
    pub expr: Expr,
    pub depth: usize,
    pub level: usize,
    pub solution: Expr,
}

impl Problem {
    /// `expr` must already be canonical.
    pub fn new(id: impl Into<String>, expr: Expr) -> Problem {
        let depth = depth(&expr);
        let solution = differentiate(&expr);
        Problem { id: id.into(), expr, depth, level: level_of(depth), solution }
    }
}

/// Difficulty level for a nesting depth: depth clamped below at 1.
pub fn level_of(depth: usize) -> usize {
    depth.max(1)
}

/// Calculus rule that relates a parent problem to a child.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Chain,
    Product,
    Sum,
}

impl Rule {
    pub const ALL: [Rule; 3] = [Rule::Chain, Rule::Product, Rule::Sum];

    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Chain => "chain",
            Rule::Product => "product",
            Rule::Sum => "sum",
        }
    }
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rule::ALL.into_iter().find(|r| r.as_str() == s).ok_or_else(|| format!("unknown rule `{s}`"))
    }
}
