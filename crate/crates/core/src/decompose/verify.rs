//! The three decomposition checks: easier (V1), helpful (V2), related (V3).
//!
//! All checks accept arbitrary parent/child pairs, so externally proposed
//! decompositions can be scored the same way as rule-generated ones.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculus::differentiate;
use crate::expr::{
    contains, default_points, depth, equivalent, eval_at, factor_split, node_count, terms,
    EquivalenceConfig, Expr, Outcome,
};
use crate::problem::Rule;

/// Upper bound on the number of derivative terms searched for a grouped match.
pub const MAX_GROUP_TERMS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("equivalence check was inconclusive: too few admissible sample points")]
    Inconclusive,
}

/// How the child's derivative was located inside the parent's derivative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HelpfulEvidence {
    /// σ(c) is equivalent to additive term `term` of σ(p).
    Term { term: usize },
    /// The non-constant factors of σ(c) match `factors` of term `term`,
    /// up to a rational coefficient.
    Factors { term: usize, factors: Vec<usize> },
    /// The listed terms of σ(p) sum to `cofactor * σ(c)`, where the cofactor
    /// is what remains of the parent once the child's operands are removed.
    /// This is how a flattened product or sum carries its child's derivative.
    Group { terms: Vec<usize>, cofactor: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationDetails {
    pub parent_depth: usize,
    pub child_depth: usize,
    pub parent_nodes: usize,
    pub child_nodes: usize,
    pub evidence: Option<HelpfulEvidence>,
    /// Set when V2 could not be decided because of domain restrictions.
    pub inconclusive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub v1: bool,
    pub v2: bool,
    pub v3: Option<Rule>,
    pub overall: bool,
    pub details: VerificationDetails,
}

/// V1. Chain edges need a strictly smaller depth; product and sum edges
/// accept equal depth but need strictly fewer nodes.
pub fn verify_easier(parent: &Expr, child: &Expr, rule: Rule) -> bool {
    let (dp, dc) = (depth(parent), depth(child));
    match rule {
        Rule::Chain => dc < dp,
        Rule::Product | Rule::Sum => dc <= dp && node_count(child) < node_count(parent),
    }
}

/// V3. Matches the pair against the chain, product and sum templates.
pub fn verify_related(parent: &Expr, child: &Expr) -> Option<Rule> {
    if !(contains(parent, child) || operand_complement(parent, child).is_some()) {
        return None;
    }
    if chain_inner(parent) == Some(child) {
        return Some(Rule::Chain);
    }
    match operand_complement(parent, child) {
        Some((Rule::Product, _)) => Some(Rule::Product),
        Some((Rule::Sum, _)) => Some(Rule::Sum),
        _ => None,
    }
}

/// The inner function of `f(g)` or `g^n`, looking through a constant
/// coefficient (`k*f(g)`).
pub(crate) fn chain_inner(e: &Expr) -> Option<&Expr> {
    match e {
        Expr::Apply(_, g) | Expr::Pow(g, _) => Some(g),
        Expr::Product(ops) if ops.len() == 2 && ops[0].is_const() => match &ops[1] {
            Expr::Apply(_, g) | Expr::Pow(g, _) => Some(g),
            _ => None,
        },
        _ => None,
    }
}

/// When `child`'s operands form a proper sub-multiset of `parent`'s product
/// (or sum) operands, returns the rule and the remaining operands.
fn operand_complement(parent: &Expr, child: &Expr) -> Option<(Rule, Vec<Expr>)> {
    let (rule, parent_ops, child_ops) = match parent {
        Expr::Product(ops) => (Rule::Product, ops, child.product_operands()),
        Expr::Sum(ops) => (Rule::Sum, ops, child.sum_operands()),
        _ => return None,
    };
    if child_ops.is_empty() || child_ops.len() >= parent_ops.len() {
        return None;
    }
    let mut remaining: Vec<Option<&Expr>> = parent_ops.iter().map(Some).collect();
    for op in child_ops {
        let slot = remaining.iter_mut().find(|r| r.is_some_and(|e| e == op))?;
        *slot = None;
    }
    Some((rule, remaining.into_iter().flatten().cloned().collect()))
}

/// V2. True when σ(child) appears in σ(parent) as a term, as a group of
/// factors of one term (up to a rational coefficient), or as a grouped
/// sub-sum multiplied by the child's cofactor.
pub fn verify_helpful(parent: &Expr, child: &Expr) -> Result<bool, VerifyError> {
    helpful_evidence(parent, child).map(|e| e.is_some())
}

pub fn helpful_evidence(
    parent: &Expr,
    child: &Expr,
) -> Result<Option<HelpfulEvidence>, VerifyError> {
    if !child.depends_on_x() {
        return Ok(None);
    }
    let dp = differentiate(parent);
    let dc = differentiate(child);
    if dc == Expr::zero() {
        return Ok(None);
    }
    let parent_terms = terms(&dp);
    let mut inconclusive = false;

    for (i, t) in parent_terms.iter().enumerate() {
        match equivalent(t, &dc).outcome {
            Outcome::Equivalent => return Ok(Some(HelpfulEvidence::Term { term: i })),
            Outcome::InsufficientDomain => inconclusive = true,
            Outcome::Distinct => {}
        }
    }

    let (_, child_factors) = factor_split(&dc);
    for (i, t) in parent_terms.iter().enumerate() {
        let (_, term_factors) = factor_split(t);
        match match_factors(&child_factors, &term_factors) {
            FactorMatch::Found(idx) => {
                return Ok(Some(HelpfulEvidence::Factors { term: i, factors: idx }))
            }
            FactorMatch::Inconclusive => inconclusive = true,
            FactorMatch::None => {}
        }
    }

    if let Some((_, rest)) = operand_complement(parent, child) {
        let cofactor = match parent {
            Expr::Product(_) => Expr::product(rest),
            _ => Expr::one(),
        };
        match group_match(&parent_terms, &Expr::product(vec![cofactor.clone(), dc])) {
            GroupMatch::Found(idx) => {
                return Ok(Some(HelpfulEvidence::Group {
                    terms: idx,
                    cofactor: cofactor.to_string(),
                }))
            }
            GroupMatch::Inconclusive => inconclusive = true,
            GroupMatch::None => {}
        }
    }

    if inconclusive {
        Err(VerifyError::Inconclusive)
    } else {
        Ok(None)
    }
}

enum FactorMatch {
    Found(Vec<usize>),
    Inconclusive,
    None,
}

/// Injective matching of `needles` into `haystack` under equivalence.
fn match_factors(needles: &[Expr], haystack: &[Expr]) -> FactorMatch {
    if needles.len() > haystack.len() {
        return FactorMatch::None;
    }
    let mut inconclusive = false;
    // compat[i][j]: needle i is equivalent to haystack j
    let compat: Vec<Vec<bool>> = needles
        .iter()
        .map(|n| {
            haystack
                .iter()
                .map(|h| {
                    if n == h {
                        return true;
                    }
                    match equivalent(n, h).outcome {
                        Outcome::Equivalent => true,
                        Outcome::InsufficientDomain => {
                            inconclusive = true;
                            false
                        }
                        Outcome::Distinct => false,
                    }
                })
                .collect()
        })
        .collect();
    let mut used = vec![false; haystack.len()];
    let mut assignment = Vec::with_capacity(needles.len());
    if assign(&compat, 0, &mut used, &mut assignment) {
        FactorMatch::Found(assignment)
    } else if inconclusive {
        FactorMatch::Inconclusive
    } else {
        FactorMatch::None
    }
}

fn assign(compat: &[Vec<bool>], i: usize, used: &mut [bool], out: &mut Vec<usize>) -> bool {
    if i == compat.len() {
        return true;
    }
    for j in 0..used.len() {
        if compat[i][j] && !used[j] {
            used[j] = true;
            out.push(j);
            if assign(compat, i + 1, used, out) {
                return true;
            }
            out.pop();
            used[j] = false;
        }
    }
    false
}

enum GroupMatch {
    Found(Vec<usize>),
    Inconclusive,
    None,
}

/// Searches for a non-empty subset of `parts` whose sum equals `target` at
/// every admissible sample point.
fn group_match(parts: &[Expr], target: &Expr) -> GroupMatch {
    if parts.is_empty() || parts.len() > MAX_GROUP_TERMS {
        return GroupMatch::None;
    }
    let cfg = EquivalenceConfig::default();
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for &x0 in default_points() {
        let values: Result<Vec<f64>, _> = parts.iter().map(|t| eval_at(t, x0)).collect();
        if let (Ok(values), Ok(want)) = (values, eval_at(target, x0)) {
            rows.push((values, want));
        }
    }
    if rows.len() < cfg.min_admissible {
        return GroupMatch::Inconclusive;
    }
    'subsets: for mask in 1u32..(1u32 << parts.len()) {
        for (values, want) in &rows {
            let (mut sum, mut scale) = (0.0, want.abs());
            for (j, v) in values.iter().enumerate() {
                if mask & (1 << j) != 0 {
                    sum += v;
                    scale += v.abs();
                }
            }
            if (sum - want).abs() > cfg.rel_tol * (1.0 + scale) {
                continue 'subsets;
            }
        }
        return GroupMatch::Found((0..parts.len()).filter(|j| mask & (1 << j) != 0).collect());
    }
    GroupMatch::None
}

/// Runs V1, V2 and V3 on an arbitrary candidate pair. V1 is evaluated with
/// the rule found by V3, falling back to the strict chain semantics.
pub fn verify(parent: &Expr, child: &Expr) -> VerificationReport {
    let related = verify_related(parent, child);
    let v1 = verify_easier(parent, child, related.unwrap_or(Rule::Chain));
    let (evidence, inconclusive) = match helpful_evidence(parent, child) {
        Ok(e) => (e, false),
        Err(VerifyError::Inconclusive) => (None, true),
    };
    let v2 = evidence.is_some();
    VerificationReport {
        v1,
        v2,
        v3: related,
        overall: v1 && v2 && related.is_some(),
        details: VerificationDetails {
            parent_depth: depth(parent),
            child_depth: depth(child),
            parent_nodes: node_count(parent),
            child_nodes: node_count(child),
            evidence,
            inconclusive,
        },
    }
}
