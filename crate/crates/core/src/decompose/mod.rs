//! Rule-based decomposition of differentiation problems.
//!
//! Each calculus rule proposes children (`decompose_chain`,
//! `decompose_product`, `decompose_sum`); a child is only kept when it passes
//! all three checks in [`verify`]. Recursing until depth-one base cases gives
//! a [`DecompositionTree`].

mod table;
mod tree;
mod verify;

pub use table::render_table;
pub use tree::{build_tree, DecompositionTree, TreeEdge, TreeError};
pub use verify::{
    helpful_evidence, verify, verify_easier, verify_helpful, verify_related, HelpfulEvidence,
    VerificationDetails, VerificationReport, VerifyError, MAX_GROUP_TERMS,
};

use crate::expr::{depth, Expr};
pub use crate::problem::Rule;

/// Chain rule: the inner function of `f(g)` or `g^n` (also through a constant
/// coefficient), unless it is `x` itself or a constant.
pub fn decompose_chain(p: &Expr) -> Option<Expr> {
    let inner = verify::chain_inner(p)?;
    if *inner == Expr::Var || inner.is_const() {
        return None;
    }
    Some(inner.clone())
}

/// Product rule: splits off the first x-dependent operand from the rest
/// (constant coefficient stays with the rest). Constant multiples, where
/// only one operand depends on `x`, are not split.
pub fn decompose_product(p: &Expr) -> Option<(Expr, Expr)> {
    let Expr::Product(ops) = p else { return None };
    let dependent = ops.iter().filter(|e| e.depends_on_x()).count();
    if dependent < 2 {
        return None;
    }
    let first = ops.iter().position(Expr::depends_on_x)?;
    let mut rest = ops.clone();
    let u = rest.remove(first);
    Some((u, Expr::product(rest)))
}

/// Sum rule: splits off the first x-dependent term from the rest.
pub fn decompose_sum(p: &Expr) -> Option<(Expr, Expr)> {
    let Expr::Sum(ops) = p else { return None };
    let first = ops.iter().position(Expr::depends_on_x)?;
    let mut rest = ops.clone();
    let u = rest.remove(first);
    Some((u, Expr::sum(rest)))
}

/// Candidate children from every matching template, before verification.
pub fn candidates(p: &Expr) -> Vec<(Expr, Rule)> {
    let mut out: Vec<(Expr, Rule)> = Vec::new();
    let mut push = |c: Expr, r: Rule| {
        if !out.iter().any(|(e, rr)| *e == c && *rr == r) {
            out.push((c, r));
        }
    };
    if let Some(g) = decompose_chain(p) {
        push(g, Rule::Chain);
    }
    if let Some((u, v)) = decompose_product(p) {
        push(u, Rule::Product);
        push(v, Rule::Product);
    }
    if let Some((u, v)) = decompose_sum(p) {
        push(u, Rule::Sum);
        push(v, Rule::Sum);
    }
    out
}

/// Verified children of `p` with their reports. Depth-one problems are base
/// cases and have none.
pub fn decompose_verified(p: &Expr) -> Vec<(Expr, Rule, VerificationReport)> {
    if depth(p) <= 1 {
        return Vec::new();
    }
    candidates(p)
        .into_iter()
        .filter_map(|(c, rule)| {
            let report = verify(p, &c);
            (report.overall && report.v3 == Some(rule)).then_some((c, rule, report))
        })
        .collect()
}

/// Verified children of `p`.
pub fn decompose(p: &Expr) -> Vec<(Expr, Rule)> {
    decompose_verified(p).into_iter().map(|(c, r, _)| (c, r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn chain_examples() {
        assert_eq!(decompose_chain(&p("sin(cos(x^2))")), Some(p("cos(x^2)")));
        assert_eq!(decompose_chain(&p("sin(x)")), None);
        assert_eq!(decompose_chain(&p("tan(x^2)")), Some(p("x^2")));
        assert_eq!(decompose_chain(&p("x^3")), None);
        assert_eq!(decompose_chain(&p("(sin(x) + x)^2")), Some(p("sin(x) + x")));
        assert_eq!(decompose_chain(&p("-4*exp(x^3)")), Some(p("x^3")));
    }

    #[test]
    fn product_examples() {
        assert_eq!(decompose_product(&p("sin(x)*cos(x^2)")), Some((p("sin(x)"), p("cos(x^2)"))));
        assert_eq!(decompose_product(&p("3*x^2")), None);
        assert_eq!(
            // canonical operand order puts exp(x) first
            decompose_product(&p("x^2*exp(x)*sin(x)")),
            Some((p("exp(x)"), p("sin(x)*x^2")))
        );
        assert_eq!(
            decompose_product(&p("5*sin(x)*cos(x^2)")),
            Some((p("sin(x)"), p("5*cos(x^2)")))
        );
    }

    #[test]
    fn sum_examples() {
        assert_eq!(decompose_sum(&p("sin(x) + x^2")), Some((p("sin(x)"), p("x^2"))));
        assert_eq!(decompose_sum(&p("x^3")), None);
        let (a, rest) = decompose_sum(&p("sin(x) + x^2 + exp(x^2)")).unwrap();
        assert_eq!(a, p("sin(x)"));
        assert_eq!(rest, p("x^2 + exp(x^2)"));
    }

    #[test]
    fn decompose_examples() {
        assert_eq!(decompose(&p("sin(cos(tan(x^2)))")), vec![(p("cos(tan(x^2))"), Rule::Chain)]);
        assert!(decompose(&p("x^2")).is_empty());

        let children = decompose(&p("sin(x^2) + x^3*exp(x)"));
        assert_eq!(children.len(), 2);
        assert!(children.iter().all(|(_, r)| *r == Rule::Sum));
        let product = children.iter().find(|(c, _)| *c == p("x^3*exp(x)"));
        assert!(product.is_some());
        let chain = decompose(&p("sin(x^2)"));
        assert_eq!(chain, vec![(p("x^2"), Rule::Chain)]);
        // depth-one product: base case, no children
        assert!(decompose(&p("x^3*exp(x)")).is_empty());
    }
}
