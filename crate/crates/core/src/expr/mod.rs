//! Symbolic expressions over the basis {sin, cos, tan, exp, log, x^n}
//! closed under `+` and `*`.
//!
//! Every public constructor returns a canonical form: sums and products are
//! flattened, constants are folded exactly, identity elements are removed and
//! operands are sorted. Two canonical expressions are equal as values of
//! [`Expr`] exactly when their trees are structurally identical, which is what
//! containment, decomposition and deduplication all key on.

mod equiv;
mod parse;
mod render;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub(crate) use equiv::default_points;
pub use equiv::{
    equivalent, equivalent_with, eval_at, sample_points, DomainError, DomainKind,
    EquivalenceConfig, EquivalenceVerdict, Outcome,
};
pub use parse::{parse, ParseError, MAX_EXPONENT};

/// Exact rational constant.
pub type Rational = BigRational;

/// Unary basis functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
}

impl Func {
    pub const ALL: [Func; 5] = [Func::Sin, Func::Cos, Func::Tan, Func::Exp, Func::Log];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn apply_f64(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
        }
    }
}

impl fmt::Display for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A symbolic expression in the single variable `x`.
///
/// Build values with [`parse`] or the canonicalizing constructors
/// ([`Expr::sum`], [`Expr::product`], [`Expr::pow`], [`Expr::apply`]).
/// Constructing variants directly skips canonicalization; pass such values
/// through [`canonicalize`] before handing them to other operations.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Var,
    Const(Rational),
    Apply(Func, Box<Expr>),
    /// Integer power; never has exponent 0 or 1 in canonical form.
    Pow(Box<Expr>, i32),
    /// At least two operands in canonical form.
    Sum(Vec<Expr>),
    /// At least two operands in canonical form.
    Product(Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("factors() is undefined on a sum; split it with terms() first")]
    FactorsOfSum,
}

impl Expr {
    pub fn x() -> Expr {
        Expr::Var
    }

    pub fn int(n: i64) -> Expr {
        Expr::Const(Rational::from_integer(BigInt::from(n)))
    }

    pub fn constant(r: Rational) -> Expr {
        Expr::Const(r)
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn apply(f: Func, arg: Expr) -> Expr {
        Expr::Apply(f, Box::new(arg))
    }

    /// `base^exp`, folding constant bases and the trivial exponents 0 and 1.
    pub fn pow(base: Expr, exp: i32) -> Expr {
        match exp {
            0 => return Expr::one(),
            1 => return base,
            _ => {}
        }
        if let Expr::Const(c) = &base {
            if !c.is_zero() || exp > 0 {
                return Expr::Const(rational_pow(c, exp));
            }
        }
        Expr::Pow(Box::new(base), exp)
    }

    /// Canonical sum of already-canonical operands.
    pub fn sum(operands: Vec<Expr>) -> Expr {
        let mut constant = Rational::zero();
        let mut rest = Vec::with_capacity(operands.len());
        for op in operands {
            match op {
                Expr::Sum(inner) => {
                    for e in inner {
                        match e {
                            Expr::Const(c) => constant += c,
                            other => rest.push(other),
                        }
                    }
                }
                Expr::Const(c) => constant += c,
                other => rest.push(other),
            }
        }
        if !constant.is_zero() {
            rest.push(Expr::Const(constant));
        }
        match rest.len() {
            0 => Expr::zero(),
            1 => rest.pop().unwrap(),
            _ => {
                sort_operands(&mut rest);
                Expr::Sum(rest)
            }
        }
    }

    /// Canonical product of already-canonical operands.
    pub fn product(operands: Vec<Expr>) -> Expr {
        let mut constant = Rational::one();
        let mut rest = Vec::with_capacity(operands.len());
        for op in operands {
            match op {
                Expr::Product(inner) => {
                    for e in inner {
                        match e {
                            Expr::Const(c) => constant *= c,
                            other => rest.push(other),
                        }
                    }
                }
                Expr::Const(c) => constant *= c,
                other => rest.push(other),
            }
        }
        if constant.is_zero() {
            return Expr::zero();
        }
        if !constant.is_one() {
            rest.push(Expr::Const(constant));
        }
        match rest.len() {
            0 => Expr::one(),
            1 => rest.pop().unwrap(),
            _ => {
                sort_operands(&mut rest);
                Expr::Product(rest)
            }
        }
    }

    pub fn negate(e: Expr) -> Expr {
        Expr::product(vec![Expr::int(-1), e])
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Expr::Const(_))
    }

    pub fn as_const(&self) -> Option<&Rational> {
        match self {
            Expr::Const(c) => Some(c),
            _ => None,
        }
    }

    /// True when the expression mentions `x` anywhere.
    pub fn depends_on_x(&self) -> bool {
        match self {
            Expr::Var => true,
            Expr::Const(_) => false,
            Expr::Apply(_, a) => a.depends_on_x(),
            Expr::Pow(b, _) => b.depends_on_x(),
            Expr::Sum(ops) | Expr::Product(ops) => ops.iter().any(Expr::depends_on_x),
        }
    }

    /// Immediate subtrees.
    pub fn children(&self) -> &[Expr] {
        match self {
            Expr::Var | Expr::Const(_) => &[],
            Expr::Apply(_, a) => std::slice::from_ref(a.as_ref()),
            Expr::Pow(b, _) => std::slice::from_ref(b.as_ref()),
            Expr::Sum(ops) | Expr::Product(ops) => ops,
        }
    }

    /// Multiset of operands when viewed as a sum (`[self]` for non-sums).
    pub fn sum_operands(&self) -> &[Expr] {
        match self {
            Expr::Sum(ops) => ops,
            other => std::slice::from_ref(other),
        }
    }

    /// Multiset of operands when viewed as a product (`[self]` for non-products).
    pub fn product_operands(&self) -> &[Expr] {
        match self {
            Expr::Product(ops) => ops,
            other => std::slice::from_ref(other),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        render::write_expr(f, self)
    }
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

/// Deterministic text form; `parse(&render(e)) == e` for canonical `e`.
pub fn render(e: &Expr) -> String {
    e.to_string()
}

/// Rebuilds `e` bottom-up through the canonical constructors.
pub fn canonicalize(e: &Expr) -> Expr {
    match e {
        Expr::Var | Expr::Const(_) => e.clone(),
        Expr::Apply(f, a) => Expr::apply(*f, canonicalize(a)),
        Expr::Pow(b, n) => Expr::pow(canonicalize(b), *n),
        Expr::Sum(ops) => Expr::sum(ops.iter().map(canonicalize).collect()),
        Expr::Product(ops) => Expr::product(ops.iter().map(canonicalize).collect()),
    }
}

/// Nesting depth: basis applications (including integer powers) add one,
/// sums and products take the maximum over their operands.
pub fn depth(e: &Expr) -> usize {
    match e {
        Expr::Var | Expr::Const(_) => 0,
        Expr::Apply(_, a) => 1 + depth(a),
        Expr::Pow(b, _) => 1 + depth(b),
        Expr::Sum(ops) | Expr::Product(ops) => ops.iter().map(depth).max().unwrap_or(0),
    }
}

pub fn node_count(e: &Expr) -> usize {
    1 + e.children().iter().map(node_count).sum::<usize>()
}

/// Structural containment: `child` is `parent` or one of its subtrees.
pub fn contains(parent: &Expr, child: &Expr) -> bool {
    parent == child || parent.children().iter().any(|c| contains(c, child))
}

/// Additive terms of `e`.
pub fn terms(e: &Expr) -> Vec<Expr> {
    e.sum_operands().to_vec()
}

/// Splits a non-sum into its rational coefficient and non-constant factors.
pub fn factors(e: &Expr) -> Result<(Rational, Vec<Expr>), ExprError> {
    match e {
        Expr::Sum(_) => Err(ExprError::FactorsOfSum),
        Expr::Const(c) => Ok((c.clone(), Vec::new())),
        Expr::Product(ops) => {
            let mut coeff = Rational::one();
            let mut rest = Vec::new();
            for op in ops {
                match op {
                    Expr::Const(c) => coeff *= c,
                    other => rest.push(other.clone()),
                }
            }
            Ok((coeff, rest))
        }
        other => Ok((Rational::one(), vec![other.clone()])),
    }
}

/// Coefficient/factor split that treats a sum as a single opaque factor.
pub(crate) fn factor_split(e: &Expr) -> (Rational, Vec<Expr>) {
    match e {
        Expr::Sum(_) => (Rational::one(), vec![e.clone()]),
        other => factors(other).expect("non-sum"),
    }
}

/// Total order on canonical operands: constants first, then by
/// (depth, node count, rendered text).
pub fn canonical_cmp(a: &Expr, b: &Expr) -> Ordering {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => x.cmp(y),
        (Expr::Const(_), _) => Ordering::Less,
        (_, Expr::Const(_)) => Ordering::Greater,
        _ => sort_key(a).cmp(&sort_key(b)),
    }
}

fn sort_key(e: &Expr) -> (u8, usize, usize, String) {
    match e {
        Expr::Const(_) => (0, 0, 0, String::new()),
        other => (1, depth(other), node_count(other), render(other)),
    }
}

fn sort_operands(ops: &mut [Expr]) {
    ops.sort_by_cached_key(sort_key);
}

pub(crate) fn rational_pow(base: &Rational, exp: i32) -> Rational {
    let magnitude = exp.unsigned_abs();
    let mut acc = Rational::one();
    for _ in 0..magnitude {
        acc *= base;
    }
    if exp < 0 {
        acc.recip()
    } else {
        acc
    }
}

pub(crate) fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| if r.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn depth_examples() {
        assert_eq!(depth(&p("x")), 0);
        assert_eq!(depth(&p("sin(cos(x^2))")), 3);
        assert_eq!(depth(&p("sin(cos(exp(log(x^2))))")), 5);
        assert_eq!(depth(&p("3*x^2 + sin(x)")), 1);
    }

    #[test]
    fn node_count_examples() {
        assert_eq!(node_count(&p("x")), 1);
        assert_eq!(node_count(&p("x^2")), 2);
        assert_eq!(node_count(&p("sin(x^2)")), 3);
        assert_eq!(node_count(&p("sin(x) + x")), 4);
    }

    #[test]
    fn containment() {
        assert!(contains(&p("sin(cos(x^2))"), &p("cos(x^2)")));
        assert!(!contains(&p("sin(x^2)"), &p("cos(x)")));
        let e = p("sin(x)*exp(x) + x^3");
        assert!(contains(&e, &e));
        assert!(contains(&e, &p("exp(x)")));
    }

    #[test]
    fn terms_and_factors() {
        let s = p("sin(x) + x^2");
        assert_eq!(terms(&s), vec![p("sin(x)"), p("x^2")]);
        assert_eq!(terms(&p("sin(x)")), vec![p("sin(x)")]);

        let (c, fs) = factors(&p("-2*sin(x)*x")).unwrap();
        assert_eq!(c, Rational::from_integer((-2).into()));
        assert_eq!(fs, vec![p("x"), p("sin(x)")]);

        let (c, fs) = factors(&p("x^3")).unwrap();
        assert!(c.is_one());
        assert_eq!(fs, vec![p("x^3")]);

        let (c, fs) = factors(&p("-sin(x^2)*2*x")).unwrap();
        assert_eq!(c, Rational::from_integer((-2).into()));
        assert_eq!(fs, vec![p("x"), p("sin(x^2)")]);

        assert_eq!(factors(&s), Err(ExprError::FactorsOfSum));
    }

    #[test]
    fn identity_elements_vanish() {
        assert_eq!(p("x + 0"), Expr::Var);
        assert_eq!(p("1*x"), Expr::Var);
        assert_eq!(p("0*sin(x)"), Expr::zero());
        assert_eq!(p("x^1"), Expr::Var);
        assert_eq!(p("sin(x)^0"), Expr::one());
    }

    #[test]
    fn flattening_and_constant_folding() {
        let e = p("2*(3*x)*sin(x)");
        assert_eq!(e, Expr::Product(vec![Expr::int(6), Expr::Var, p("sin(x)")]));
        let s = p("1 + (x + 2) + sin(x)");
        assert_eq!(s, Expr::Sum(vec![Expr::int(3), Expr::Var, p("sin(x)")]));
    }

    #[test]
    fn no_like_factor_merging() {
        let e = p("x*x");
        assert_eq!(e, Expr::Product(vec![Expr::Var, Expr::Var]));
        assert_eq!(depth(&e), 0);
    }

    #[test]
    fn constant_powers_fold() {
        assert_eq!(p("2^3"), Expr::int(8));
        assert_eq!(p("2^-1"), Expr::Const(Rational::new(1.into(), 2.into())));
        assert!(matches!(p("0^-1"), Expr::Pow(_, -1)));
    }
}
