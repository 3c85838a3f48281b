//! Real evaluation and probabilistic equivalence.
//!
//! Symbolic equivalence of transcendental expressions is undecidable in
//! general, so two canonical forms that differ structurally are compared by
//! evaluating both at a fixed, seeded set of points and demanding agreement
//! to a relative tolerance at enough admissible points.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{rational_to_f64, Expr, Func};

/// Guard width for domain boundaries (log at 0, tan poles, division by zero).
pub const DOMAIN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    LogNonPositive,
    TanPole,
    NegativePowerOfZero,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind:?} at x = {x} in `{subexpr}`")]
pub struct DomainError {
    pub kind: DomainKind,
    pub x: f64,
    pub subexpr: Expr,
}

/// Evaluates `e` at `x0`, failing at points outside the real domain.
pub fn eval_at(e: &Expr, x0: f64) -> Result<f64, DomainError> {
    let fail = |kind| DomainError { kind, x: x0, subexpr: e.clone() };
    let v = match e {
        Expr::Var => x0,
        Expr::Const(c) => rational_to_f64(c),
        Expr::Apply(f, arg) => {
            let a = eval_at(arg, x0)?;
            match f {
                Func::Log if a <= DOMAIN_EPS => return Err(fail(DomainKind::LogNonPositive)),
                Func::Tan if a.cos().abs() <= DOMAIN_EPS => return Err(fail(DomainKind::TanPole)),
                _ => f.apply_f64(a),
            }
        }
        Expr::Pow(base, n) => {
            let b = eval_at(base, x0)?;
            if *n < 0 && b.abs() <= DOMAIN_EPS {
                return Err(fail(DomainKind::NegativePowerOfZero));
            }
            b.powi(*n)
        }
        Expr::Sum(ops) => {
            let mut acc = 0.0;
            for op in ops {
                acc += eval_at(op, x0)?;
            }
            acc
        }
        Expr::Product(ops) => {
            let mut acc = 1.0;
            for op in ops {
                acc *= eval_at(op, x0)?;
            }
            acc
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(fail(DomainKind::NonFinite))
    }
}

/// Value plus a magnitude scale: the sum of absolute top-level terms, which
/// bounds the rounding error of a sum better than its (possibly cancelled)
/// value does.
fn eval_scaled(e: &Expr, x0: f64) -> Result<(f64, f64), DomainError> {
    match e {
        Expr::Sum(ops) => {
            let (mut value, mut scale) = (0.0, 0.0);
            for op in ops {
                let v = eval_at(op, x0)?;
                value += v;
                scale += v.abs();
            }
            Ok((value, scale))
        }
        other => eval_at(other, x0).map(|v| (v, v.abs())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceConfig {
    pub points: usize,
    pub lo: f64,
    pub hi: f64,
    pub min_admissible: usize,
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        Self { points: 32, lo: 0.15, hi: 2.5, min_admissible: 8, rel_tol: 1e-9, seed: 0x5EED_D1FF }
    }
}

/// The candidate sample points for `cfg`, in draw order.
pub fn sample_points(cfg: &EquivalenceConfig) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.points).map(|_| rng.gen_range(cfg.lo..cfg.hi)).collect()
}

pub(crate) fn default_points() -> &'static [f64] {
    static POINTS: OnceLock<Vec<f64>> = OnceLock::new();
    POINTS.get_or_init(|| sample_points(&EquivalenceConfig::default()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Equivalent,
    Distinct,
    InsufficientDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceVerdict {
    pub outcome: Outcome,
    pub points_tested: usize,
    pub max_relative_error: f64,
}

impl EquivalenceVerdict {
    pub fn is_equivalent(&self) -> bool {
        self.outcome == Outcome::Equivalent
    }
}

/// [`equivalent_with`] under the default configuration.
pub fn equivalent(a: &Expr, b: &Expr) -> EquivalenceVerdict {
    let cfg = EquivalenceConfig::default();
    compare(a, b, &cfg, default_points())
}

pub fn equivalent_with(a: &Expr, b: &Expr, cfg: &EquivalenceConfig) -> EquivalenceVerdict {
    if *cfg == EquivalenceConfig::default() {
        return compare(a, b, cfg, default_points());
    }
    compare(a, b, cfg, &sample_points(cfg))
}

fn compare(a: &Expr, b: &Expr, cfg: &EquivalenceConfig, points: &[f64]) -> EquivalenceVerdict {
    if a == b {
        // a - b is identically zero; every candidate point agrees exactly.
        return EquivalenceVerdict {
            outcome: Outcome::Equivalent,
            points_tested: points.len(),
            max_relative_error: 0.0,
        };
    }
    let mut tested = 0;
    let mut worst: f64 = 0.0;
    for &x0 in points {
        let (Ok((va, sa)), Ok((vb, sb))) = (eval_scaled(a, x0), eval_scaled(b, x0)) else {
            continue;
        };
        tested += 1;
        let scale = 1.0 + sa.max(sb);
        let rel = (va - vb).abs() / scale;
        worst = worst.max(rel);
        if rel > cfg.rel_tol {
            return EquivalenceVerdict {
                outcome: Outcome::Distinct,
                points_tested: tested,
                max_relative_error: worst,
            };
        }
    }
    let outcome = if tested >= cfg.min_admissible {
        Outcome::Equivalent
    } else {
        Outcome::InsufficientDomain
    };
    EquivalenceVerdict { outcome, points_tested: tested, max_relative_error: worst }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    /// Deliberately naive second interpreter: walks the rendered string's
    /// parse tree with no domain guards and no shared code with `eval_at`.
    fn naive_eval(e: &Expr, x: f64) -> f64 {
        match e {
            Expr::Var => x,
            Expr::Const(c) => {
                let n: f64 = c.numer().to_string().parse().unwrap();
                let d: f64 = c.denom().to_string().parse().unwrap();
                n / d
            }
            Expr::Apply(f, a) => {
                let v = naive_eval(a, x);
                match f.name() {
                    "sin" => v.sin(),
                    "cos" => v.cos(),
                    "tan" => v.sin() / v.cos(),
                    "exp" => std::f64::consts::E.powf(v),
                    "log" => v.ln(),
                    _ => unreachable!(),
                }
            }
            Expr::Pow(b, n) => {
                let v = naive_eval(b, x);
                let mut acc = 1.0;
                for _ in 0..n.unsigned_abs() {
                    acc *= v;
                }
                if *n < 0 {
                    1.0 / acc
                } else {
                    acc
                }
            }
            Expr::Sum(ops) => ops.iter().map(|o| naive_eval(o, x)).sum(),
            Expr::Product(ops) => ops.iter().map(|o| naive_eval(o, x)).product(),
        }
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(eval_at(&p("x^2"), 3.0).unwrap(), 9.0);
        let err = eval_at(&p("log(x)"), -1.0).unwrap_err();
        assert_eq!(err.kind, DomainKind::LogNonPositive);
        assert_eq!(err.subexpr, p("log(x)"));

        let e = p("sin(cos(x^2))");
        let got = eval_at(&e, 1.0).unwrap();
        let want = naive_eval(&e, 1.0);
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        assert!((got - (1.0f64.cos()).sin()).abs() < 1e-15);
    }

    #[test]
    fn evaluator_agrees_with_naive_interpreter() {
        let exprs = [
            "sin(cos(x^2))",
            "tan(x)^2 + 3*x^-1",
            "exp(sin(x))*log(x^3 + 1)",
            "-2*x*sin(x^2)*cos(cos(x^2))",
            "(x + 1)^-2 - 0.5*x",
        ];
        for s in exprs {
            let e = p(s);
            for x in [0.3, 0.9, 1.7, 2.2] {
                let (a, b) = (eval_at(&e, x).unwrap(), naive_eval(&e, x));
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{s} at {x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn domain_guards() {
        assert_eq!(eval_at(&p("x^-1"), 0.0).unwrap_err().kind, DomainKind::NegativePowerOfZero);
        let pole = std::f64::consts::FRAC_PI_2;
        assert_eq!(eval_at(&p("tan(x)"), pole).unwrap_err().kind, DomainKind::TanPole);
        assert_eq!(eval_at(&p("exp(exp(exp(x)))"), 10.0).unwrap_err().kind, DomainKind::NonFinite);
    }

    #[test]
    fn equivalence_examples() {
        assert!(equivalent(&p("x + x"), &p("2*x")).is_equivalent());

        let v = equivalent(&p("sin(x)^2 + cos(x)^2"), &p("1"));
        assert_eq!(v.outcome, Outcome::Equivalent);
        assert!(v.points_tested >= 16);
        assert!(v.max_relative_error < 1e-9);

        assert_eq!(equivalent(&p("x^2"), &p("x^3")).outcome, Outcome::Distinct);
    }

    #[test]
    fn insufficient_domain() {
        // log(log(log(x))) needs x > e, outside the sampling interval
        let a = p("log(log(log(x)))");
        let b = p("2*log(log(log(x)))");
        let v = equivalent(&a, &b);
        assert_eq!(v.outcome, Outcome::InsufficientDomain);
        assert_eq!(v.points_tested, 0);
    }

    #[test]
    fn sample_points_are_deterministic_and_in_range() {
        let cfg = EquivalenceConfig::default();
        let a = sample_points(&cfg);
        assert_eq!(a, sample_points(&cfg));
        assert_eq!(a.len(), 32);
        assert!(a.iter().all(|&x| (0.15..2.5).contains(&x)));
    }
}
