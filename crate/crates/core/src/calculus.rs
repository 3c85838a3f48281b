//! Symbolic differentiation, bounded simplification and a finite-difference
//! oracle for checking derivatives numerically.

use crate::expr::{canonicalize, eval_at, DomainError, Expr, Func};

/// d/dx of a canonical expression, returned in canonical form.
///
/// `tan' u = (1 + tan(u)^2) u'` and `log' u = u^-1 u'` keep the result free of
/// division, so derivatives may carry negative exponents.
pub fn differentiate(e: &Expr) -> Expr {
    match e {
        Expr::Var => Expr::one(),
        Expr::Const(_) => Expr::zero(),
        Expr::Pow(base, n) => Expr::product(vec![
            Expr::int(i64::from(*n)),
            Expr::pow(base.as_ref().clone(), n - 1),
            differentiate(base),
        ]),
        Expr::Apply(f, u) => {
            let inner = differentiate(u);
            let u = u.as_ref().clone();
            let outer = match f {
                Func::Sin => Expr::apply(Func::Cos, u),
                Func::Cos => Expr::negate(Expr::apply(Func::Sin, u)),
                Func::Exp => Expr::apply(Func::Exp, u),
                Func::Log => Expr::pow(u, -1),
                Func::Tan => Expr::sum(vec![Expr::one(), Expr::pow(Expr::apply(Func::Tan, u), 2)]),
            };
            Expr::product(vec![outer, inner])
        }
        Expr::Sum(ops) => Expr::sum(ops.iter().map(differentiate).collect()),
        // k-ary product rule: one term per operand, that operand differentiated.
        Expr::Product(ops) => Expr::sum(
            (0..ops.len())
                .map(|i| {
                    let mut factors = ops.clone();
                    factors[i] = differentiate(&ops[i]);
                    Expr::product(factors)
                })
                .collect(),
        ),
    }
}

/// Central difference `(e(x0 + h) - e(x0 - h)) / 2h`.
pub fn finite_difference(e: &Expr, x0: f64, h: f64) -> Result<f64, DomainError> {
    let hi = eval_at(e, x0 + h)?;
    let lo = eval_at(e, x0 - h)?;
    Ok((hi - lo) / (2.0 * h))
}

const SIMPLIFY_PASSES: usize = 8;

/// Canonicalization plus a fixed, value-preserving rewrite set:
/// `(b^m)^n -> b^(mn)` and `b^m * b^n -> b^(m+n)` inside products.
/// Nothing else (in particular no trigonometric identities) is applied.
pub fn simplify(e: &Expr) -> Expr {
    let mut current = canonicalize(e);
    for _ in 0..SIMPLIFY_PASSES {
        let next = rewrite(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

fn rewrite(e: &Expr) -> Expr {
    match e {
        Expr::Var | Expr::Const(_) => e.clone(),
        Expr::Apply(f, a) => Expr::apply(*f, rewrite(a)),
        Expr::Pow(base, n) => match rewrite(base) {
            Expr::Pow(inner, m) => match m.checked_mul(*n) {
                Some(mn) => Expr::pow(*inner, mn),
                None => Expr::pow(Expr::Pow(inner, m), *n),
            },
            b => Expr::pow(b, *n),
        },
        Expr::Sum(ops) => Expr::sum(ops.iter().map(rewrite).collect()),
        Expr::Product(ops) => Expr::product(merge_powers(ops.iter().map(rewrite).collect())),
    }
}

fn merge_powers(ops: Vec<Expr>) -> Vec<Expr> {
    let mut out: Vec<Expr> = Vec::with_capacity(ops.len());
    for op in ops {
        if let Expr::Pow(base, n) = &op {
            let existing = out.iter_mut().find(|o| matches!(o, Expr::Pow(b, _) if b == base));
            if let Some(slot) = existing {
                let Expr::Pow(_, m) = slot else { unreachable!() };
                if let Some(sum) = m.checked_add(*n) {
                    *slot = Expr::pow(base.as_ref().clone(), sum);
                    continue;
                }
            }
        }
        out.push(op);
    }
    out
}
