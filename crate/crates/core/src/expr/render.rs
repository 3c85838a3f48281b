use std::fmt::{self, Write};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::{Expr, Rational};

pub(super) fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Sum(ops) => write_sum(f, ops),
        Expr::Product(ops) => write_product(f, ops),
        other => write_unit(f, other),
    }
}

fn write_sum(f: &mut fmt::Formatter<'_>, ops: &[Expr]) -> fmt::Result {
    for (i, op) in ops.iter().enumerate() {
        if i == 0 {
            write_expr(f, op)?;
            continue;
        }
        match negated(op) {
            Some(pos @ Expr::Sum(_)) => {
                f.write_str(" - (")?;
                write_expr(f, &pos)?;
                f.write_char(')')?;
            }
            Some(pos) => {
                f.write_str(" - ")?;
                write_expr(f, &pos)?;
            }
            None => {
                f.write_str(" + ")?;
                write_expr(f, op)?;
            }
        }
    }
    Ok(())
}

/// `Some(-op)` when `op` prints with a leading minus sign.
fn negated(op: &Expr) -> Option<Expr> {
    match op {
        Expr::Const(c) if c.is_negative() => Some(Expr::Const(-c.clone())),
        Expr::Product(ops) => match ops.first() {
            Some(Expr::Const(c)) if c.is_negative() => {
                let mut rest = ops.clone();
                rest[0] = Expr::Const(-c.clone());
                Some(Expr::product(rest))
            }
            _ => None,
        },
        _ => None,
    }
}

fn write_product(f: &mut fmt::Formatter<'_>, ops: &[Expr]) -> fmt::Result {
    let mut rest = ops;
    if let Some(Expr::Const(c)) = ops.first() {
        rest = &ops[1..];
        if *c == -Rational::one() {
            f.write_char('-')?;
        } else {
            write_const(f, c)?;
            f.write_char('*')?;
        }
    }
    for (i, op) in rest.iter().enumerate() {
        if i > 0 {
            f.write_char('*')?;
        }
        match op {
            Expr::Sum(_) => {
                f.write_char('(')?;
                write_expr(f, op)?;
                f.write_char(')')?;
            }
            other => write_expr(f, other)?,
        }
    }
    Ok(())
}

fn write_unit(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Var => f.write_char('x'),
        Expr::Const(c) => write_const(f, c),
        Expr::Apply(func, arg) => {
            write!(f, "{}(", func.name())?;
            write_expr(f, arg)?;
            f.write_char(')')
        }
        Expr::Pow(base, n) => {
            let atomic = match base.as_ref() {
                Expr::Var | Expr::Apply(..) => true,
                Expr::Const(c) => c.is_integer() && !c.is_negative(),
                _ => false,
            };
            if atomic {
                write_expr(f, base)?;
            } else {
                f.write_char('(')?;
                write_expr(f, base)?;
                f.write_char(')')?;
            }
            write!(f, "^{n}")
        }
        Expr::Sum(_) | Expr::Product(_) => unreachable!("handled by write_expr"),
    }
}

/// Integers print plainly, terminating fractions as decimals, and anything
/// else as `p*q^-1` so that the output stays inside the grammar.
fn write_const(f: &mut fmt::Formatter<'_>, c: &Rational) -> fmt::Result {
    if c.is_integer() {
        return write!(f, "{}", c.numer());
    }
    if let Some(text) = terminating_decimal(c) {
        return f.write_str(&text);
    }
    if c.numer().abs().is_one() {
        let sign = if c.is_negative() { "-" } else { "" };
        return write!(f, "{sign}{}^-1", c.denom());
    }
    write!(f, "{}*{}^-1", c.numer(), c.denom())
}

fn terminating_decimal(c: &Rational) -> Option<String> {
    let mut denom = c.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut twos, mut fives) = (0u32, 0u32);
    while denom.is_even() {
        denom /= &two;
        twos += 1;
    }
    while (&denom % &five).is_zero() {
        denom /= &five;
        fives += 1;
    }
    if !denom.is_one() {
        return None;
    }
    let places = twos.max(fives);
    let scaled = (c * Rational::from_integer(BigInt::from(10).pow(places))).to_integer();
    let digits = scaled.abs().to_string();
    let places = places as usize;
    let padded = format!("{:0>width$}", digits, width = places + 1);
    let (int_part, frac_part) = padded.split_at(padded.len() - places);
    let sign = if scaled.is_negative() { "-" } else { "" };
    Some(format!("{sign}{int_part}.{frac_part}"))
}

#[cfg(test)]
mod tests {
    use super::super::{parse, render, Expr, Func};

    #[test]
    fn minimal_parentheses() {
        assert_eq!(render(&Expr::pow(Expr::Var, 2)), "x^2");
        assert_eq!(render(&Expr::product(vec![Expr::int(2), Expr::Var])), "2*x");
        let tan_sq = Expr::sum(vec![Expr::one(), Expr::pow(Expr::apply(Func::Tan, Expr::Var), 2)]);
        assert_eq!(render(&tan_sq), "1 + tan(x)^2");
    }

    #[test]
    fn signs_and_grouping() {
        let cases = [
            ("x - sin(x)", "x - sin(x)"),
            ("-x^2", "-x^2"),
            ("(-x)^2", "(-x)^2"),
            ("-(x + 1)", "-(1 + x)"),
            ("(x^2)^3", "(x^2)^3"),
            ("x^-1*2", "2*x^-1"),
            ("3 - 2*x*sin(x)", "3 - 2*x*sin(x)"),
            ("0.5*x", "0.5*x"),
            ("x*3^-1", "3^-1*x"),
            ("-2*x*3^-1", "-2*3^-1*x"),
            ("sin(x) - (x + 1)", "-(1 + x) + sin(x)"),
            ("x - (sin(x) + cos(x))", "x - (cos(x) + sin(x))"),
        ];
        for (input, want) in cases {
            let e = parse(input).unwrap();
            let text = render(&e);
            assert_eq!(text, want, "input {input}");
            assert_eq!(parse(&text).unwrap(), e, "round trip of {input}");
        }
    }

    #[test]
    fn decimal_constants() {
        for (input, want) in [("0.25", "0.25"), ("-1.5", "-1.5"), ("2.50", "2.5"), ("0.05", "0.05")]
        {
            assert_eq!(render(&parse(input).unwrap()), want);
        }
    }
}
