//! Recursive-descent parser for the ASCII expression grammar:
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := unary ("*" unary)*
//! unary  := "-" unary | power
//! power  := atom ("^" integer)?
//! atom   := "x" | number | func "(" expr ")" | "(" expr ")"
//! func   := "sin" | "cos" | "tan" | "exp" | "log"
//! number := digits ("." digits)?
//! ```
//!
//! Exponents may carry a leading `-` so that derivatives of `log` and `tan`
//! round-trip through text.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use super::{Expr, Func, Rational};

/// Largest accepted exponent magnitude.
pub const MAX_EXPONENT: i64 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("exponent {value} at byte {offset} is outside [-{max}, {max}]", max = MAX_EXPONENT)]
    ExponentOutOfRange { offset: usize, value: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::ExponentOutOfRange { offset, .. }
            | ParseError::UnknownFunction { offset, .. } => *offset,
        }
    }
}

/// Parses `text` into a canonical expression.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut ops = vec![self.term()?];
        loop {
            if self.eat(b'+') {
                ops.push(self.term()?);
            } else if self.eat(b'-') {
                ops.push(Expr::negate(self.term()?));
            } else {
                break;
            }
        }
        Ok(if ops.len() == 1 { ops.pop().unwrap() } else { Expr::sum(ops) })
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut ops = vec![self.unary()?];
        while self.eat(b'*') {
            ops.push(self.unary()?);
        }
        Ok(if ops.len() == 1 { ops.pop().unwrap() } else { Expr::product(ops) })
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(Expr::negate(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        self.skip_ws();
        let start = self.pos;
        let negative = self.eat(b'-');
        self.skip_ws();
        let digits = self.digits();
        if digits.is_empty() {
            return Err(self.syntax("expected integer exponent"));
        }
        let text = format!("{}{}", if negative { "-" } else { "" }, digits);
        let value: i64 = match text.parse() {
            Ok(v) if (-MAX_EXPONENT..=MAX_EXPONENT).contains(&v) => v,
            _ => return Err(ParseError::ExponentOutOfRange { offset: start, value: text }),
        };
        Ok(Expr::pow(base, value as i32))
    }

    fn digits(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                Ok(e)
            }
            Some(b) if b.is_ascii_digit() => Ok(self.number()),
            Some(b) if b.is_ascii_alphabetic() => self.identifier(),
            Some(_) => Err(self.syntax("expected `x`, a number, a function or `(`")),
        }
    }

    fn number(&mut self) -> Expr {
        let int_part = self.digits();
        let mut value = Rational::from_integer(int_part.parse::<BigInt>().expect("digits"));
        if self.src.get(self.pos) == Some(&b'.')
            && self.src.get(self.pos + 1).is_some_and(u8::is_ascii_digit)
        {
            self.pos += 1;
            let frac = self.digits();
            let mut scale = BigInt::one();
            for _ in 0..frac.len() {
                scale *= 10;
            }
            let numer: BigInt = frac.parse().expect("digits");
            if !numer.is_zero() {
                value += Rational::new(numer, scale);
            }
        }
        Expr::Const(value)
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if name == "x" {
            return Ok(Expr::Var);
        }
        let Some(func) = Func::from_name(name) else {
            return Err(ParseError::UnknownFunction { offset: start, name: name.to_string() });
        };
        if !self.eat(b'(') {
            return Err(self.syntax("expected `(` after function name"));
        }
        let arg = self.expr()?;
        if !self.eat(b')') {
            return Err(self.syntax("expected `)`"));
        }
        Ok(Expr::apply(func, arg))
    }
}
