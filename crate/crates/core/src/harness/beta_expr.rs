//! Exact rational expressions such as `-(4!)/2^2` or `(-1)^4 * 6!/2^3`.
//!
//! Grammar: `+ - * /`, integer powers `^` (right associative), postfix
//! factorial `!`, parentheses, integer and decimal literals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Largest argument accepted by `!`.
pub const MAX_FACTORIAL: u32 = 1000;
/// Largest magnitude accepted as an exponent.
pub const MAX_EXPONENT: i64 = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{message} at column {column} of `{text}`")]
pub struct ExprError {
    pub text: String,
    pub column: usize,
    pub message: String,
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

pub fn parse_rational(text: &str) -> Result<BigRational, ExprError> {
    let mut p = Parser {
        text,
        bytes: text.as_bytes(),
        pos: 0,
    };
    let v = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(v)
}

/// Nearest `f64` to the exact value.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

impl Parser<'_> {
    fn err(&self, message: impl Into<String>) -> ExprError {
        ExprError {
            text: self.text.to_string(),
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<BigRational, ExprError> {
        let mut acc = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = if c == b'+' { acc + rhs } else { acc - rhs };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<BigRational, ExprError> {
        let mut acc = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let at = self.pos;
            let rhs = self.unary()?;
            if c == b'*' {
                acc *= rhs;
            } else {
                if rhs.is_zero() {
                    self.pos = at;
                    return Err(self.err("division by zero"));
                }
                acc /= rhs;
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<BigRational, ExprError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<BigRational, ExprError> {
        let base = self.postfix()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        let at = self.pos;
        let exp = self.unary()?;
        if !exp.is_integer() {
            self.pos = at;
            return Err(self.err("exponent must be an integer"));
        }
        let e = exp.to_integer().to_i64().filter(|e| e.abs() <= MAX_EXPONENT).ok_or_else(|| {
            self.pos = at;
            self.err(format!("exponent exceeds {MAX_EXPONENT} in magnitude"))
        })?;
        if e < 0 && base.is_zero() {
            self.pos = at;
            return Err(self.err("zero raised to a negative power"));
        }
        Ok(num_traits::pow::Pow::pow(base, e as i32))
    }

    fn postfix(&mut self) -> Result<BigRational, ExprError> {
        let mut v = self.primary()?;
        while self.peek() == Some(b'!') {
            if !v.is_integer() || v.is_negative() {
                return Err(self.err("factorial needs a non-negative integer"));
            }
            let k = v
                .to_integer()
                .to_u32()
                .filter(|k| *k <= MAX_FACTORIAL)
                .ok_or_else(|| self.err(format!("factorial argument exceeds {MAX_FACTORIAL}")))?;
            self.pos += 1;
            let f: BigInt = (1..=k).map(BigInt::from).product();
            v = BigRational::from_integer(f);
        }
        Ok(v)
    }

    fn primary(&mut self) -> Result<BigRational, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let v = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(_) => Err(self.err("expected a number or `(`")),
            None => Err(self.err("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<BigRational, ExprError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let int_part = &self.text[start..self.pos];
        let mut frac_part = "";
        if self.pos < self.bytes.len() && self.bytes[self.pos] == b'.' {
            self.pos += 1;
            let f0 = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            frac_part = &self.text[f0..self.pos];
        }
        if int_part.is_empty() && frac_part.is_empty() {
            self.pos = start;
            return Err(self.err("malformed number"));
        }
        let digits = format!("{int_part}{frac_part}");
        let num: BigInt = digits.parse().map_err(|_| self.err("malformed number"))?;
        let den = num_traits::pow::Pow::pow(BigInt::from(10), frac_part.len() as u32);
        Ok(BigRational::new(num, den))
    }
}
