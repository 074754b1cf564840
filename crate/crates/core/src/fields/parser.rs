//! Expression grammar for catalog fields.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary ('*' unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' integer)?
//! atom    := number | 't' | 'pi' | ('sin' | 'cos') '(' linear ')' | '(' expr ')'
//! linear  := ['-'] lterm (('+' | '-') lterm)*
//! lterm   := [integer ['*']] var
//! var     := 'x1' | 'x2' | 'x3' | 'x' | 'y' | 'z'
//! ```
//!
//! Trigonometric arguments must be integer combinations of the coordinates, which
//! keeps every field 2π-periodic.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fields::{FieldExpr, WaveVector};

const MAX_POWER: u32 = 16;

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{}'", c as char))
        }
    }

    fn ident(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric()) {
            self.pos += 1;
        }
        if self.pos == start {
            None
        } else {
            std::str::from_utf8(&self.src[start..self.pos]).ok()
        }
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) => Ok(v),
            Err(_) => {
                self.pos = start;
                self.err(format!("invalid number '{text}'"))
            }
        }
    }

    fn integer(&mut self) -> Result<u32> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<u32>().or_else(|_| {
            self.pos = start;
            self.err("expected a non-negative integer")
        })
    }

    fn expr(&mut self) -> Result<FieldExpr> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc = acc.add(&self.term()?);
            } else if self.eat(b'-') {
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<FieldExpr> {
        let mut acc = self.unary()?;
        while self.eat(b'*') {
            acc = acc.mul(&self.unary()?);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<FieldExpr> {
        if self.eat(b'-') {
            return Ok(self.unary()?.scale(-1.0));
        }
        self.power()
    }

    fn power(&mut self) -> Result<FieldExpr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let n = self.integer()?;
            if n > MAX_POWER {
                return self.err(format!("exponent {n} exceeds {MAX_POWER}"));
            }
            return Ok(base.powi(n));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<FieldExpr> {
        match self.peek() {
            None => self.err("unexpected end of expression"),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(FieldExpr::constant(self.number()?)),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                let name = self.ident().unwrap_or_default();
                match name {
                    "t" => Ok(FieldExpr::time_power(1)),
                    "pi" => Ok(FieldExpr::constant(PI)),
                    "sin" | "cos" => {
                        self.expect(b'(')?;
                        let wave = self.linear()?;
                        self.expect(b')')?;
                        Ok(if name == "sin" {
                            FieldExpr::sin(wave)
                        } else {
                            FieldExpr::cos(wave)
                        })
                    }
                    _ => {
                        self.pos = start;
                        self.err(format!("unknown identifier '{name}'"))
                    }
                }
            }
            Some(c) => self.err(format!("unexpected character '{}'", c as char)),
        }
    }

    fn axis_of(&mut self, name: &str, start: usize) -> Result<usize> {
        match name {
            "x" | "x1" => Ok(0),
            "y" | "x2" => Ok(1),
            "z" | "x3" => Ok(2),
            _ => {
                self.pos = start;
                self.err(format!("expected a coordinate (x1, x2, x3), found '{name}'"))
            }
        }
    }

    fn linear(&mut self) -> Result<WaveVector> {
        let mut wave = [0i32; 3];
        let mut sign = if self.eat(b'-') { -1 } else { 1 };
        loop {
            let coef = match self.peek() {
                Some(c) if c.is_ascii_digit() => {
                    let k = self.integer()? as i32;
                    self.eat(b'*');
                    k
                }
                _ => 1,
            };
            let start = self.pos;
            let name = match self.ident() {
                Some(n) => n,
                None => return self.err("expected a coordinate inside sin/cos"),
            };
            let axis = self.axis_of(name, start)?;
            wave[axis] += sign * coef;
            if self.eat(b'+') {
                sign = 1;
            } else if self.eat(b'-') {
                sign = -1;
            } else {
                return Ok(wave);
            }
        }
    }
}

pub fn parse_expr(src: &str) -> Result<FieldExpr> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.err("trailing input");
    }
    Ok(e)
}

impl FromStr for FieldExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_expr(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_catalog_forms() {
        let e = parse_expr("sin(x)*(1+t)").unwrap();
        let x = [0.7, 0.0, 0.0];
        assert!((e.eval(2.0, &x) - 3.0 * 0.7f64.sin()).abs() < 1e-15);

        let e = parse_expr("2 + sin(2*x1 - x2)^2 * cos(3x3) - 0.5*t^2").unwrap();
        let x = [0.3, -1.1, 2.2];
        let want = 2.0 + (0.6f64 + 1.1).sin().powi(2) * (6.6f64).cos() - 0.5 * 1.5f64.powi(2);
        assert!((e.eval(1.5, &x) - want).abs() < 1e-13);
    }

    #[test]
    fn scientific_notation_and_unary_minus() {
        let e = parse_expr("-1e-3*cos(x)").unwrap();
        assert!((e.eval(0.0, &[0.0; 3]) + 1e-3).abs() < 1e-18);
    }

    #[test]
    fn rejects_non_periodic_arguments() {
        assert!(parse_expr("sin(0.5*x)").is_err());
        assert!(parse_expr("x").is_err());
        assert!(parse_expr("sin(x").is_err());
        assert!(parse_expr("exp(x)").is_err());
        assert!(parse_expr("1 +").is_err());
        assert!(parse_expr("t^40").is_err());
    }

    #[test]
    fn display_round_trips() {
        for src in [
            "0",
            "sin(x)*(1+t)",
            "0.1 - 0.3*cos(2*x1+x2)*t^3 + sin(x3)^3",
            "1e-7*sin(x)*cos(y)",
        ] {
            let e = parse_expr(src).unwrap();
            let again = parse_expr(&e.to_string()).unwrap();
            assert_eq!(e, again, "{src} -> {e}");
        }
    }
}
