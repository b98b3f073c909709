//! Plain-text expression grammar, e.g. `2*x^2*exp(t*x) + 1/3`.
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' exponent)?
//! exponent:= '-'? INT | '(' '-'? INT ')'
//! primary := NUMBER | IDENT | IDENT '(' sum ')' | '(' sum ')'
//! ```

use num_bigint::BigInt;
use num_rational::BigRational;

use super::expr::ScalarExpr;
use crate::error::{Error, Result};

/// Parsed expression tree, before interpretation.
#[derive(Clone, Debug, PartialEq)]
pub enum Ast {
    Num(BigRational),
    Ident(String),
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Div(Box<Ast>, Box<Ast>),
    Neg(Box<Ast>),
    Pow(Box<Ast>, i32),
    Call(String, Box<Ast>),
}

pub fn parse_ast(text: &str) -> Result<Ast> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let ast = p.sum()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(ast)
}

/// Parse a rational literal: integer, `p/q`, or decimal with optional exponent.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let ast = parse_ast(text)?;
    let e = ScalarExpr::from_ast(&ast)?;
    e.as_constant().ok_or(Error::Parse { pos: 0, msg: format!("`{text}` is not a rational constant") })
}

impl ScalarExpr {
    pub fn parse(text: &str) -> Result<ScalarExpr> {
        ScalarExpr::from_ast(&parse_ast(text)?)
    }

    pub fn from_ast(ast: &Ast) -> Result<ScalarExpr> {
        Ok(match ast {
            Ast::Num(q) => ScalarExpr::constant(q.clone()),
            Ast::Ident(name) => ScalarExpr::symbol(name),
            Ast::Add(a, b) => Self::from_ast(a)? + Self::from_ast(b)?,
            Ast::Sub(a, b) => Self::from_ast(a)? - Self::from_ast(b)?,
            Ast::Mul(a, b) => Self::from_ast(a)? * Self::from_ast(b)?,
            Ast::Div(a, b) => {
                let d = Self::from_ast(b)?;
                if d.is_zero() {
                    return Err(Error::Parse { pos: 0, msg: "division by zero".into() });
                }
                Self::from_ast(a)? * d.pow(-1)
            }
            Ast::Neg(a) => -Self::from_ast(a)?,
            Ast::Pow(a, k) => {
                let base = Self::from_ast(a)?;
                if base.is_zero() && *k < 0 {
                    return Err(Error::Parse { pos: 0, msg: "negative power of zero".into() });
                }
                base.pow(*k)
            }
            Ast::Call(f, a) => {
                let arg = Self::from_ast(a)?;
                match f.as_str() {
                    "exp" => ScalarExpr::exp(arg),
                    "sin" => ScalarExpr::sin(arg),
                    "cos" => ScalarExpr::cos(arg),
                    other => return Err(Error::Parse { pos: 0, msg: format!("unknown function `{other}`") }),
                }
            }
        })
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
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

    fn sum(&mut self) -> Result<Ast> {
        let mut lhs = self.product()?;
        loop {
            if self.eat(b'+') {
                lhs = Ast::Add(Box::new(lhs), Box::new(self.product()?));
            } else if self.eat(b'-') {
                lhs = Ast::Sub(Box::new(lhs), Box::new(self.product()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<Ast> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Ast::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Ast::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Ast> {
        if self.eat(b'-') {
            return Ok(Ast::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast> {
        let base = self.primary()?;
        if self.eat(b'^') {
            let k = self.exponent()?;
            return Ok(Ast::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i32> {
        let paren = self.eat(b'(');
        let neg = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer exponent"));
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let k: i32 = digits.parse().map_err(|_| self.err("exponent too large"))?;
        if paren && !self.eat(b')') {
            return Err(self.err("expected `)` after exponent"));
        }
        Ok(if neg { -k } else { k })
    }

    fn primary(&mut self) -> Result<Ast> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.sum()?;
                if !self.eat(b')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' || c >= 0x80 => {
                let name = self.ident();
                if self.peek() == Some(b'(') {
                    self.pos += 1;
                    let arg = self.sum()?;
                    if !self.eat(b')') {
                        return Err(self.err("expected `)` after function argument"));
                    }
                    return Ok(Ast::Call(name, Box::new(arg)));
                }
                Ok(Ast::Ident(name))
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        let text = std::str::from_utf8(&self.src[start..]).unwrap_or("");
        let len: usize = text
            .char_indices()
            .take_while(|(_, ch)| ch.is_alphanumeric() || *ch == '_')
            .map(|(_, ch)| ch.len_utf8())
            .sum();
        self.pos += len;
        text[..len].to_string()
    }

    fn number(&mut self) -> Result<Ast> {
        let start = self.pos;
        let mut int_part = String::new();
        let mut frac_part = String::new();
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            int_part.push(self.src[self.pos] as char);
            self.pos += 1;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                frac_part.push(self.src[self.pos] as char);
                self.pos += 1;
            }
        }
        if int_part.is_empty() && frac_part.is_empty() {
            self.pos = start;
            return Err(self.err("malformed number"));
        }
        let mut exp10: i64 = -(frac_part.len() as i64);
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            let mut sign = 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'-' || self.src[self.pos] == b'+') {
                if self.src[self.pos] == b'-' {
                    sign = -1;
                }
                self.pos += 1;
            }
            let ds = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if ds == self.pos {
                // not an exponent; leave `e` for the identifier lexer
                self.pos = save;
            } else {
                let e: i64 = std::str::from_utf8(&self.src[ds..self.pos]).unwrap().parse().map_err(|_| self.err("bad exponent"))?;
                exp10 += sign * e;
            }
        }
        let digits = format!("{int_part}{frac_part}");
        let mantissa: BigInt = digits.parse().map_err(|_| self.err("malformed number"))?;
        let ten = BigRational::from_integer(BigInt::from(10));
        let scale = if exp10 >= 0 {
            num_traits::pow(ten, exp10 as usize)
        } else {
            num_traits::pow(ten.recip(), (-exp10) as usize)
        };
        let q = BigRational::from_integer(mantissa) * scale;
        Ok(Ast::Num(q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::expr::rational;

    #[test]
    fn parses_example_text() {
        let e = ScalarExpr::parse("2*x^2*exp(t*x) + 1/3").unwrap();
        let x = ScalarExpr::symbol("x");
        let t = ScalarExpr::symbol("t");
        let expect = x.pow(2).scale(&rational(2, 1)) * ScalarExpr::exp(t * &x) + ScalarExpr::ratio(1, 3);
        assert_eq!(e, expect);
    }

    #[test]
    fn decimals_are_exact() {
        assert_eq!(parse_rational("0.25").unwrap(), rational(1, 4));
        assert_eq!(parse_rational("1.5e-2").unwrap(), rational(3, 200));
        assert_eq!(parse_rational("-3/4").unwrap(), rational(-3, 4));
    }

    #[test]
    fn negative_exponents() {
        let a = ScalarExpr::parse("x^(-2)").unwrap();
        let b = ScalarExpr::parse("1/x^2").unwrap();
        assert_eq!(a, b);
        assert_eq!(ScalarExpr::parse("x^-1").unwrap(), ScalarExpr::symbol("x").pow(-1));
    }

    #[test]
    fn print_parse_round_trip() {
        for text in [
            "x - 2*y + 1/3",
            "-x^2*y^(-1) + exp(t*x)^2",
            "(x^2 + y^2)^(-1)*x - sin(x)*cos(2*y)",
            "exp(-x)",
        ] {
            let e = ScalarExpr::parse(text).unwrap();
            let again = ScalarExpr::parse(&e.to_string()).unwrap();
            assert_eq!(e, again, "{text} -> {e}");
        }
    }

    #[test]
    fn errors_carry_position() {
        assert!(matches!(ScalarExpr::parse("x + "), Err(Error::Parse { .. })));
        assert!(matches!(ScalarExpr::parse("foo(x)"), Err(Error::Parse { .. })));
        assert!(matches!(ScalarExpr::parse("x^y"), Err(Error::Parse { .. })));
    }
}
