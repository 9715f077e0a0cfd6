//! Small infix reader for series literals such as `-a^2*Z - 1/3*(H1 + H^2)*a^2*z0^2*Z`.
//!
//! Identifiers: `a`, `H`, `H1`..`H8` (Hubble derivatives), `m2`, `xi`, `z0`, `Z`, and the
//! curvature shorthands `R`, `Rd`, `Rdd`, `BoxR` (Ricci scalar, its derivatives, `(d_t^2 + 3H d_t) R`).
//! Division is only by single-term invertible factors.

use num_bigint::BigInt;
use num_rational::BigRational;

use super::poly::{CoeffPoly, GeomSymbol, MAX_H_ORDER};
use super::trunc::{TruncatedSeries, EXACT};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n: BigInt = src[start..i].parse().map_err(|_| Error::Parse { pos: start, msg: "bad integer".into() })?;
            out.push((start, Tok::Num(n)));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(Error::Parse { pos: i, msg: format!("unexpected character {c:?}") });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { pos: self.here(), msg: msg.into() })
    }

    fn expr(&mut self) -> Result<TruncatedSeries> {
        let mut acc = self.term()?;
        while let Some(Tok::Op(c)) = self.peek() {
            let c = *c;
            if c != '+' && c != '-' {
                break;
            }
            self.pos += 1;
            let rhs = self.term()?;
            acc = if c == '+' { acc.add(&rhs) } else { acc.sub(&rhs) };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<TruncatedSeries> {
        let mut acc = self.unary()?;
        while let Some(Tok::Op(c)) = self.peek() {
            let c = *c;
            if c != '*' && c != '/' {
                break;
            }
            self.pos += 1;
            let rhs = self.unary()?;
            acc = if c == '*' {
                acc.mul(&rhs)
            } else {
                match invert_single(&rhs) {
                    Some(inv) => acc.mul(&inv),
                    None => return self.err("division by a non-monomial factor"),
                }
            };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<TruncatedSeries> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(self.unary()?.neg());
        }
        if let Some(Tok::Op('+')) = self.peek() {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<TruncatedSeries> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let neg = if let Some(Tok::Op('-')) = self.peek() {
                self.pos += 1;
                true
            } else {
                false
            };
            let n: u32 = match self.peek() {
                Some(Tok::Num(n)) => match u32::try_from(n.clone()) {
                    Ok(v) => v,
                    Err(_) => return self.err("exponent too large"),
                },
                _ => return self.err("expected integer exponent"),
            };
            self.pos += 1;
            let p = base.pow(n);
            if neg {
                return match invert_single(&p) {
                    Some(inv) => Ok(inv),
                    None => self.err("negative power of a non-monomial factor"),
                };
            }
            return Ok(p);
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<TruncatedSeries> {
        let tok = match self.peek() {
            Some(t) => t.clone(),
            None => return self.err("unexpected end of input"),
        };
        self.pos += 1;
        match tok {
            Tok::Num(n) => Ok(TruncatedSeries::constant(CoeffPoly::constant(BigRational::from_integer(n)))),
            Tok::Op('(') => {
                let e = self.expr()?;
                if self.peek() != Some(&Tok::Op(')')) {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.pos -= 1;
                let s = ident(&name).map_or_else(|| self.err(format!("unknown identifier {name}")), Ok)?;
                self.pos += 1;
                Ok(s)
            }
            Tok::Op(c) => {
                self.pos -= 1;
                self.err(format!("unexpected '{c}'"))
            }
        }
    }
}

fn ident(name: &str) -> Option<TruncatedSeries> {
    let sym = match name {
        "z0" => return Some(TruncatedSeries::z0()),
        "Z" => return Some(TruncatedSeries::big_z()),
        "a" => GeomSymbol::A,
        "H" => GeomSymbol::H(0),
        "m2" => GeomSymbol::M2,
        "xi" => GeomSymbol::Xi,
        "R" | "Rd" | "Rdd" | "BoxR" => return parse_series(curvature(name), EXACT).ok(),
        _ => {
            let n: usize = name.strip_prefix('H')?.parse().ok()?;
            if n > MAX_H_ORDER {
                return None;
            }
            GeomSymbol::H(n as u8)
        }
    };
    Some(TruncatedSeries::constant(CoeffPoly::symbol(sym)))
}

/// Ricci scalar of the flat Robertson-Walker metric and its time derivatives.
fn curvature(name: &str) -> &'static str {
    match name {
        "R" => "-6*(H1 + 2*H^2)",
        "Rd" => "-6*(H2 + 4*H*H1)",
        "Rdd" => "-6*(H3 + 4*H1^2 + 4*H*H2)",
        _ => "-6*(H3 + 4*H1^2 + 4*H*H2) - 18*H*(H2 + 4*H*H1)",
    }
}

fn invert_single(s: &TruncatedSeries) -> Option<TruncatedSeries> {
    let mut it = s.terms();
    let ((p, q), c) = it.next()?;
    if it.next().is_some() {
        return None;
    }
    let inv = c.invert_monomial().ok()?;
    Some(TruncatedSeries::term(-p, -q, inv, EXACT))
}

/// Reads a series literal and truncates it at `max_weight`.
pub fn parse_series(src: &str, max_weight: i32) -> Result<TruncatedSeries> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, end: src.len() };
    let s = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(s.truncate(max_weight))
}

/// Reads a coefficient polynomial; `z0` and `Z` are rejected.
pub fn parse_poly(src: &str) -> Result<CoeffPoly> {
    let s = parse_series(src, EXACT)?;
    let mut out = CoeffPoly::zero();
    for ((p, q), c) in s.terms() {
        if p != 0 || q != 0 {
            return Err(Error::Parse { pos: 0, msg: "coefficient depends on z0 or Z".into() });
        }
        out = &out + c;
    }
    Ok(out)
}
