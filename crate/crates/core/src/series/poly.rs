use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Highest Hubble derivative representable in a monomial.
pub const MAX_H_ORDER: usize = 8;

const NSLOT: usize = MAX_H_ORDER + 4;
const SLOT_A: usize = 0;
const SLOT_M2: usize = MAX_H_ORDER + 2;
const SLOT_XI: usize = MAX_H_ORDER + 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GeomSymbol {
    /// Scale factor; negative powers allowed.
    A,
    /// `H^(n)`, the n-th time derivative of the Hubble rate.
    H(u8),
    M2,
    Xi,
}

impl GeomSymbol {
    fn slot(self) -> usize {
        match self {
            GeomSymbol::A => SLOT_A,
            GeomSymbol::H(n) => 1 + n as usize,
            GeomSymbol::M2 => SLOT_M2,
            GeomSymbol::Xi => SLOT_XI,
        }
    }
}

/// Exponent vector over `(a, H, H', ..., H^(MAX_H_ORDER), m^2, xi)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial([i32; NSLOT]);

impl Monomial {
    pub fn one() -> Self {
        Monomial([0; NSLOT])
    }

    pub fn of(sym: GeomSymbol, exp: i32) -> Self {
        let mut m = Self::one();
        m.0[sym.slot()] = exp;
        m
    }

    pub fn exponent(&self, sym: GeomSymbol) -> i32 {
        self.0[sym.slot()]
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// True when only the scale factor carries a nonzero exponent.
    pub fn is_pure_a(&self) -> bool {
        self.0.iter().skip(1).all(|&e| e == 0)
    }

    pub fn total_degree(&self) -> i32 {
        self.0.iter().sum()
    }

    fn mul(&self, other: &Self) -> Self {
        let mut out = [0; NSLOT];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.0[i] + other.0[i];
        }
        Monomial(out)
    }

    fn eval_with<T: Clone>(&self, vals: &[T; NSLOT], one: T, pow: impl Fn(&T, i32) -> T, mul: impl Fn(T, T) -> T) -> T {
        let mut acc = one;
        for (i, &e) in self.0.iter().enumerate() {
            if e != 0 {
                acc = mul(acc, pow(&vals[i], e));
            }
        }
        acc
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn slot_name(i: usize) -> String {
    match i {
        SLOT_A => "a".into(),
        1 => "H".into(),
        SLOT_M2 => "m2".into(),
        SLOT_XI => "xi".into(),
        n => format!("H{}", n - 1),
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            write!(f, "{}", slot_name(i))?;
            if e != 1 {
                write!(f, "^{e}")?;
            }
        }
        if first {
            write!(f, "1")?;
        }
        Ok(())
    }
}

/// Numeric values of the geometric symbols.
#[derive(Clone, Debug, PartialEq)]
pub struct GeomValues<T> {
    pub a: T,
    /// `h[n] = H^(n)`.
    pub h: [T; MAX_H_ORDER + 1],
    pub m2: T,
    pub xi: T,
}

impl<T: Clone> GeomValues<T> {
    fn slots(&self) -> [T; NSLOT] {
        std::array::from_fn(|i| match i {
            SLOT_A => self.a.clone(),
            SLOT_M2 => self.m2.clone(),
            SLOT_XI => self.xi.clone(),
            n => self.h[n - 1].clone(),
        })
    }
}

/// Polynomial with exact rational coefficients; zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct CoeffPoly {
    terms: BTreeMap<Monomial, BigRational>,
}

impl CoeffPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        Self::monomial(Monomial::one(), c)
    }

    pub fn int(n: i64) -> Self {
        Self::constant(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn symbol(sym: GeomSymbol) -> Self {
        Self::monomial(Monomial::of(sym, 1), BigRational::one())
    }

    pub fn monomial(m: Monomial, c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        CoeffPoly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// The rational value if the polynomial is a constant.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next()?;
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        CoeffPoly {
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    /// Time derivative with `d/dt a = a H` and `d/dt H^(n) = H^(n+1)`; `m^2`, `xi` constant.
    pub fn time_derive(&self) -> Result<Self> {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let ea = m.0[SLOT_A];
            if ea != 0 {
                let mut d = m.clone();
                d.0[1] += 1;
                out.add_term(d, c * BigRational::from_integer(ea.into()));
            }
            for n in 0..=MAX_H_ORDER {
                let e = m.0[1 + n];
                if e == 0 {
                    continue;
                }
                if n == MAX_H_ORDER {
                    return Err(Error::OrderExceeded { max: MAX_H_ORDER });
                }
                let mut d = m.clone();
                d.0[1 + n] -= 1;
                d.0[2 + n] += 1;
                out.add_term(d, c * BigRational::from_integer(e.into()));
            }
        }
        Ok(out)
    }

    /// `n`-fold time derivative.
    pub fn time_derive_n(&self, n: usize) -> Result<Self> {
        let mut p = self.clone();
        for _ in 0..n {
            p = p.time_derive()?;
        }
        Ok(p)
    }

    /// `(c, k)` when the polynomial is the single monomial `c a^k`.
    pub fn as_pure_a_monomial(&self) -> Option<(BigRational, i32)> {
        if self.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.terms.iter().next()?;
        m.is_pure_a().then(|| (c.clone(), m.0[SLOT_A]))
    }

    /// Inverse of a single invertible monomial `c a^k`.
    pub fn invert_monomial(&self) -> Result<Self> {
        let (c, k) = self
            .as_pure_a_monomial()
            .ok_or_else(|| Error::NotInvertible(format!("coefficient {self} is not of the form c*a^k")))?;
        Ok(Self::monomial(Monomial::of(GeomSymbol::A, -k), c.recip()))
    }

    /// Replace a symbol by a rational value. Negative powers need a nonzero value.
    pub fn substitute(&self, sym: GeomSymbol, value: &BigRational) -> Self {
        let slot = sym.slot();
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let e = m.0[slot];
            let mut r = m.clone();
            r.0[slot] = 0;
            let factor = rational_pow(value, e);
            out.add_term(r, c * factor);
        }
        out
    }

    /// Flat static background: `a = 1`, every `H^(n) = 0`.
    pub fn substitute_minkowski(&self) -> Self {
        let mut p = self.substitute(GeomSymbol::A, &BigRational::one());
        for n in 0..=MAX_H_ORDER {
            p = p.substitute(GeomSymbol::H(n as u8), &BigRational::zero());
        }
        p
    }

    pub fn eval_f64(&self, v: &GeomValues<f64>) -> f64 {
        let slots = v.slots();
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mv = m.eval_with(&slots, 1.0, |x, e| x.powi(e), |a, b| a * b);
            acc += c.to_f64().unwrap_or(f64::NAN) * mv;
        }
        acc
    }

    pub fn eval_rational(&self, v: &GeomValues<BigRational>) -> BigRational {
        let slots = v.slots();
        let mut acc = BigRational::zero();
        for (m, c) in &self.terms {
            let mv = m.eval_with(&slots, BigRational::one(), rational_pow, |a, b| a * b);
            acc += c * mv;
        }
        acc
    }

    /// Largest `|exponent|` of the given symbol.
    pub fn degree_in(&self, sym: GeomSymbol) -> i32 {
        self.terms.keys().map(|m| m.0[sym.slot()].abs()).max().unwrap_or(0)
    }

    /// Coefficient of `sym^k`, as a polynomial in the remaining symbols.
    pub fn coefficient_of(&self, sym: GeomSymbol, k: i32) -> Self {
        let slot = sym.slot();
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            if m.0[slot] == k {
                let mut r = m.clone();
                r.0[slot] = 0;
                out.add_term(r, c.clone());
            }
        }
        out
    }
}

/// Floating-point image of a [`CoeffPoly`] for repeated evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledPoly {
    terms: Vec<(f64, [i32; NSLOT])>,
}

impl CompiledPoly {
    pub fn eval(&self, v: &GeomValues<f64>) -> f64 {
        let slots = v.slots();
        let mut acc = 0.0;
        for (c, e) in &self.terms {
            let mut t = *c;
            for (x, &k) in slots.iter().zip(e.iter()) {
                if k != 0 {
                    t *= x.powi(k);
                }
            }
            acc += t;
        }
        acc
    }
}

impl CoeffPoly {
    pub fn compile(&self) -> CompiledPoly {
        CompiledPoly {
            terms: self.terms.iter().map(|(m, c)| (c.to_f64().unwrap_or(f64::NAN), m.0)).collect(),
        }
    }
}

fn rational_pow(x: &BigRational, e: i32) -> BigRational {
    if e >= 0 {
        num_traits::pow(x.clone(), e as usize)
    } else {
        num_traits::pow(x.recip(), e.unsigned_abs() as usize)
    }
}

impl fmt::Display for CoeffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            if m.is_one() {
                write!(f, "{abs}")?;
            } else if abs.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{abs}*{m}")?;
            }
        }
        Ok(())
    }
}

impl Add for &CoeffPoly {
    type Output = CoeffPoly;
    fn add(self, rhs: &CoeffPoly) -> CoeffPoly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &CoeffPoly {
    type Output = CoeffPoly;
    fn sub(self, rhs: &CoeffPoly) -> CoeffPoly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Neg for &CoeffPoly {
    type Output = CoeffPoly;
    fn neg(self) -> CoeffPoly {
        CoeffPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }
}

impl Mul for &CoeffPoly {
    type Output = CoeffPoly;
    fn mul(self, rhs: &CoeffPoly) -> CoeffPoly {
        let mut out = CoeffPoly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl $tr for CoeffPoly {
            type Output = CoeffPoly;
            fn $f(self, rhs: CoeffPoly) -> CoeffPoly {
                (&self).$f(&rhs)
            }
        }
        impl $tr<&CoeffPoly> for CoeffPoly {
            type Output = CoeffPoly;
            fn $f(self, rhs: &CoeffPoly) -> CoeffPoly {
                (&self).$f(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for CoeffPoly {
    type Output = CoeffPoly;
    fn neg(self) -> CoeffPoly {
        -&self
    }
}

impl From<BigRational> for CoeffPoly {
    fn from(c: BigRational) -> Self {
        CoeffPoly::constant(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::q;

    fn h(n: u8) -> CoeffPoly {
        CoeffPoly::symbol(GeomSymbol::H(n))
    }

    #[test]
    fn derivation_rule_on_powers_of_a() {
        let a2 = CoeffPoly::monomial(Monomial::of(GeomSymbol::A, 2), q(1, 1));
        let d = a2.time_derive().unwrap();
        assert_eq!(d.to_string(), "2*a^2*H");
        let am2 = CoeffPoly::monomial(Monomial::of(GeomSymbol::A, -2), q(1, 1));
        assert_eq!(am2.time_derive().unwrap().to_string(), "-2*a^-2*H");
    }

    #[test]
    fn derivation_of_hubble_chain() {
        let p = &h(0) * &h(0);
        assert_eq!(p.time_derive().unwrap(), (&h(0) * &h(1)).scale(&q(2, 1)));
        let top = h(MAX_H_ORDER as u8);
        assert_eq!(top.time_derive(), Err(Error::OrderExceeded { max: MAX_H_ORDER }));
    }

    #[test]
    fn constants_have_zero_derivative() {
        let p = &CoeffPoly::symbol(GeomSymbol::M2) * &CoeffPoly::symbol(GeomSymbol::Xi);
        assert!(p.time_derive().unwrap().is_zero());
    }

    #[test]
    fn substitution_and_evaluation_agree() {
        let p = &(&h(0) * &h(1)) + &CoeffPoly::monomial(Monomial::of(GeomSymbol::A, -2), q(3, 2));
        let mut v = GeomValues { a: q(2, 1), h: std::array::from_fn(|_| q(0, 1)), m2: q(0, 1), xi: q(0, 1) };
        v.h[0] = q(1, 3);
        v.h[1] = q(5, 1);
        assert_eq!(p.eval_rational(&v), q(5, 3) + q(3, 8));
        let mut vf = GeomValues { a: 2.0, h: [0.0; MAX_H_ORDER + 1], m2: 0.0, xi: 0.0 };
        vf.h[0] = 1.0 / 3.0;
        vf.h[1] = 5.0;
        assert!((p.eval_f64(&vf) - (5.0 / 3.0 + 3.0 / 8.0)).abs() < 1e-15);
    }
}
