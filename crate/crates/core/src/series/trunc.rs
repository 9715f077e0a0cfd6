use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use super::poly::CoeffPoly;
use crate::error::{Error, Result};

/// Truncation weight of a series known to all orders.
pub const EXACT: i32 = 1 << 28;

/// Weight of `z0^p Z^q`.
pub fn weight(p: i32, q: i32) -> i32 {
    p + 2 * q
}

fn norm(w: i32) -> i32 {
    if w >= EXACT / 2 {
        EXACT
    } else {
        w
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Slot {
    p: i32,
    q: i32,
}

impl Slot {
    fn weight(self) -> i32 {
        weight(self.p, self.q)
    }
}

impl Ord for Slot {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight().cmp(&other.weight()).then(self.q.cmp(&other.q))
    }
}

impl PartialOrd for Slot {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `sum c_{pq} z0^p Z^q`, exact for every term of weight `p + 2q <= max_weight`.
/// Negative `q` (and `p`) are allowed so Laurent factors such as `1/Z` stay representable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedSeries {
    terms: BTreeMap<Slot, CoeffPoly>,
    max_weight: i32,
}

impl TruncatedSeries {
    pub fn zero(max_weight: i32) -> Self {
        TruncatedSeries { terms: BTreeMap::new(), max_weight: norm(max_weight) }
    }

    pub fn constant(c: CoeffPoly) -> Self {
        Self::term(0, 0, c, EXACT)
    }

    pub fn one() -> Self {
        Self::constant(CoeffPoly::one())
    }

    pub fn z0() -> Self {
        Self::term(1, 0, CoeffPoly::one(), EXACT)
    }

    pub fn big_z() -> Self {
        Self::term(0, 1, CoeffPoly::one(), EXACT)
    }

    pub fn term(p: i32, q: i32, c: CoeffPoly, max_weight: i32) -> Self {
        let mut s = Self::zero(max_weight);
        s.add_term(p, q, c);
        s
    }

    pub fn max_weight(&self) -> i32 {
        self.max_weight
    }

    pub fn is_exact(&self) -> bool {
        self.max_weight == EXACT
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Smallest weight carrying a nonzero coefficient, `max_weight + 1` if none.
    pub fn valuation(&self) -> i32 {
        self.terms
            .keys()
            .next()
            .map(|s| s.weight())
            .unwrap_or_else(|| norm(self.max_weight.saturating_add(1)))
    }

    pub fn coeff(&self, p: i32, q: i32) -> CoeffPoly {
        self.terms.get(&Slot { p, q }).cloned().unwrap_or_default()
    }

    /// Nonzero terms in ascending weight.
    pub fn terms(&self) -> impl Iterator<Item = ((i32, i32), &CoeffPoly)> {
        self.terms.iter().map(|(s, c)| ((s.p, s.q), c))
    }

    /// Adds `c z0^p Z^q`; terms beyond `max_weight` are dropped.
    pub fn add_term(&mut self, p: i32, q: i32, c: CoeffPoly) {
        if c.is_zero() || weight(p, q) > self.max_weight {
            return;
        }
        let slot = Slot { p, q };
        let merged = match self.terms.remove(&slot) {
            Some(old) => &old + &c,
            None => c,
        };
        if !merged.is_zero() {
            self.terms.insert(slot, merged);
        }
    }

    pub fn truncate(&self, max_weight: i32) -> Self {
        let w = norm(self.max_weight.min(max_weight));
        TruncatedSeries {
            terms: self.terms.iter().filter(|(s, _)| s.weight() <= w).map(|(s, c)| (*s, c.clone())).collect(),
            max_weight: w,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.max_weight.min(other.max_weight));
        for (s, c) in self.terms.iter().chain(other.terms.iter()) {
            out.add_term(s.p, s.q, c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        TruncatedSeries {
            terms: self.terms.iter().map(|(s, c)| (*s, -c)).collect(),
            max_weight: self.max_weight,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// Product, exact up to `min(w_a + v_b, w_b + v_a)` where `v` is the valuation.
    pub fn mul(&self, other: &Self) -> Self {
        let wa = self.max_weight.saturating_add(other.valuation());
        let wb = other.max_weight.saturating_add(self.valuation());
        let w = norm(wa.min(wb));
        let mut acc: BTreeMap<Slot, CoeffPoly> = BTreeMap::new();
        for (sa, ca) in &self.terms {
            for (sb, cb) in &other.terms {
                let s = Slot { p: sa.p + sb.p, q: sa.q + sb.q };
                if s.weight() > w {
                    continue;
                }
                let prod = ca * cb;
                let e = acc.entry(s).or_default();
                *e = &*e + &prod;
            }
        }
        acc.retain(|_, c| !c.is_zero());
        TruncatedSeries { terms: acc, max_weight: w }
    }

    pub fn scale(&self, c: &CoeffPoly) -> Self {
        let mut out = Self::zero(self.max_weight);
        for (s, v) in &self.terms {
            out.add_term(s.p, s.q, v * c);
        }
        out
    }

    pub fn scale_rational(&self, c: &BigRational) -> Self {
        let mut out = Self::zero(self.max_weight);
        for (s, v) in &self.terms {
            out.add_term(s.p, s.q, v.scale(c));
        }
        out
    }

    /// Multiplication by `z0^p Z^q`.
    pub fn shift(&self, p: i32, q: i32) -> Self {
        let dw = weight(p, q);
        TruncatedSeries {
            terms: self.terms.iter().map(|(s, c)| (Slot { p: s.p + p, q: s.q + q }, c.clone())).collect(),
            max_weight: if self.is_exact() { EXACT } else { norm(self.max_weight + dw) },
        }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn d_z0(&self) -> Self {
        let mut out = Self::zero(if self.is_exact() { EXACT } else { self.max_weight - 1 });
        for (s, c) in &self.terms {
            if s.p != 0 {
                out.add_term(s.p - 1, s.q, c.scale(&int(s.p as i64)));
            }
        }
        out
    }

    pub fn d_big_z(&self) -> Self {
        let mut out = Self::zero(if self.is_exact() { EXACT } else { self.max_weight - 2 });
        for (s, c) in &self.terms {
            if s.q != 0 {
                out.add_term(s.p, s.q - 1, c.scale(&int(s.q as i64)));
            }
        }
        out
    }

    /// Coefficient-wise time derivative at fixed `z0`, `Z`.
    pub fn time_derive(&self) -> Result<Self> {
        let mut out = Self::zero(self.max_weight);
        for (s, c) in &self.terms {
            out.add_term(s.p, s.q, c.time_derive()?);
        }
        Ok(out)
    }

    /// Coefficient of `z0^j` as a series in `Z` alone.
    pub fn coeff_z0(&self, j: i32) -> Self {
        let mut out = Self::zero(if self.is_exact() { EXACT } else { self.max_weight - j });
        for (s, c) in &self.terms {
            if s.p == j {
                out.add_term(0, s.q, c.clone());
            }
        }
        out
    }

    /// Exchanges the two points: `c(y0) z0^p Z^q -> c(y0 + z0) (-z0)^p Z^q`, with
    /// `c(y0 + z0)` Taylor expanded about `y0`.
    pub fn swap_arguments(&self) -> Result<Self> {
        if self.is_exact() {
            return Err(Error::InfinitePrecision);
        }
        let w = self.max_weight;
        let mut out = Self::zero(w);
        for (s, c) in &self.terms {
            let order = w - s.weight();
            let shifted = taylor_shift(c, order)?;
            let sign = if s.p % 2 == 0 { 1 } else { -1 };
            let mut tail = Self::zero(w);
            for (t, tc) in &shifted.terms {
                tail.add_term(t.p + s.p, s.q, tc.scale(&int(sign)));
            }
            out = out.add(&tail);
        }
        Ok(out)
    }

    /// `1/s` given the leading monomial `z0^p Z^q` of `s`.
    ///
    /// After dividing out the monomial, the `z0^0 Z^0` coefficient must be `c a^k` and every
    /// other term must have positive weight.
    pub fn reciprocal(&self, leading: (i32, i32)) -> Result<Self> {
        let (p, q) = leading;
        let lw = weight(p, q);
        let body = self.shift(-p, -q);
        let c = body.coeff(0, 0);
        if c.is_zero() {
            return Err(Error::NotInvertible(format!("no z0^{p} Z^{q} term")));
        }
        let cinv = CoeffPoly::invert_monomial(&c)?;
        if let Some((s, _)) = body.terms.iter().find(|(s, _)| s.weight() <= 0 && !(s.p == 0 && s.q == 0)) {
            return Err(Error::NotInvertible(format!(
                "term z0^{} Z^{} does not lie above the declared leading monomial",
                s.p + p,
                s.q + q
            )));
        }
        let x = body.scale(&cinv).sub(&Self::one());
        if body.is_exact() && !x.is_zero() {
            return Err(Error::InfinitePrecision);
        }
        let nmax = if x.is_zero() { 0 } else { body.max_weight.max(0) };
        let minus_x = x.neg();
        let mut term = Self::one();
        let mut acc = Self::one();
        for _ in 0..nmax {
            term = term.mul(&minus_x);
            acc = acc.add(&term);
        }
        let inv_body = acc.truncate(body.max_weight).scale(&cinv);
        let out = inv_body.shift(-p, -q);
        Ok(if out.is_exact() { out } else { out.truncate(body.max_weight - lw) })
    }

    fn require_positive_weight(&self) -> Result<()> {
        if let Some((s, _)) = self.terms.iter().find(|(s, _)| s.weight() <= 0) {
            return Err(Error::NonPositiveWeight { p: s.p, q: s.q });
        }
        Ok(())
    }

    /// `log(1 + s)`; every term of `s` must have positive weight.
    pub fn log1p(&self) -> Result<Self> {
        self.require_positive_weight()?;
        if self.is_zero() {
            return Ok(Self::zero(self.max_weight));
        }
        if self.is_exact() {
            return Err(Error::InfinitePrecision);
        }
        let mut acc = Self::zero(self.max_weight);
        let mut power = Self::one();
        for n in 1..=self.max_weight.max(0) {
            power = power.mul(self);
            let sign = if n % 2 == 1 { 1 } else { -1 };
            acc = acc.add(&power.scale_rational(&BigRational::new(BigInt::from(sign), BigInt::from(n))));
        }
        Ok(acc)
    }

    /// `exp(s) = sum s^n/n!`; every term of `s` must have positive weight.
    pub fn exp(&self) -> Result<Self> {
        self.require_positive_weight()?;
        if self.is_zero() {
            return Ok(Self::one());
        }
        if self.is_exact() {
            return Err(Error::InfinitePrecision);
        }
        let mut acc = Self::one();
        let mut power = Self::one();
        let mut fact = BigInt::one();
        for n in 1..=self.max_weight.max(0) {
            power = power.mul(self);
            fact *= BigInt::from(n);
            acc = acc.add(&power.scale_rational(&BigRational::new(BigInt::one(), fact.clone())));
        }
        Ok(acc.truncate(self.max_weight))
    }

    /// Applies `f` to every coefficient.
    pub fn map_coeffs(&self, f: impl Fn(&CoeffPoly) -> CoeffPoly) -> Self {
        let mut out = Self::zero(self.max_weight);
        for (s, c) in &self.terms {
            out.add_term(s.p, s.q, f(c));
        }
        out
    }

    /// Canonical text form, one slot per line in ascending weight.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if self.is_exact() {
            out.push_str("max_weight exact\n");
        } else {
            out.push_str(&format!("max_weight {}\n", self.max_weight));
        }
        for (s, c) in &self.terms {
            out.push_str(&format!("z0^{} Z^{} : {}\n", s.p, s.q, c));
        }
        out
    }
}

impl fmt::Display for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// `sum_{j <= order} z0^j / j! d^j c / dt^j`: a coefficient evaluated at `y0 + z0`.
pub fn taylor_shift(c: &CoeffPoly, order: i32) -> Result<TruncatedSeries> {
    let mut out = TruncatedSeries::zero(order);
    let mut d = c.clone();
    let mut fact = BigInt::one();
    for j in 0..=order.max(-1) {
        if j > 0 {
            if d.is_zero() {
                break;
            }
            d = d.time_derive()?;
            fact *= BigInt::from(j);
        }
        out.add_term(j, 0, d.scale(&BigRational::new(BigInt::one(), fact.clone())));
    }
    Ok(out)
}
