use super::poly::{CoeffPoly, GeomSymbol, Monomial};
use super::trunc::{taylor_shift, TruncatedSeries};
use crate::error::{Error, Result};
use num_rational::BigRational;
use num_traits::One;

/// Images of a two-point series under the wave-operator pieces acting on `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct RwImage {
    /// `d/dz0`.
    pub d0: TruncatedSeries,
    /// Flat spatial Laplacian in the `Z` variable: `6 s_Z + 4 Z s_ZZ`.
    pub laplacian: TruncatedSeries,
    /// `d0^2 s + 3 H(x0) d0 s - a(x0)^-2 laplacian(s)`.
    pub box_s: TruncatedSeries,
}

fn shifted(sym_poly: &CoeffPoly, s: &TruncatedSeries) -> Result<TruncatedSeries> {
    if s.is_exact() {
        return Err(Error::InfinitePrecision);
    }
    taylor_shift(sym_poly, s.max_weight())
}

fn a_inv2() -> CoeffPoly {
    CoeffPoly::monomial(Monomial::of(GeomSymbol::A, -2), BigRational::one())
}

fn laplacian(s: &TruncatedSeries) -> TruncatedSeries {
    let sz = s.d_big_z();
    let szz = sz.d_big_z();
    sz.scale(&CoeffPoly::int(6)).add(&szz.shift(0, 1).scale(&CoeffPoly::int(4)))
}

pub fn rw_operators(s: &TruncatedSeries) -> Result<RwImage> {
    let h_x = shifted(&CoeffPoly::symbol(GeomSymbol::H(0)), s)?;
    let ai2_x = shifted(&a_inv2(), s)?;
    let d0 = s.d_z0();
    let lap = laplacian(s);
    let box_s = d0
        .d_z0()
        .add(&h_x.mul(&d0).scale(&CoeffPoly::int(3)))
        .sub(&ai2_x.mul(&lap));
    Ok(RwImage { d0, laplacian: lap, box_s })
}

/// `g(ds, du) = d0 s d0 u - a(x0)^-2 4 Z s_Z u_Z`.
pub fn grad_pair(s: &TruncatedSeries, u: &TruncatedSeries) -> Result<TruncatedSeries> {
    let w = s.max_weight().min(u.max_weight());
    if w >= super::trunc::EXACT {
        return Err(Error::InfinitePrecision);
    }
    let ai2_x = taylor_shift(&a_inv2(), w)?;
    let time = s.d_z0().mul(&u.d_z0());
    let space = s.d_big_z().mul(&u.d_big_z()).shift(0, 1).scale(&CoeffPoly::int(4));
    Ok(time.sub(&ai2_x.mul(&space)))
}
