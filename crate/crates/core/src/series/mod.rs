//! Exact truncated double series in `z0` and `Z = |x - y|^2` with polynomial
//! coefficients in the scale factor, derivatives of the Hubble rate, `m^2` and `xi`.

mod parse;
mod poly;
mod rw;
mod trunc;
mod verify;

pub use parse::{parse_poly, parse_series};
pub use poly::{CoeffPoly, CompiledPoly, GeomSymbol, GeomValues, Monomial, MAX_H_ORDER};
pub use rw::{grad_pair, rw_operators, RwImage};
pub use trunc::{taylor_shift, weight, TruncatedSeries, EXACT};
pub use verify::verify;

use num_bigint::BigInt;
use num_rational::BigRational;

/// `n/d` as an exact rational.
pub fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}
