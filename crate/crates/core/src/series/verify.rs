//! Exact self-checks of the series engine on inputs with known closed forms.

use super::{q, rw_operators, CoeffPoly, GeomSymbol, TruncatedSeries};
use crate::report::{Report, Status};
use crate::Result;

const S: &str = "series";

fn sym(s: GeomSymbol) -> CoeffPoly {
    CoeffPoly::symbol(s)
}

fn zero_check(r: &mut Report, name: &str, res: Result<TruncatedSeries>) {
    match res {
        Ok(s) if s.is_zero() => r.push(S, name, Status::Pass, ""),
        Ok(s) => r.push(S, name, Status::Fail, format!("residual\n{}", s.render())),
        Err(e) => r.push(S, name, Status::Fail, e.to_string()),
    }
}

pub fn verify() -> Report {
    let mut r = Report::default();
    let w = 4;
    let a = sym(GeomSymbol::A);
    let h = sym(GeomSymbol::H(0));

    r.pass_if(S, "d/dt a = a H", a.time_derive().ok() == Some(&a * &h), "");
    r.pass_if(
        S,
        "d/dt H^(n) = H^(n+1)",
        (0..3).all(|n| sym(GeomSymbol::H(n)).time_derive().ok() == Some(sym(GeomSymbol::H(n + 1)))),
        "",
    );

    // Lap Z^q = 2q(2q + 1) Z^(q-1) in three dimensions.
    zero_check(&mut r, "flat Laplacian of Z^-1 and Z^2", (|| {
        let mut s = TruncatedSeries::zero(w);
        s.add_term(0, -1, CoeffPoly::int(1));
        s.add_term(0, 2, CoeffPoly::int(1));
        let mut want = TruncatedSeries::zero(w - 2);
        want.add_term(0, -2, CoeffPoly::int(2));
        want.add_term(0, 1, CoeffPoly::int(20));
        Ok(rw_operators(&s)?.laplacian.sub(&want))
    })());

    let x = TruncatedSeries::term(1, 0, h.clone(), w).add(&TruncatedSeries::term(0, 1, &a * &a, w));
    zero_check(&mut r, "exp(log(1 + x)) = 1 + x", (|| Ok(x.log1p()?.exp()?.truncate(w).sub(&TruncatedSeries::one().add(&x).truncate(w))))());
    zero_check(&mut r, "(1 + x)^-1 (1 + x) = 1", (|| {
        let s = TruncatedSeries::one().add(&x);
        Ok(s.mul(&s.reciprocal((0, 0))?).truncate(w).sub(&TruncatedSeries::one().truncate(w)))
    })());

    // Swapping the points sends z0 to -z0 and re-expands coefficients about the other point.
    zero_check(&mut r, "swap sends z0 to -z0", (|| Ok(TruncatedSeries::term(1, 0, CoeffPoly::int(1), w).swap_arguments()?.add(&TruncatedSeries::term(1, 0, CoeffPoly::int(1), w))))());
    zero_check(&mut r, "swap is an involution", (|| {
        let s = TruncatedSeries::term(0, 1, a.clone(), w).add(&TruncatedSeries::term(2, 0, h.clone(), w));
        Ok(s.swap_arguments()?.swap_arguments()?.sub(&s))
    })());
    zero_check(&mut r, "Leibniz rule for d/dt", (|| {
        let u = TruncatedSeries::term(0, 0, &a * &h, w).add(&TruncatedSeries::term(1, 1, sym(GeomSymbol::M2), w));
        let v = TruncatedSeries::term(0, 1, a.clone(), w).add(&TruncatedSeries::term(2, 0, CoeffPoly::constant(q(1, 3)), w));
        let lhs = u.mul(&v).time_derive()?;
        Ok(lhs.sub(&u.time_derive()?.mul(&v).add(&u.mul(&v.time_derive()?))))
    })());
    r
}

#[cfg(test)]
mod tests {
    #[test]
    fn report_passes() {
        let r = super::verify();
        assert!(r.passed(), "{}", r.render());
    }
}
