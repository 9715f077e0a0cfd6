//! Trace equation of motion: assembly, the `H'''` solve and the run driver.
//!
//! Every mode integral enters as `int g d^3k - c K3`, where `g` has its `k^-3` part removed,
//! `c` is the `k^-3` coefficient and `K3 = int (1 - chi)/k^3 d^3k + zero_mode`. Only `c` depends on
//! `H'''`, so the right side is affine in it and two evaluations fix the slope exactly.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use super::init::build_modes;
use super::integrator::{Dopri, RunSummary, StepStats, Tolerances};
use super::{geometry_of, mode_rhs_raw, DynamicsOptions, GeneralForm, InitialData, LawChoice, SystemState, GEO_LEN};
use crate::error::{Error, Result};
use crate::quadrature::{
    k3_subtracted_integral, minkowski_integrand, subtracted_integral_unchecked, Integral, ModeGrid, RegularizedPairing,
};
use crate::subtraction::{homogeneous_term, v1_value, CouplingConfig, GeometryState, SubtractionCoefficients};

const EIGHT_PI3: f64 = 8.0 * PI * PI * PI;
/// Relative closeness to `-1/(2880 pi^2)` that selects the second-order branch.
const WALD_TOL: f64 = 1e-9;

/// Which right side is solved for `H'''`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TraceLaw {
    /// `xi = 1/6`, explicit in `H'''`.
    Conformal,
    /// `xi = 1/6` with the `Box R` coefficient cancelled: algebraic in `H'`.
    ConformalWald,
    General,
}

/// Result of one geometry solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeometrySolve {
    pub hdddot: f64,
    /// `lhs - rhs` re-evaluated at the solution.
    pub residual: f64,
    /// `d rhs / d H'''`.
    pub slope: f64,
    /// Zero for the affine solve; fixed-point iterations otherwise.
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceDiagnostics {
    /// `-R`.
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// `-R / (8 pi G)`.
    pub rho_minus_3p: f64,
}

/// `g`-part integrals; `None` where the law does not need them.
struct Parts {
    phi: Integral,
    pipi: Option<Integral>,
    kphi: Option<Integral>,
}

pub struct Dynamics {
    grid: ModeGrid,
    cfg: CouplingConfig,
    opts: DynamicsOptions,
    law: TraceLaw,
    k3: f64,
    k3_tail: f64,
}

impl Dynamics {
    pub fn new(grid: ModeGrid, cfg: CouplingConfig, opts: DynamicsOptions) -> Result<Self> {
        cfg.validate()?;
        RegularizedPairing::new(opts.pairing.s)?;
        if !(opts.rtol > 0.0 && opts.atol >= 0.0 && opts.dt_initial > 0.0 && opts.dt_max >= opts.dt_initial) {
            return Err(Error::Config("need rtol > 0, atol >= 0 and 0 < dt_initial <= dt_max".into()));
        }
        if !(opts.damping > 0.0 && opts.damping <= 1.0) {
            return Err(Error::Config(format!("damping must lie in (0, 1], got {}", opts.damping)));
        }
        let conformal_c = 1.0 / (2880.0 * PI * PI) + cfg.c_dprime;
        let wald = conformal_c.abs() <= WALD_TOL / (2880.0 * PI * PI);
        let law = match (opts.law, cfg.is_conformal()) {
            (LawChoice::General, _) | (LawChoice::Auto, false) => TraceLaw::General,
            (LawChoice::Conformal, false) => {
                return Err(Error::Config(format!("the conformal law needs xi = 1/6, got {}", cfg.xi)));
            }
            (_, true) if wald => TraceLaw::ConformalWald,
            (_, true) => TraceLaw::Conformal,
        };
        let kern: Vec<f64> =
            grid.nodes().iter().map(|&k| opts.pairing.one_minus_chi(k) / (k * k * k)).collect();
        let ki = subtracted_integral_unchecked(&grid, &kern, 3.0)?;
        Ok(Dynamics { k3: ki.value + opts.pairing.zero_mode(), k3_tail: ki.tail, grid, cfg, opts, law })
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }

    pub fn cfg(&self) -> &CouplingConfig {
        &self.cfg
    }

    pub fn opts(&self) -> &DynamicsOptions {
        &self.opts
    }

    pub fn law(&self) -> TraceLaw {
        self.law
    }

    fn check_modes(&self, modes: &[f64]) -> Result<()> {
        if modes.len() != 3 * self.grid.len() {
            return Err(Error::InvalidGrid(format!("{} mode values for {} nodes", modes.len() / 3, self.grid.len())));
        }
        Ok(())
    }

    fn parts(&self, geo: &GeometryState, modes: &[f64], sc: &SubtractionCoefficients) -> Result<Parts> {
        let a = geo.a;
        let a2 = a * a;
        let nodes = self.grid.nodes();
        let phi_g: Vec<f64> = nodes.iter().zip(modes.chunks_exact(3)).map(|(&k, g)| g[0] - 1.0 / (2.0 * k * a2)).collect();
        let phi = subtracted_integral_unchecked(&self.grid, &phi_g, 3.0)?;
        if self.law != TraceLaw::General {
            return Ok(Parts { phi, pipi: None, kphi: None });
        }
        let g1 = a2 * a2 * geo.h * geo.h + sc.gamma1;
        let pipi_g: Vec<f64> = nodes
            .iter()
            .zip(modes.chunks_exact(3))
            .map(|(&k, g)| g[2] - a2 * k / 2.0 - g1 / (2.0 * k))
            .collect();
        let kphi_g: Vec<f64> = nodes
            .iter()
            .zip(&phi_g)
            .map(|(&k, &d)| k * k * d - sc.alpha3 / (2.0 * k))
            .collect();
        Ok(Parts {
            phi,
            pipi: Some(subtracted_integral_unchecked(&self.grid, &pipi_g, 3.0)?),
            kphi: Some(subtracted_integral_unchecked(&self.grid, &kphi_g, 3.0)?),
        })
    }

    /// `int (g - c k^-3_reg) d^3k`.
    fn reg(&self, i: &Integral, c: f64) -> f64 {
        i.value - c * self.k3
    }

    /// Right side of the trace equation (including the `8 pi G` factor).
    fn rhs_side(&self, geo: &GeometryState, hddd: f64, parts: &Parts) -> f64 {
        let cfg = &self.cfg;
        let m2 = cfg.m2();
        let r = geo.ricci();
        let box_r = geo.box_ricci(hddd);
        let log = cfg.log_a2_over_lambda2(geo.a);
        let sc = SubtractionCoefficients::new(geo, hddd, 0.0, cfg);
        let inner = match self.law {
            TraceLaw::Conformal | TraceLaw::ConformalWald => {
                let box_c = match self.law {
                    TraceLaw::ConformalWald => 0.0,
                    _ => 1.0 / (2880.0 * PI * PI) + cfg.c_dprime,
                };
                let phi2 = self.reg(&parts.phi, sc.alpha3 / 2.0) / EIGHT_PI3;
                let (h, hd) = (geo.h, geo.hd);
                m2 * phi2
                    + m2 * (1.0 / 72.0 + cfg.c_prime) * r
                    + (hd * h * h + h * h * h * h) / (240.0 * PI * PI)
                    + box_c * box_r
                    + m2 * m2 * log / (4.0 * PI * PI)
                    - m2 * m2 * (1.0 / (32.0 * PI * PI) - cfg.c)
            }
            TraceLaw::General => {
                let xi = cfg.xi;
                let a2 = geo.a * geo.a;
                let i_phi = self.reg(&parts.phi, sc.alpha3 / 2.0);
                let i_pipi = self.reg(parts.pipi.as_ref().expect("general parts"), sc.gamma3 / 2.0);
                let i_kphi = self.reg(parts.kphi.as_ref().expect("general parts"), sc.alpha5 / 2.0);
                let (grad, mass) = match self.opts.general_form {
                    GeneralForm::Derived => (-1.0, (2.0 - 6.0 * xi) * m2),
                    GeneralForm::Printed => (1.0, 6.0 * xi * m2),
                };
                (6.0 * xi - 1.0) * (i_pipi / (a2 * a2 * a2) + grad * i_kphi / a2) / EIGHT_PI3
                    + (mass + (6.0 * xi - 1.0) * xi * r) * i_phi / EIGHT_PI3
                    - homogeneous_term(geo, hddd, cfg) / (4.0 * PI * PI)
                    + (36.0 * xi - 5.0) * v1_value(geo, hddd, cfg) / (4.0 * PI * PI)
                    + cfg.c * m2 * m2
                    + cfg.c_prime * m2 * r
                    + cfg.c_dprime * box_r
            }
        };
        cfg.eight_pi_g() * inner
    }

    fn diagnostics_from(&self, geo: &GeometryState, hddd: f64, parts: &Parts) -> TraceDiagnostics {
        let lhs = -geo.ricci();
        let rhs = self.rhs_side(geo, hddd, parts);
        TraceDiagnostics { lhs, rhs, residual: lhs - rhs, rho_minus_3p: lhs / self.cfg.eight_pi_g() }
    }

    /// Both sides of the trace equation at the given `H'''`.
    pub fn trace_diagnostics(&self, state: &SystemState, hddd: f64) -> Result<TraceDiagnostics> {
        let modes = state.modes.as_flattened();
        self.check_modes(modes)?;
        state.geo.validate()?;
        let sc = SubtractionCoefficients::new(&state.geo, hddd, 0.0, &self.cfg);
        Ok(self.diagnostics_from(&state.geo, hddd, &self.parts(&state.geo, modes, &sc)?))
    }

    /// `<phi^2>_ren` with its tail bound, both divided by `8 pi^3`; errors when the tail exceeds the budget.
    pub fn phi2_renormalized(&self, state: &SystemState) -> Result<Integral> {
        self.phi2(state, true)
    }

    /// As [`Self::phi2_renormalized`] but reports an over-budget tail instead of failing.
    pub fn phi2_estimate(&self, state: &SystemState) -> Result<Integral> {
        self.phi2(state, false)
    }

    fn phi2(&self, state: &SystemState, checked: bool) -> Result<Integral> {
        let modes = state.modes.as_flattened();
        self.check_modes(modes)?;
        let sc = SubtractionCoefficients::new(&state.geo, 0.0, 0.0, &self.cfg);
        let phi_g: Vec<f64> = self
            .grid
            .nodes()
            .iter()
            .zip(modes.chunks_exact(3))
            .map(|(&k, g)| g[0] - 1.0 / (2.0 * k * state.geo.a * state.geo.a))
            .collect();
        let i = k3_subtracted_integral(&self.grid, &phi_g, sc.alpha3 / 2.0, &self.opts.pairing, 3.0, checked)?;
        Ok(Integral { value: i.value / EIGHT_PI3, tail: i.tail / EIGHT_PI3 })
    }

    /// Tail estimate of the `<phi^2>` integrand beyond `k_max`, divided by `8 pi^3`.
    pub fn phi2_tail(&self, state: &SystemState) -> Result<f64> {
        let modes = state.modes.as_flattened();
        self.check_modes(modes)?;
        let sc = SubtractionCoefficients::new(&state.geo, 0.0, 0.0, &self.cfg);
        let parts = self.parts(&state.geo, modes, &sc)?;
        Ok((parts.phi.tail - sc.alpha3 / 2.0 * self.k3_tail) / EIGHT_PI3)
    }

    fn solve_affine(&self, geo: &GeometryState, parts: &Parts, guess: f64) -> Result<GeometrySolve> {
        let lhs = -geo.ricci();
        let r0 = self.rhs_side(geo, guess, parts);
        let step = guess.abs().max(1.0);
        let r1 = self.rhs_side(geo, guess + step, parts);
        let slope = (r1 - r0) / step;
        let scale = lhs.abs().max(r0.abs()).max(r1.abs()).max(1.0);
        if slope.abs() > 1e-14 * scale && slope.is_finite() {
            let h = guess + (lhs - r0) / slope;
            let residual = lhs - self.rhs_side(geo, h, parts);
            return Ok(GeometrySolve { hdddot: h, residual, slope, iterations: 0 });
        }
        if self.law == TraceLaw::Conformal {
            return Err(Error::SingularCoefficient(slope));
        }
        // Damped fixed point on h -> h + residual(h).
        let mut h = guess;
        for it in 1..=self.opts.max_fixed_point {
            let res = lhs - self.rhs_side(geo, h, parts);
            if res.abs() <= 1e-12 * scale {
                return Ok(GeometrySolve { hdddot: h, residual: res, slope, iterations: it });
            }
            h += self.opts.damping * res;
            if !h.is_finite() {
                break;
            }
        }
        Err(Error::Degenerate { coeff: slope, iterations: self.opts.max_fixed_point })
    }

    fn solve_at(&self, geo: &GeometryState, modes: &[f64], guess: f64) -> Result<GeometrySolve> {
        let sc = SubtractionCoefficients::new(geo, 0.0, 0.0, &self.cfg);
        let parts = self.parts(geo, modes, &sc)?;
        self.solve_affine(geo, &parts, guess)
    }

    /// Explicit conformal solve for `H'''`.
    pub fn conformal_geometry_rhs(&self, state: &SystemState) -> Result<GeometrySolve> {
        if self.law != TraceLaw::Conformal {
            return Err(Error::Config(format!("conformal explicit solve requested under {:?}", self.law)));
        }
        let modes = state.modes.as_flattened();
        self.check_modes(modes)?;
        state.geo.validate()?;
        self.solve_at(&state.geo, modes, 0.0)
    }

    /// Affine solve of the general equation, probing at `guess` and `guess + max(1, |guess|)`.
    pub fn general_geometry_solve(&self, state: &SystemState, guess: f64) -> Result<GeometrySolve> {
        if self.law != TraceLaw::General {
            return Err(Error::Config(format!("general solve requested under {:?}", self.law)));
        }
        let modes = state.modes.as_flattened();
        self.check_modes(modes)?;
        state.geo.validate()?;
        self.solve_at(&state.geo, modes, guess)
    }

    /// `H'` satisfying the second-order trace relation; the right side is affine in `H'` there.
    fn wald_hdot(&self, geo: &GeometryState, modes: &[f64]) -> Result<f64> {
        let sc = SubtractionCoefficients::new(geo, 0.0, 0.0, &self.cfg);
        let parts = self.parts(geo, modes, &sc)?;
        let at = |hd: f64| {
            let g = GeometryState { hd, hdd: 0.0, ..*geo };
            let d = self.diagnostics_from(&g, 0.0, &parts);
            d.residual
        };
        let (r0, r1) = (at(0.0), at(1.0));
        let slope = r1 - r0;
        if !(slope.abs() > 1e-14 * r0.abs().max(1.0)) {
            return Err(Error::Degenerate { coeff: slope, iterations: 0 });
        }
        Ok(-r0 / slope)
    }

    /// `H'''` at this state under the active law; the Wald branch returns the stored estimate.
    pub fn solve(&self, state: &SystemState) -> Result<GeometrySolve> {
        let modes = state.modes.as_flattened();
        self.check_modes(modes)?;
        state.geo.validate()?;
        match self.law {
            TraceLaw::ConformalWald => {
                let d = self.trace_diagnostics(state, state.hdddot)?;
                Ok(GeometrySolve { hdddot: state.hdddot, residual: d.residual, slope: 0.0, iterations: 0 })
            }
            _ => self.solve_at(&state.geo, modes, state.hdddot),
        }
    }

    /// Initial state with `H'''` (or `H'` on the Wald branch) consistent with the modes it shapes.
    ///
    /// The modes depend on the unknown through the `k^-5` Hadamard coefficients, so the solve is a
    /// fixed point `x = G(x)`; `G(x) - x` is nearly affine and a secant iteration converges in a few steps.
    pub fn initial_state(&self, init: &InitialData) -> Result<SystemState> {
        init.geometry.validate()?;
        let wald = self.law == TraceLaw::ConformalWald;
        let eval = |x: f64| -> Result<(SystemState, f64)> {
            let (geo, h) = if wald { (GeometryState { hd: x, ..init.geometry }, 0.0) } else { (init.geometry, x) };
            let modes = build_modes(&init.modes, &self.grid, &geo, h, self.opts.hdddd, &self.cfg)?;
            let flat = modes.as_flattened();
            let next = if wald { self.wald_hdot(&geo, flat)? } else { self.solve_at(&geo, flat, h)?.hdddot };
            Ok((SystemState { geo, hdddot: h, modes }, next - x))
        };
        let mut x0 = if wald { init.geometry.hd } else { 0.0 };
        let (s0, mut d0) = eval(x0)?;
        if d0 == 0.0 {
            return Ok(s0);
        }
        let mut x1 = x0 + d0;
        for _ in 0..self.opts.max_fixed_point {
            let (s1, d1) = eval(x1)?;
            if d1.abs() <= 1e-13 * x1.abs().max(1.0) {
                return Ok(s1);
            }
            let x2 = if d1 != d0 { x1 - d1 * (x1 - x0) / (d1 - d0) } else { x1 + self.opts.damping * d1 };
            if !x2.is_finite() {
                break;
            }
            (x0, d0) = (x1, d1);
            x1 = x2;
        }
        Err(Error::InitNotConverged { update: d0, iterations: self.opts.max_fixed_point })
    }

    /// `max |G_pp - h_pp| k^7` over the monitor window.
    pub fn hadamard_monitor(&self, state: &SystemState) -> f64 {
        let [lo, hi] = self.opts.monitor_window;
        let geo = &state.geo;
        let sc = SubtractionCoefficients::new(geo, state.hdddot, 0.0, &self.cfg);
        let a2 = geo.a * geo.a;
        self.grid
            .nodes()
            .iter()
            .zip(&state.modes)
            .filter(|(&k, _)| k >= lo && k <= hi)
            .map(|(&k, g)| {
                let k2 = k * k;
                let d = ((g[0] - 1.0 / (2.0 * k * a2)) - sc.alpha3 / (2.0 * k2 * k)) - sc.alpha5 / (2.0 * k2 * k2 * k);
                d.abs() * k2 * k2 * k2 * k
            })
            .fold(0.0, f64::max)
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let mut geo = geometry_of(t, y);
        geo.validate()?;
        let modes = &y[GEO_LEN..];
        let (hd, hdd, hddd) = match self.law {
            TraceLaw::ConformalWald => {
                geo.hd = self.wald_hdot(&geo, modes)?;
                (geo.hd, 0.0, 0.0)
            }
            _ => (geo.hd, geo.hdd, self.solve_at(&geo, modes, 0.0)?.hdddot),
        };
        if !hddd.is_finite() || !hd.is_finite() {
            return Err(Error::NonFinite { t, what: "geometry solve".into() });
        }
        dy[0] = geo.a * geo.h;
        dy[1] = hd;
        dy[2] = if self.law == TraceLaw::ConformalWald { 0.0 } else { hdd };
        dy[3] = hddd;
        let a3 = geo.a * geo.a * geo.a;
        let shift = self.cfg.m2() - self.cfg.xi * geo.ricci();
        let inv_a2 = 1.0 / (geo.a * geo.a);
        dy[GEO_LEN..]
            .par_chunks_mut(3)
            .with_min_len(128)
            .zip(modes.par_chunks(3).with_min_len(128))
            .zip(self.grid.nodes().par_iter().with_min_len(128))
            .for_each(|((d, g), &k)| {
                let r = mode_rhs_raw([g[0], g[1], g[2]], a3, k * k * inv_a2 + shift);
                d.copy_from_slice(&r);
            });
        Ok(())
    }

    /// Integrates from `state` to `t_end`, calling `observe` at the start and every `cadence`.
    pub fn run<O>(&self, state: SystemState, t_end: f64, cadence: f64, mut observe: O) -> Result<RunSummary>
    where
        O: FnMut(&SystemState, &StepStats) -> Result<()>,
    {
        if !(cadence > 0.0 && t_end >= state.geo.t) {
            return Err(Error::Config(format!("need cadence > 0 and t_end >= t0, got {cadence}, {t_end}")));
        }
        self.check_modes(state.modes.as_flattened())?;
        let t0 = state.geo.t;
        let tol = Tolerances {
            rtol: self.opts.rtol,
            atol: self.opts.atol,
            dt_max: self.opts.dt_max,
            dt_min: self.opts.dt_min,
            max_steps: self.opts.max_steps,
        };
        let mut dp = Dopri::new(t0, state.to_vec(), self.opts.dt_initial);
        let wald = self.law == TraceLaw::ConformalWald;
        // Wald branch: H'' and H''' come from differencing the constrained H'.
        let hddd_est = std::cell::Cell::new(if wald { state.hdddot } else { 0.0 });
        let f = |t: f64, y: &[f64], dy: &mut [f64]| self.rhs(t, y, dy);
        let mut post = |t: f64, dt: f64, y: &mut [f64]| -> Result<()> {
            if wald {
                let geo = geometry_of(t, y);
                let hd = self.wald_hdot(&geo, &y[GEO_LEN..])?;
                let hdd = (hd - y[2]) / dt;
                hddd_est.set((hdd - y[3]) / dt);
                y[2] = hd;
                y[3] = hdd;
            }
            Ok(())
        };
        let snapshot = |dp: &Dopri, hddd_est: f64| -> Result<SystemState> {
            let mut s = SystemState::from_vec(dp.t, &dp.y, hddd_est);
            if !wald {
                s.hdddot = self.solve(&s)?.hdddot;
            }
            Ok(s)
        };
        observe(&snapshot(&dp, hddd_est.get())?, &dp.stats)?;
        let mut n = 1u64;
        loop {
            let target = (t0 + n as f64 * cadence).min(t_end);
            if target <= dp.t {
                break;
            }
            dp.advance_to(target, &tol, &f, &mut post)?;
            observe(&snapshot(&dp, hddd_est.get())?, &dp.stats)?;
            if target >= t_end {
                break;
            }
            n += 1;
        }
        Ok(RunSummary { stats: dp.stats, final_state: snapshot(&dp, hddd_est.get())? })
    }
}

/// `lambda` at which massive Minkowski vacuum modes solve the conformal trace equation on this grid.
/// `ln lambda = I/(4 pi m^2) - 1/16 + 2 pi^2 c`, with `I` the regularized vacuum integral.
pub fn static_lambda(m: f64, c: f64, grid: &ModeGrid, pairing: &RegularizedPairing) -> Result<f64> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Config(format!("the static scale needs m > 0, got {m}")));
    }
    let g = minkowski_integrand(grid, m);
    let i = k3_subtracted_integral(grid, &g, -m * m / 4.0, pairing, 3.0, true)?;
    Ok((i.value / (4.0 * PI * m * m) - 1.0 / 16.0 + 2.0 * PI * PI * c).exp())
}
