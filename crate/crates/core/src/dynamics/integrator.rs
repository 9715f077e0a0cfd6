//! Dormand-Prince 5(4) with first-same-as-last reuse and max-norm error control.

use serde::Serialize;

use super::SystemState;
use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
    pub rhs_evaluations: u64,
    pub last_dt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub stats: StepStats,
    pub final_state: SystemState,
}

pub(crate) struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    pub max_steps: u64,
}

pub(crate) struct Dopri {
    pub t: f64,
    pub y: Vec<f64>,
    pub dt: f64,
    pub stats: StepStats,
    k: Vec<Vec<f64>>,
    fsal_valid: bool,
    ys: Vec<f64>,
    ynew: Vec<f64>,
}

impl Dopri {
    pub fn new(t: f64, y: Vec<f64>, dt: f64) -> Self {
        let n = y.len();
        Dopri {
            t,
            y,
            dt,
            stats: StepStats::default(),
            k: vec![vec![0.0; n]; 7],
            fsal_valid: false,
            ys: vec![0.0; n],
            ynew: vec![0.0; n],
        }
    }

    /// Advances exactly to `t_end`. `post` may rewrite constrained slots of an accepted state;
    /// it must leave every slot the right side reads unchanged.
    pub fn advance_to<F, P>(&mut self, t_end: f64, tol: &Tolerances, f: &F, post: &mut P) -> Result<()>
    where
        F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
        P: FnMut(f64, f64, &mut [f64]) -> Result<()>,
    {
        while self.t < t_end {
            if self.stats.accepted + self.stats.rejected >= tol.max_steps {
                return Err(Error::StepLimit { t: self.t, steps: tol.max_steps });
            }
            let remaining = t_end - self.t;
            let last = self.dt.min(tol.dt_max) >= remaining;
            let dt = if last { remaining } else { self.dt.min(tol.dt_max) };
            match self.try_step(dt, tol, f) {
                Ok(Some(err)) => {
                    let t_new = if last { t_end } else { self.t + dt };
                    std::mem::swap(&mut self.y, &mut self.ynew);
                    self.k.swap(0, 6);
                    self.fsal_valid = true;
                    post(t_new, t_new - self.t, &mut self.y)?;
                    self.t = t_new;
                    self.stats.accepted += 1;
                    self.stats.last_dt = dt;
                    let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    // A short final step says nothing about the natural step size.
                    if !last || dt >= self.dt {
                        self.dt = dt * grow;
                    }
                }
                Ok(None) => {
                    self.stats.rejected += 1;
                    self.dt = self.shrink(dt, tol, None)?;
                }
                Err(e) => {
                    self.stats.rejected += 1;
                    self.fsal_valid = false;
                    self.dt = self.shrink(dt, tol, Some(e))?;
                }
            }
        }
        Ok(())
    }

    fn shrink(&self, dt: f64, tol: &Tolerances, cause: Option<Error>) -> Result<f64> {
        let next = dt * 0.25;
        if next < tol.dt_min * self.t.abs().max(1.0) {
            return Err(cause.unwrap_or(Error::StepUnderflow { t: self.t, dt: next }));
        }
        Ok(next)
    }

    /// `Some(error norm)` on acceptance, `None` on rejection.
    fn try_step<F>(&mut self, dt: f64, tol: &Tolerances, f: &F) -> Result<Option<f64>>
    where
        F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        let n = self.y.len();
        if !self.fsal_valid {
            f(self.t, &self.y, &mut self.k[0])?;
            self.stats.rhs_evaluations += 1;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in self.k[..s].iter().enumerate() {
                    acc += A[s][j] * kj[i];
                }
                self.ys[i] = self.y[i] + dt * acc;
            }
            if s == 6 {
                self.ynew.copy_from_slice(&self.ys);
            }
            f(self.t + C[s] * dt, &self.ys, &mut self.k[s])?;
            self.stats.rhs_evaluations += 1;
        }
        let mut err: f64 = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, kj) in self.k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let yn = self.ynew[i];
            if !yn.is_finite() {
                return Ok(None);
            }
            let scale = tol.atol + tol.rtol * self.y[i].abs().max(yn.abs());
            err = err.max((dt * e).abs() / scale);
        }
        if err.is_finite() && err <= 1.0 {
            Ok(Some(err))
        } else {
            Ok(None)
        }
    }
}
