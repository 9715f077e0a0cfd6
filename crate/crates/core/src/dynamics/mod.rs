//! Coupled evolution of the equal-time two-point modes and the scale factor.
//!
//! The evolved vector is `[a, H, H', H'', (G_pp, G_ppi, G_pipi) per grid node]`; `H'''` is
//! re-solved from the trace equation at every stage, so it never goes stale.

mod init;
mod integrator;
mod trace;
mod verify;

use serde::{Deserialize, Serialize};

use crate::quadrature::RegularizedPairing;
use crate::subtraction::{CouplingConfig, GeometryState};

pub use init::{smooth_step, BlendProfile, InitSpec, InitialData, PerturbationBump};
pub use integrator::{RunSummary, StepStats};
pub use trace::{static_lambda, Dynamics, GeometrySolve, TraceDiagnostics, TraceLaw};
pub use verify::verify;

/// Offset of the first mode component in the evolved vector.
pub(crate) const GEO_LEN: usize = 4;

/// One mode of the symmetric two-point function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeState {
    pub k: f64,
    pub gpp: f64,
    pub gppi: f64,
    pub gpipi: f64,
}

impl ModeState {
    /// `J_k = G_pp G_pipi - G_ppi^2`; 1/4 for pure states.
    pub fn purity(&self) -> f64 {
        self.gpp * self.gpipi - self.gppi * self.gppi
    }
}

/// Full state at one instant. Modes are aligned index by index with the grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemState {
    pub geo: GeometryState,
    /// `H'''` solved at this state.
    pub hdddot: f64,
    pub modes: Vec<[f64; 3]>,
}

impl SystemState {
    pub(crate) fn to_vec(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(GEO_LEN + 3 * self.modes.len());
        y.extend_from_slice(&[self.geo.a, self.geo.h, self.geo.hd, self.geo.hdd]);
        for m in &self.modes {
            y.extend_from_slice(m);
        }
        y
    }

    pub(crate) fn from_vec(t: f64, y: &[f64], hdddot: f64) -> Self {
        SystemState {
            geo: geometry_of(t, y),
            hdddot,
            modes: y[GEO_LEN..].chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        }
    }

    /// `max_k |J_k - 1/4|`.
    pub fn max_purity_deviation(&self) -> f64 {
        self.modes.iter().map(|g| (g[0] * g[2] - g[1] * g[1] - 0.25).abs()).fold(0.0, f64::max)
    }
}

pub(crate) fn geometry_of(t: f64, y: &[f64]) -> GeometryState {
    GeometryState { t, a: y[0], h: y[1], hd: y[2], hdd: y[3] }
}

/// `omega_k^2 = k^2/a^2 + m^2 - xi R`; may be negative.
pub fn omega_squared(k: f64, geo: &GeometryState, cfg: &CouplingConfig) -> f64 {
    k * k / (geo.a * geo.a) + cfg.m2() - cfg.xi * geo.ricci()
}

/// Right side of the linear mode system; conserves `J_k` identically.
pub fn mode_rhs(ms: &ModeState, geo: &GeometryState, cfg: &CouplingConfig) -> [f64; 3] {
    let a3 = geo.a * geo.a * geo.a;
    mode_rhs_raw([ms.gpp, ms.gppi, ms.gpipi], a3, omega_squared(ms.k, geo, cfg))
}

#[inline]
pub(crate) fn mode_rhs_raw(g: [f64; 3], a3: f64, w2: f64) -> [f64; 3] {
    let [pp, ppi, pipi] = g;
    [2.0 * ppi / a3, -a3 * w2 * pp + pipi / a3, -2.0 * a3 * w2 * ppi]
}

/// Which trace-equation right side drives `H'''`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LawChoice {
    /// Conformal law at `xi = 1/6`, general law otherwise.
    #[default]
    Auto,
    Conformal,
    General,
}

/// Variant of the general trace equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GeneralForm {
    /// Gradient block `<phi_dot^2> + a^-2 <phi Laplacian phi>` with the Fourier sign of the Laplacian,
    /// and `(2 - 6 xi) m^2` in front of `<phi^2>`, as the trace identity produces them.
    #[default]
    Derived,
    /// `+ a^-2 int k^2 G_pp` and `6 xi m^2` exactly as displayed in the closed equation of motion.
    Printed,
}

/// Integrator and solver settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsOptions {
    pub rtol: f64,
    pub atol: f64,
    pub dt_initial: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    pub max_steps: u64,
    /// `H''''` used only when building initial Hadamard modes (enters beta5).
    pub hdddd: f64,
    pub pairing: RegularizedPairing,
    /// Momentum window of the `k^7`-weighted Hadamard difference monitor.
    pub monitor_window: [f64; 2],
    pub law: LawChoice,
    pub general_form: GeneralForm,
    pub damping: f64,
    pub max_fixed_point: usize,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        DynamicsOptions {
            rtol: 1e-9,
            atol: 1e-12,
            dt_initial: 1e-4,
            dt_max: 0.05,
            dt_min: 1e-13,
            max_steps: 50_000_000,
            hdddd: 0.0,
            pairing: RegularizedPairing::default(),
            monitor_window: [1.0, 32.0],
            law: LawChoice::Auto,
            general_form: GeneralForm::Derived,
            damping: 0.5,
            max_fixed_point: 50,
        }
    }
}
