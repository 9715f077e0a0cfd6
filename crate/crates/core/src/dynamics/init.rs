//! Initial mode profiles.
//!
//! Above the blend window the state is `h + (a_fn, b_fn)` with `G_pipi` fixed by purity, which keeps
//! `|G - h| k^7` bounded. Below it a zeroth-order adiabatic profile takes over; the blend is `C^inf`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::ModeGrid;
use crate::subtraction::{hadamard_modes, CouplingConfig, GeometryState, SubtractionCoefficients};

/// `amplitude * k^-power * exp(-(k - center)^2 / (2 width^2))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationBump {
    pub amplitude: f64,
    #[serde(default = "default_center")]
    pub center: f64,
    #[serde(default = "default_width")]
    pub width: f64,
    pub power: f64,
}

fn default_center() -> f64 {
    4.0
}

fn default_width() -> f64 {
    1.0
}

impl PerturbationBump {
    pub fn eval(&self, k: f64) -> f64 {
        let x = (k - self.center) / self.width;
        self.amplitude * k.powf(-self.power) * (-0.5 * x * x).exp()
    }

    fn validate(&self, what: &str, min_power: f64) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite() && self.amplitude.is_finite() && self.center.is_finite()) {
            return Err(Error::Config(format!("{what}: amplitude, center and width must be finite, width positive")));
        }
        if !(self.power >= min_power) {
            return Err(Error::Config(format!("{what}: power must be at least {min_power}, got {}", self.power)));
        }
        Ok(())
    }
}

/// Window `[k_lo, k_hi]` over which the adiabatic profile hands over to the Hadamard modes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlendProfile {
    pub k_lo: f64,
    pub k_hi: f64,
}

impl Default for BlendProfile {
    fn default() -> Self {
        BlendProfile { k_lo: 0.5, k_hi: 1.0 }
    }
}

/// `0` below `lo`, `1` above `hi`, smooth with all derivatives vanishing at both ends.
pub fn smooth_step(x: f64, lo: f64, hi: f64) -> f64 {
    if x <= lo {
        return 0.0;
    }
    if x >= hi {
        return 1.0;
    }
    let u = (x - lo) / (hi - lo);
    let f = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    f(u) / (f(u) + f(1.0 - u))
}

/// Named initial profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// `G_pp = 1/(2 a^3 Omega)`, `G_ppi = 0`, pure, with `Omega^2 = k^2/a^2 + |m^2 - xi R|`.
    /// Exact vacuum in Minkowski space; not Hadamard once `H != 0`.
    AdiabaticVacuum,
    /// Hadamard modes plus `k^-7` perturbations above the blend window.
    Hadamard {
        #[serde(default)]
        a_fn: Option<PerturbationBump>,
        #[serde(default)]
        b_fn: Option<PerturbationBump>,
        /// Non-negative mixed-state addition to `G_pipi`; omitted for pure states.
        #[serde(default)]
        c_fn: Option<PerturbationBump>,
        #[serde(default)]
        blend: BlendProfile,
    },
}

impl InitSpec {
    pub fn validate(&self) -> Result<()> {
        if let InitSpec::Hadamard { a_fn, b_fn, c_fn, blend } = self {
            if let Some(b) = a_fn {
                b.validate("a_fn", 7.0)?;
            }
            if let Some(b) = b_fn {
                b.validate("b_fn", 7.0)?;
            }
            if let Some(b) = c_fn {
                b.validate("c_fn", 5.0)?;
                if b.amplitude < 0.0 {
                    return Err(Error::Config("c_fn must be non-negative".into()));
                }
            }
            if !(blend.k_lo > 0.0 && blend.k_hi > blend.k_lo && blend.k_hi.is_finite()) {
                return Err(Error::Config(format!("blend window needs 0 < k_lo < k_hi, got {blend:?}")));
            }
        }
        Ok(())
    }
}

/// Geometry at the initial time together with the mode profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub geometry: GeometryState,
    pub modes: InitSpec,
}

fn adiabatic(k: f64, geo: &GeometryState, cfg: &CouplingConfig) -> (f64, f64) {
    let a = geo.a;
    let omega = (k * k / (a * a) + (cfg.m2() - cfg.xi * geo.ricci()).abs()).sqrt();
    (1.0 / (2.0 * a * a * a * omega), 0.0)
}

/// Node values `[G_pp, G_ppi, G_pipi]` for the given `H'''`, `H''''`.
pub(crate) fn build_modes(
    spec: &InitSpec,
    grid: &ModeGrid,
    geo: &GeometryState,
    hddd: f64,
    hdddd: f64,
    cfg: &CouplingConfig,
) -> Result<Vec<[f64; 3]>> {
    spec.validate()?;
    geo.validate()?;
    let sc = SubtractionCoefficients::new(geo, hddd, hdddd, cfg);
    grid.nodes()
        .iter()
        .map(|&k| {
            let (pp, ppi, extra) = match spec {
                InitSpec::AdiabaticVacuum => {
                    let (pp, ppi) = adiabatic(k, geo, cfg);
                    (pp, ppi, 0.0)
                }
                InitSpec::Hadamard { a_fn, b_fn, c_fn, blend } => {
                    let s = smooth_step(k, blend.k_lo, blend.k_hi);
                    let (vpp, vppi) = adiabatic(k, geo, cfg);
                    let (hpp, hppi) = if s > 0.0 {
                        let (x, y, _) = hadamard_modes(k, &sc, geo)?;
                        let da = a_fn.map_or(0.0, |b| b.eval(k));
                        let db = b_fn.map_or(0.0, |b| b.eval(k));
                        (x + da, y + db)
                    } else {
                        (0.0, 0.0)
                    };
                    let extra = c_fn.map_or(0.0, |b| s * b.eval(k));
                    ((1.0 - s) * vpp + s * hpp, (1.0 - s) * vppi + s * hppi, extra)
                }
            };
            if !(pp > 0.0 && pp.is_finite()) {
                return Err(Error::NonPositiveMode { k });
            }
            Ok([pp, ppi, (0.25 + ppi * ppi) / pp + extra])
        })
        .collect()
}
