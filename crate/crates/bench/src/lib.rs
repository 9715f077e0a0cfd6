//! Shared fixtures for the criterion benches.

use backreact_core::dynamics::{BlendProfile, Dynamics, DynamicsOptions, InitSpec, InitialData, PerturbationBump, SystemState};
use backreact_core::quadrature::{grid_build, GridSpec};
use backreact_core::{CouplingConfig, GeometryState};

/// Conformal dynamics on the default grid with a perturbed Hadamard state at `H = 0.1`.
pub fn conformal_fixture() -> (Dynamics, SystemState) {
    fixture(1.0 / 6.0, GridSpec::default())
}

/// Minimally coupled dynamics on the reduced grid used for general-coupling runs.
pub fn general_fixture() -> (Dynamics, SystemState) {
    fixture(0.0, GridSpec::new(1e-2, 100.0, 1024))
}

fn fixture(xi: f64, grid: GridSpec) -> (Dynamics, SystemState) {
    let mut cfg = CouplingConfig::new(1.0, xi, 0.8);
    cfg.c_dprime = 0.1;
    let d = Dynamics::new(grid_build(&grid).expect("grid"), cfg, DynamicsOptions::default()).expect("dynamics");
    let bump = PerturbationBump { amplitude: 1.0, center: 4.0, width: 1.0, power: 7.0 };
    let init = InitialData {
        geometry: GeometryState { t: 0.0, a: 1.0, h: 0.1, hd: -0.02, hdd: 0.01 },
        modes: InitSpec::Hadamard { a_fn: Some(bump), b_fn: None, c_fn: None, blend: BlendProfile::default() },
    };
    let s = d.initial_state(&init).expect("initial state");
    (d, s)
}
