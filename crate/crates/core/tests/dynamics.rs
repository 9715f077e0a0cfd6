use std::f64::consts::PI;

use backreact_core::dynamics::*;
use backreact_core::quadrature::{grid_build, GridSpec};
use backreact_core::subtraction::minkowski_lambda;
use backreact_core::{CouplingConfig, Error, GeometryState, ModeGrid, EULER_GAMMA};

fn grid() -> ModeGrid {
    grid_build(&GridSpec::default()).unwrap()
}

fn small_grid() -> ModeGrid {
    grid_build(&GridSpec::new(1e-2, 100.0, 1024)).unwrap()
}

fn curved() -> GeometryState {
    GeometryState { t: 0.0, a: 1.0, h: 0.1, hd: -0.02, hdd: 0.01 }
}

fn bump(amplitude: f64, center: f64, power: f64) -> Option<PerturbationBump> {
    Some(PerturbationBump { amplitude, center, width: 1.0, power })
}

fn hadamard(a_amp: f64, b_amp: f64) -> InitSpec {
    InitSpec::Hadamard {
        a_fn: bump(a_amp, 4.0, 7.0),
        b_fn: bump(b_amp, 3.0, 7.0),
        c_fn: None,
        blend: BlendProfile::default(),
    }
}

fn static_coupling(m: f64, g: &ModeGrid) -> CouplingConfig {
    CouplingConfig::new(m, 1.0 / 6.0, static_lambda(m, 0.0, g, &Default::default()).unwrap())
}

#[test]
fn minkowski_vacuum_mode_is_stationary() {
    let cfg = CouplingConfig::new(1.3, 0.0, 1.0);
    let geo = GeometryState::minkowski(0.0);
    for k in [1e-2, 0.7, 5.0, 300.0] {
        let w = (k * k + cfg.m2()).sqrt();
        let ms = ModeState { k, gpp: 1.0 / (2.0 * w), gppi: 0.0, gpipi: w / 2.0 };
        let d = mode_rhs(&ms, &geo, &cfg);
        for x in d {
            assert!(x.abs() <= 1e-14 * w.max(1.0), "k = {k}: {d:?}");
        }
    }
}

#[test]
fn mode_equations_conserve_the_determinant() {
    // dJ/dt = G_pp' G_pipi + G_pp G_pipi' - 2 G_ppi G_ppi', including a tachyonic frequency.
    let geo = GeometryState { t: 0.0, a: 1.7, h: 0.4, hd: 2.0, hdd: -1.0 };
    for (xi, k) in [(0.0, 0.3), (1.0, 0.05), (1.0 / 6.0, 40.0)] {
        let cfg = CouplingConfig::new(0.5, xi, 1.0);
        let ms = ModeState { k, gpp: 0.8, gppi: -0.3, gpipi: 0.9 };
        let [dpp, dppi, dpipi] = mode_rhs(&ms, &geo, &cfg);
        let dj = dpp * ms.gpipi + ms.gpp * dpipi - 2.0 * ms.gppi * dppi;
        let scale = dpp.abs() + dppi.abs() + dpipi.abs();
        assert!(dj.abs() <= 1e-14 * scale, "xi = {xi}: dJ = {dj:e}");
    }
    let cfg = CouplingConfig::new(0.0, 1.0, 1.0);
    let collapsing = GeometryState { hd: -2.0, ..geo };
    assert!(omega_squared(0.05, &collapsing, &cfg) < 0.0);
    let ms = ModeState { k: 0.05, gpp: 0.8, gppi: -0.3, gpipi: 0.9 };
    let [dpp, dppi, dpipi] = mode_rhs(&ms, &collapsing, &cfg);
    assert!((dpp * ms.gpipi + ms.gpp * dpipi - 2.0 * ms.gppi * dppi).abs() < 1e-14 * (dpp.abs() + dppi.abs() + dpipi.abs()));
}

#[test]
fn massless_adiabatic_vacuum_is_exact_in_minkowski() {
    let g = grid();
    let cfg = CouplingConfig::new(0.0, 0.0, 1.0);
    let d = Dynamics::new(g.clone(), cfg, DynamicsOptions::default()).unwrap();
    let s = d
        .initial_state(&InitialData { geometry: GeometryState::minkowski(0.0), modes: InitSpec::AdiabaticVacuum })
        .unwrap();
    for (&k, m) in g.nodes().iter().zip(&s.modes) {
        assert!((m[0] - 0.5 / k).abs() <= 1e-15 * m[0]);
        assert_eq!(m[1], 0.0);
    }
    assert!(s.max_purity_deviation() < 1e-15);
    let phi2 = d.phi2_renormalized(&s).unwrap();
    assert!(phi2.value.abs() < 1e-14, "{phi2:?}");
}

#[test]
fn massive_minkowski_phi2_matches_closed_form() {
    // int [1/(2 omega) - 1/(2k) + (1 - chi)/(4 k^3)] d^3k + Z0/4 = pi (gamma - 1/2 - ln 2) at m = 1,
    // independently of the splitting function.
    let exact = PI * (EULER_GAMMA - 0.5 - 2f64.ln()) / (8.0 * PI.powi(3));
    for s in [0.5, 2.0] {
        let opts = DynamicsOptions { pairing: backreact_core::RegularizedPairing { s }, ..Default::default() };
        let d = Dynamics::new(grid(), CouplingConfig::new(1.0, 1.0 / 6.0, 1.0), opts).unwrap();
        let st = d
            .initial_state(&InitialData { geometry: GeometryState::minkowski(0.0), modes: InitSpec::AdiabaticVacuum })
            .unwrap();
        let phi2 = d.phi2_renormalized(&st).unwrap();
        assert!((phi2.value - exact).abs() < 1e-10, "s = {s}: {} vs {exact}", phi2.value);
    }
}

#[test]
fn hadamard_profile_purity_and_mixing() {
    let g = small_grid();
    let mut cfg = CouplingConfig::new(1.0, 1.0 / 6.0, 0.8);
    cfg.c_dprime = 0.1;
    let d = Dynamics::new(g.clone(), cfg, DynamicsOptions::default()).unwrap();
    let pure = d.initial_state(&InitialData { geometry: curved(), modes: hadamard(1.0, 0.5) }).unwrap();
    assert!(pure.max_purity_deviation() < 1e-14, "{}", pure.max_purity_deviation());

    let mixed = InitSpec::Hadamard { a_fn: None, b_fn: None, c_fn: bump(0.1, 4.0, 5.0), blend: BlendProfile::default() };
    let s = d.initial_state(&InitialData { geometry: curved(), modes: mixed }).unwrap();
    for (&k, m) in g.nodes().iter().zip(&s.modes) {
        let j = m[0] * m[2] - m[1] * m[1];
        assert!(j >= 0.25 - 1e-15, "k = {k}: J = {j}");
        if (k - 4.0).abs() < 0.5 {
            assert!(j > 0.25 + 1e-6, "k = {k}: J = {j}");
        }
    }

    let broken = InitSpec::Hadamard { a_fn: bump(-1e6, 2.0, 7.0), b_fn: None, c_fn: None, blend: BlendProfile::default() };
    let e = d.initial_state(&InitialData { geometry: curved(), modes: broken }).unwrap_err();
    assert!(matches!(e, Error::NonPositiveMode { .. }), "{e}");

    let bad_c = InitSpec::Hadamard { a_fn: None, b_fn: None, c_fn: bump(-0.1, 4.0, 5.0), blend: BlendProfile::default() };
    assert!(matches!(bad_c.validate(), Err(Error::Config(_))));
}

#[test]
fn initial_state_is_self_consistent() {
    let g = small_grid();
    let mut cfg = CouplingConfig::new(1.0, 1.0 / 6.0, 0.8);
    cfg.c_dprime = 0.1;
    let d = Dynamics::new(g, cfg, DynamicsOptions::default()).unwrap();
    let s = d.initial_state(&InitialData { geometry: curved(), modes: hadamard(1.0, 0.5) }).unwrap();
    let again = d.solve(&s).unwrap();
    assert!((again.hdddot - s.hdddot).abs() <= 1e-12 * s.hdddot.abs().max(1.0), "{} vs {}", again.hdddot, s.hdddot);
    assert!(again.residual.abs() < 1e-12);
}

#[test]
fn conformal_residual_tracks_the_scale_and_constants() {
    let g = grid();
    let vac = InitialData { geometry: GeometryState::minkowski(0.0), modes: InitSpec::AdiabaticVacuum };
    let base = static_coupling(1.0, &g);
    let d = Dynamics::new(g.clone(), base.clone(), DynamicsOptions::default()).unwrap();
    let s = d.initial_state(&vac).unwrap();
    let r0 = d.trace_diagnostics(&s, 0.0).unwrap().residual;
    assert!(r0.abs() < 1e-12, "static scale residual {r0:e}");
    // The box-R coefficient is only 1/(2880 pi^2), so H''' amplifies r0 by about 5e3.
    let sol = d.conformal_geometry_rhs(&s).unwrap();
    assert!(sol.hdddot.abs() < 1e-8 && sol.residual.abs() < 1e-14, "{sol:?}");

    // rhs carries m^4 log(a^2/lambda^2)/(4 pi^2): moving lambda shifts the residual by that much.
    let mut shifted = base.clone();
    shifted.lambda = 2.0 * base.lambda;
    let d2 = Dynamics::new(g.clone(), shifted.clone(), DynamicsOptions::default()).unwrap();
    let r2 = d2.trace_diagnostics(&s, 0.0).unwrap().residual;
    let want = base.eight_pi_g() * 2.0 * 2f64.ln() / (4.0 * PI * PI);
    assert!((r2 - r0 - want).abs() < 1e-12, "{r2} vs {want}");

    let mut with_c = base.clone();
    with_c.c = 0.37;
    let d3 = Dynamics::new(g, with_c, DynamicsOptions::default()).unwrap();
    let r3 = d3.trace_diagnostics(&s, 0.0).unwrap().residual;
    assert!((r3 - r0 + base.eight_pi_g() * 0.37).abs() < 1e-12);
}

#[test]
fn massless_conformal_right_side_is_pure_geometry() {
    let g = small_grid();
    let mut cfg = CouplingConfig::new(0.0, 1.0 / 6.0, 1.0);
    cfg.c_dprime = 0.1;
    let d = Dynamics::new(g, cfg.clone(), DynamicsOptions::default()).unwrap();
    let geo = curved();
    let hddd = 0.3;
    let (h, hd) = (geo.h, geo.hd);
    let want = cfg.eight_pi_g()
        * ((hd * h * h + h.powi(4)) / (240.0 * PI * PI) + (1.0 / (2880.0 * PI * PI) + 0.1) * geo.box_ricci(hddd));
    for spec in [hadamard(1.0, 0.5), hadamard(-2.0, 3.0)] {
        let s = d.initial_state(&InitialData { geometry: geo, modes: spec }).unwrap();
        let rhs = d.trace_diagnostics(&s, hddd).unwrap().rhs;
        assert!((rhs - want).abs() < 1e-14, "{rhs} vs {want}");
    }
}

#[test]
fn general_law_at_conformal_coupling_agrees_when_massless() {
    let g = small_grid();
    let mut cfg = CouplingConfig::new(0.0, 1.0 / 6.0, 1.0);
    cfg.c_dprime = 0.1;
    let conf = Dynamics::new(g.clone(), cfg.clone(), DynamicsOptions::default()).unwrap();
    let gen = Dynamics::new(g, cfg, DynamicsOptions { law: LawChoice::General, ..Default::default() }).unwrap();
    assert_eq!(conf.law(), TraceLaw::Conformal);
    assert_eq!(gen.law(), TraceLaw::General);
    let s = conf.initial_state(&InitialData { geometry: curved(), modes: hadamard(1.0, 0.5) }).unwrap();
    for hddd in [-1.0, 0.0, 0.4] {
        let a = conf.trace_diagnostics(&s, hddd).unwrap().residual;
        let b = gen.trace_diagnostics(&s, hddd).unwrap().residual;
        assert!((a - b).abs() < 1e-10, "H''' = {hddd}: {a} vs {b}");
    }
}

#[test]
fn general_residual_is_affine_in_third_derivative() {
    let g = small_grid();
    let mut cfg = CouplingConfig::new(1.0, 0.0, 0.8);
    cfg.c_dprime = 0.1;
    let d = Dynamics::new(g, cfg, DynamicsOptions::default()).unwrap();
    assert_eq!(d.law(), TraceLaw::General);
    let s = d.initial_state(&InitialData { geometry: curved(), modes: hadamard(1.0, 0.5) }).unwrap();
    let r: Vec<f64> = [0.0, 1.0, 2.0].iter().map(|&h| d.trace_diagnostics(&s, h).unwrap().residual).collect();
    let curvature = r[0] - 2.0 * r[1] + r[2];
    assert!(curvature.abs() < 1e-10 * r.iter().fold(1.0f64, |m, x| m.max(x.abs())), "{r:?}");
    let sol = d.general_geometry_solve(&s, 5.0).unwrap();
    assert!(sol.residual.abs() < 1e-12, "{sol:?}");
    assert!((sol.hdddot - s.hdddot).abs() < 1e-9 * sol.hdddot.abs().max(1.0));
}

#[test]
fn law_selection_rejects_mismatches() {
    let g = small_grid();
    let e = Dynamics::new(g.clone(), CouplingConfig::new(1.0, 0.0, 1.0), DynamicsOptions { law: LawChoice::Conformal, ..Default::default() });
    assert!(matches!(e, Err(Error::Config(_))));
    let mut cfg = CouplingConfig::new(1.0, 1.0 / 6.0, 1.0);
    cfg.c_dprime = CouplingConfig::wald_c_dprime();
    let d = Dynamics::new(g.clone(), cfg.clone(), DynamicsOptions::default()).unwrap();
    assert_eq!(d.law(), TraceLaw::ConformalWald);
    let gen = Dynamics::new(g, CouplingConfig::new(1.0, 0.2, 1.0), DynamicsOptions::default()).unwrap();
    let st = gen
        .initial_state(&InitialData { geometry: GeometryState::minkowski(0.0), modes: InitSpec::AdiabaticVacuum })
        .unwrap();
    assert!(matches!(gen.conformal_geometry_rhs(&st), Err(Error::Config(_))));
}

#[test]
fn calibrated_minkowski_vacuum_stays_flat() {
    let g = grid();
    let d = Dynamics::new(g.clone(), static_coupling(1.0, &g), DynamicsOptions::default()).unwrap();
    let s = d
        .initial_state(&InitialData { geometry: GeometryState::minkowski(0.0), modes: InitSpec::AdiabaticVacuum })
        .unwrap();
    let mut worst: f64 = 0.0;
    let out = d
        .run(s, 1.0, 0.25, |st, _| {
            worst = worst.max(st.geo.h.abs()).max((st.geo.a - 1.0).abs());
            Ok(())
        })
        .unwrap();
    assert!(worst < 1e-10, "max |H|, |a - 1| = {worst:e}");
    assert!(out.final_state.max_purity_deviation() < 1e-10);
    assert_eq!(out.final_state.geo.t, 1.0);
}

#[test]
fn conformal_run_keeps_trace_equation_and_purity() {
    let g = small_grid();
    let mut cfg = CouplingConfig::new(1.0, 1.0 / 6.0, 0.8);
    cfg.c_dprime = 0.1;
    let d = Dynamics::new(g, cfg, DynamicsOptions { rtol: 1e-10, atol: 1e-13, ..Default::default() }).unwrap();
    let s = d.initial_state(&InitialData { geometry: curved(), modes: hadamard(1.0, 0.5) }).unwrap();
    let mut checks = 0;
    let out = d
        .run(s, 0.5, 0.1, |st, _| {
            let diag = d.trace_diagnostics(st, st.hdddot)?;
            assert!(diag.residual.abs() < 1e-11, "t = {}: {diag:?}", st.geo.t);
            assert!(st.max_purity_deviation() < 1e-10);
            checks += 1;
            Ok(())
        })
        .unwrap();
    assert_eq!(checks, 6);
    assert!(out.final_state.geo.a > 1.0);
}

#[test]
fn wald_branch_keeps_its_constraint() {
    let g = small_grid();
    let mut cfg = CouplingConfig::new(1.0, 1.0 / 6.0, 0.8);
    cfg.c_dprime = CouplingConfig::wald_c_dprime();
    let d = Dynamics::new(g, cfg, DynamicsOptions::default()).unwrap();
    let s = d.initial_state(&InitialData { geometry: curved(), modes: hadamard(1.0, 0.5) }).unwrap();
    assert!(d.trace_diagnostics(&s, 0.0).unwrap().residual.abs() < 1e-12);
    d.run(s, 0.3, 0.1, |st, _| {
        let r = d.trace_diagnostics(st, 0.0)?.residual;
        assert!(r.abs() < 1e-9, "t = {}: {r:e}", st.geo.t);
        Ok(())
    })
    .unwrap();
}

#[test]
fn observer_errors_abort_the_run() {
    let g = small_grid();
    let cfg = CouplingConfig::new(1.0, 1.0 / 6.0, minkowski_lambda(1.0).unwrap());
    let d = Dynamics::new(g, cfg, DynamicsOptions::default()).unwrap();
    let s = d
        .initial_state(&InitialData { geometry: GeometryState::minkowski(0.0), modes: InitSpec::AdiabaticVacuum })
        .unwrap();
    let e = d.run(s, 1.0, 0.5, |st, _| if st.geo.t > 0.0 { Err(Error::Config("stop".into())) } else { Ok(()) });
    assert!(matches!(e, Err(Error::Config(m)) if m == "stop"));
}

#[test]
fn minkowski_scale_is_inverse_in_mass() {
    let l1 = minkowski_lambda(1.0).unwrap();
    assert!((minkowski_lambda(2.0).unwrap() - l1 / 2.0).abs() < 1e-15);
    assert!((l1 * l1 - 4.0 * (1.75 - 2.0 * EULER_GAMMA).exp()).abs() < 1e-14);
    assert!(minkowski_lambda(0.0).is_err());
    assert!(static_lambda(0.0, 0.0, &small_grid(), &Default::default()).is_err());
}
