//! Acceptance criteria 1 to 9. Each test prints one `[PASS]`/`[FAIL]` line (plus `[INFO]` context)
//! straight to stdout so the verdicts show up even when output capture is on.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use backreact_cli::{run, RunConfig};
use backreact_core::dynamics::{
    static_lambda, BlendProfile, Dynamics, DynamicsOptions, InitSpec, InitialData, LawChoice, PerturbationBump,
    SystemState,
};
use backreact_core::hadamard::{self, certified_catalog};
use backreact_core::quadrature::{grid_build, regularized_k3_pairing, zeta_oracle_zero_mode, GridSpec};
use backreact_core::report::Status;
use backreact_core::series::GeomValues;
use backreact_core::subtraction::{
    closing_relations, coefficient_ode_residual, minkowski_lambda, purity_residual_exact, ClosedForms,
};
use backreact_core::{CouplingConfig, Error, GeometryState, ModeGrid, RegularizedPairing, SubtractionCoefficients, EULER_GAMMA};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn line(status: &str, criterion: u32, text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "[{status}] criterion {criterion}: {text}");
}

fn verdict(criterion: u32, ok: bool, text: &str) {
    line(if ok { "PASS" } else { "FAIL" }, criterion, text);
}

fn info(criterion: u32, text: &str) {
    line("INFO", criterion, text);
}

fn default_grid() -> ModeGrid {
    grid_build(&GridSpec::default()).unwrap()
}

fn curved() -> GeometryState {
    GeometryState { t: 0.0, a: 1.0, h: 0.1, hd: -0.02, hdd: 0.01 }
}

fn bump(amplitude: f64, center: f64) -> Option<PerturbationBump> {
    Some(PerturbationBump { amplitude, center, width: 1.0, power: 7.0 })
}

fn perturbed_modes() -> InitSpec {
    InitSpec::Hadamard { a_fn: bump(1.0, 4.0), b_fn: bump(0.5, 3.0), c_fn: None, blend: BlendProfile::default() }
}

fn vacuum_at_rest() -> InitialData {
    InitialData { geometry: GeometryState::minkowski(0.0), modes: InitSpec::AdiabaticVacuum }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[test]
fn criterion_1_series_certification() {
    let start = Instant::now();
    let report = hadamard::verify(&certified_catalog());
    let secs = start.elapsed().as_secs_f64();
    let fails: Vec<_> = report.failures().map(|c| c.name.clone()).collect();
    let sign_ruling = report.checks.iter().any(|c| c.status == Status::Info && c.name.contains("v1 m^4 sign ruling"));
    let exact = ["eikonal identity for sigma", "exchange symmetry of sigma2", "exchange symmetry of u", "exchange symmetry of v0", "u recursion", "v0 recursion", "v1 recursion at coincidence"]
        .iter()
        .all(|n| report.checks.iter().any(|c| c.name == *n && c.status == Status::Pass));
    let flags = report.checks.iter().filter(|c| c.status == Status::Flag).count();
    let ok = fails.is_empty() && sign_ruling && exact && secs < 30.0;
    verdict(
        1,
        ok,
        &format!("exact residuals zero: {exact}; printed coefficients reproduced or flagged ({flags} flags, failures {fails:?}); sign ruling reported: {sign_ruling}; {secs:.2} s"),
    );
    assert!(ok, "{}", report.render());
}

/// `H = 0.3 + 0.1 sin 2t`, `a = exp(int H)`, with all derivatives exact.
fn analytic_geometry(t: f64) -> (GeometryState, f64, f64) {
    let (s, c) = (2.0 * t).sin_cos();
    let geo = GeometryState {
        t,
        a: (0.3 * t - 0.05 * c + 0.05).exp(),
        h: 0.3 + 0.1 * s,
        hd: 0.2 * c,
        hdd: -0.4 * s,
    };
    (geo, -0.8 * c, 1.6 * s)
}

#[test]
fn criterion_2_closed_form_closure() {
    let symbolic = closing_relations(&ClosedForms::corrected());
    let exact = symbolic.iter().all(|(_, r)| r.is_zero());
    let cfg = CouplingConfig::new(0.7, 0.05, 1.0);
    // Same window [0.5, 0.7] at every spacing so the maxima compare like for like.
    let residuals = |n: usize| {
        let dt = 0.2 / n as f64;
        let traj: Vec<_> = (0..=n)
            .map(|i| {
                let (g, h3, h4) = analytic_geometry(0.5 + i as f64 * dt);
                (g, SubtractionCoefficients::new(&g, h3, h4, &cfg))
            })
            .collect();
        coefficient_ode_residual(&traj, &cfg).unwrap()
    };
    let coarse = residuals(40);
    let fine = residuals(80);
    let mut orders = Vec::new();
    let mut ok = exact;
    for (c, f) in coarse.relations.iter().zip(&fine.relations) {
        if c.1 <= 1e-12 * c.2.max(1.0) {
            // Algebraic relation: roundoff only.
            ok &= f.1 <= 1e-12 * f.2.max(1.0);
            continue;
        }
        let p = (c.1 / f.1).log2();
        orders.push(p);
        ok &= (p - 2.0).abs() < 0.1;
    }
    ok &= orders.len() == 5;
    verdict(
        2,
        ok,
        &format!(
            "{} closing relations exactly zero: {exact}; differenced relations converge with observed orders {:?}",
            symbolic.len(),
            orders.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>()
        ),
    );
    assert!(ok);
}

fn rational(rng: &mut ChaCha8Rng, lo: i64, hi: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(rng.gen_range(lo * den..=hi * den)), BigInt::from(den))
}

#[test]
fn criterion_3_purity_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(20261016);
    let forms = ClosedForms::corrected();
    // Integer momenta log-spaced over [1e2, 1e4].
    let ks: Vec<BigRational> =
        (0..=8).map(|j| BigRational::from_integer(BigInt::from((100.0 * 10f64.powf(j as f64 / 4.0)).round() as i64))).collect();
    let log_k: Vec<f64> = ks.iter().map(|k| k.to_f64().unwrap().ln()).collect();
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut with_a: Vec<f64> = Vec::new();
    for _ in 0..10 {
        // Taylor data at one instant of an analytic geometry.
        let mut h: [BigRational; 9] = Default::default();
        for (n, slot) in h.iter_mut().enumerate() {
            *slot = if n <= 5 { rational(&mut rng, -1, 1, 997) } else { BigRational::from_integer(0.into()) };
        }
        let a = BigRational::new(BigInt::from(rng.gen_range(500..=2000)), BigInt::from(1000));
        let v = GeomValues { a: a.clone(), h: h.clone(), m2: rational(&mut rng, 0, 2, 101), xi: rational(&mut rng, -1, 1, 103) };
        let sc = SubtractionCoefficients::exact(&forms, &v);
        let fit = |sc: &SubtractionCoefficients<BigRational>| {
            let ys: Vec<f64> = ks.iter().map(|k| purity_residual_exact(k, sc, &a, &h[0]).abs().to_f64().unwrap().ln()).collect();
            slope(&log_k, &ys)
        };
        worst = worst.max(fit(&sc));
        let a_const = BigRational::new(BigInt::from(1), BigInt::from(3));
        with_a.push(fit(&sc.clone().with_integration_constant(&a, &h[0], &a_const)));
    }
    let a_ok = with_a.iter().all(|s| (s + 2.0).abs() < 0.05);
    let ok = worst <= -5.9 && a_ok;
    verdict(
        3,
        ok,
        &format!(
            "shallowest fitted slope over 10 geometries {worst:.4} (need <= -5.9); with A = 1/3 slopes {:.4}..{:.4} (expect about -2)",
            with_a.iter().cloned().fold(f64::INFINITY, f64::min),
            with_a.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_4_regularized_pairing() {
    let grid = default_grid();
    let f = |k: f64| (-k * k / 2.0).exp();
    let oracle = zeta_oracle_zero_mode();
    // Closed form of the same continuation: -2 pi (2 - gamma_E - ln 2).
    let closed = -2.0 * PI * (2.0 - EULER_GAMMA - 2f64.ln());
    let mut worst_rel: f64 = 0.0;
    let mut values = Vec::new();
    for s in [0.5, 2.0, 0.1] {
        let v = regularized_k3_pairing(&grid, f, &RegularizedPairing::new(s).unwrap()).unwrap();
        worst_rel = worst_rel.max((v - oracle).abs() / oracle.abs()).max((v - closed).abs() / closed.abs());
        values.push(v);
    }
    let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - values.iter().cloned().fold(f64::INFINITY, f64::min);
    let ok = worst_rel < 1e-6 && spread < 1e-8;
    verdict(4, ok, &format!("pairing {:.12} vs continuation {oracle:.12}: worst relative error {worst_rel:.2e}; splitting-function spread {spread:.2e}", values[0]));
    assert!(ok);
}

/// Residual at `t = 0`, the doubled-scale residual and the first time `|H| >= 1e-8` on `[0, 10]`.
fn fixed_point_run(lambda: f64) -> (f64, f64, Option<f64>, f64) {
    let grid = default_grid();
    let cfg = CouplingConfig::new(1.0, 1.0 / 6.0, lambda);
    let d = Dynamics::new(grid.clone(), cfg.clone(), DynamicsOptions { rtol: 1e-9, ..Default::default() }).unwrap();
    let s = d.initial_state(&vacuum_at_rest()).unwrap();
    let r0 = d.trace_diagnostics(&s, 0.0).unwrap().residual;
    let doubled = Dynamics::new(grid, CouplingConfig { lambda: 2.0 * lambda, ..cfg }, DynamicsOptions::default()).unwrap();
    let r2 = doubled.trace_diagnostics(&s, 0.0).unwrap().residual;
    let mut first = None;
    let mut max_h: f64 = 0.0;
    let res = d.run(s, 10.0, 0.01, |st, _| {
        max_h = max_h.max(st.geo.h.abs());
        if st.geo.h.abs() >= 1e-8 {
            first = Some(st.geo.t);
            return Err(Error::Config("left the fixed point".into()));
        }
        Ok(())
    });
    assert!(res.is_ok() || first.is_some(), "{res:?}");
    (r0, r2, first, max_h)
}

#[test]
fn criterion_5_minkowski_fixed_point() {
    let start = Instant::now();
    let g8 = 1.0; // 8 pi G with the default G = 1/(8 pi)
    let target = g8 * 4f64.ln() / (4.0 * PI * PI);
    let lam = minkowski_lambda(1.0).unwrap();
    let (r0, r2, first, max_h) = fixed_point_run(lam);
    let rel2 = (r2 - target).abs() / target;
    let secs = start.elapsed().as_secs_f64();
    let ok = r0.abs() < 1e-10 && first.is_none() && rel2 < 1e-8 && secs < 60.0;
    verdict(
        5,
        ok,
        &format!(
            "lambda = {lam:.15}: residual at t = 0 {r0:.6e} (need < 1e-10); |H| first reaches 1e-8 at t = {} (max |H| seen {max_h:.2e}); doubled-scale residual {r2:.12e} vs {target:.12e}, relative {rel2:.2e}; {secs:.1} s",
            first.map_or("never".to_string(), |t| format!("{t:.2}"))
        ),
    );
    // The same checks at the scale calibrated on the grid.
    let lam_s = static_lambda(1.0, 0.0, &default_grid(), &RegularizedPairing::default()).unwrap();
    let (s0, s2, sfirst, smax) = fixed_point_run(lam_s);
    let srel = (s2 - target).abs() / target;
    info(
        5,
        &format!(
            "calibrated lambda = {lam_s:.15}: residual {s0:.3e}; max |H| on [0, 10] {smax:.3e} ({}); doubled-scale residual relative error {srel:.2e}; predicted t = 0 residual at the prescribed scale 8 pi G m^4 log(lambda^2/lambda_cal^2)/(4 pi^2) = {:.6e}",
            if sfirst.is_none() { "stays below 1e-8" } else { "leaves 1e-8" },
            g8 * 2.0 * (lam / lam_s).ln() / (4.0 * PI * PI)
        ),
    );
    assert!(ok, "prescribed scale is not a fixed point of the conformal trace equation");
}

fn conformal_pure(rtol: f64) -> Dynamics {
    let mut cfg = CouplingConfig::new(1.0, 1.0 / 6.0, 0.8);
    cfg.c_dprime = 0.1;
    Dynamics::new(default_grid(), cfg, DynamicsOptions { rtol, atol: rtol * 1e-3, ..Default::default() }).unwrap()
}

fn purity_drift(rtol: f64, t_end: f64) -> f64 {
    let d = conformal_pure(rtol);
    let s = d.initial_state(&InitialData { geometry: curved(), modes: perturbed_modes() }).unwrap();
    let mut worst: f64 = 0.0;
    d.run(s, t_end, 0.05, |st, _| {
        worst = worst.max(st.max_purity_deviation());
        Ok(())
    })
    .unwrap();
    worst
}

#[test]
fn criterion_6_mode_invariants() {
    let t_end = 1.0;
    let main = purity_drift(1e-10, t_end) / t_end;
    let tols = [2e-5, 1e-5, 5e-6];
    let drifts: Vec<f64> = tols.iter().map(|&t| purity_drift(t, t_end)).collect();
    let p = slope(&tols.iter().map(|t| t.ln()).collect::<Vec<_>>(), &drifts.iter().map(|d| d.ln()).collect::<Vec<_>>());
    // Linear control of the drift: halving the tolerance must at least halve it.
    let halving = drifts.windows(2).all(|w| w[1] <= 0.5 * w[0]);
    let ok = main < 1e-8 && halving;
    verdict(
        6,
        ok,
        &format!(
            "max |J - 1/4| per unit time at rtol 1e-10: {main:.2e} (need < 1e-8); drift at rtol {tols:?}: {:?}, fitted exponent {p:.2}, halving the tolerance at least halves the drift: {halving}",
            drifts.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>()
        ),
    );
    assert!(ok);
}

/// `|H'''_general(1/6 + delta) - H'''_conformal|` on initial data built at each coupling.
fn coupling_gaps(m: f64, c_dprime: f64, grid: &ModeGrid) -> (f64, Vec<(i32, f64, f64)>) {
    let mk = |xi: f64, law: LawChoice| {
        let mut cfg = CouplingConfig::new(m, xi, 0.8);
        cfg.c_dprime = c_dprime;
        Dynamics::new(grid.clone(), cfg, DynamicsOptions { law, ..Default::default() }).unwrap()
    };
    let init = InitialData {
        geometry: curved(),
        modes: InitSpec::Hadamard { a_fn: bump(1.0, 4.0), b_fn: None, c_fn: None, blend: BlendProfile::default() },
    };
    let conf = mk(1.0 / 6.0, LawChoice::Conformal).initial_state(&init).unwrap().hdddot;
    let gaps = (2..=6)
        .map(|n| {
            let delta = 10f64.powi(-n);
            let gap = |xi: f64| {
                let d = mk(xi, LawChoice::General);
                let s: SystemState = d.initial_state(&init).unwrap();
                (d.general_geometry_solve(&s, s.hdddot).unwrap().hdddot - conf).abs()
            };
            (n, gap(1.0 / 6.0 + delta), gap(1.0 / 6.0 - delta))
        })
        .collect();
    (conf, gaps)
}

#[test]
fn criterion_7_coupling_continuity() {
    let grid = default_grid();
    let judge = |gaps: &[(i32, f64, f64)]| {
        let worst: Vec<f64> = gaps.iter().map(|g| g.1.max(g.2)).collect();
        let monotone = worst.windows(2).all(|w| w[1] <= w[0]);
        (monotone, *worst.last().unwrap(), worst)
    };
    let (conf, gaps) = coupling_gaps(1.0, 0.1, &grid);
    let (monotone, last, worst) = judge(&gaps);
    let ok = monotone && last < 1e-8;
    verdict(
        7,
        ok,
        &format!(
            "m = 1: conformal H''' = {conf:.10e}; gaps for n = 2..6: {:?}; monotone {monotone}; gap at n = 6 {last:.3e} (need < 1e-8)",
            worst.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>()
        ),
    );
    // At R = 0 the two right sides differ only in the log(a^2/lambda^2) coefficient,
    // m^4/(4 pi^2) printed in the conformal law against m^4/(8 pi^2) from the zero-mode term.
    let log = 2.0 * (1.0f64 / 0.8).ln();
    let box_coeff = 1.0 / (2880.0 * PI * PI) + 0.1;
    info(
        7,
        &format!(
            "m = 1: R = {:.1e}; gap predicted by the log-coefficient mismatch m^4 L/(8 pi^2)/(6 C) = {:.4e}",
            curved().ricci(),
            log / (8.0 * PI * PI) / (6.0 * box_coeff)
        ),
    );
    let (conf0, gaps0) = coupling_gaps(0.0, 0.1, &grid);
    let (mono0, last0, worst0) = judge(&gaps0);
    let rate = slope(
        &gaps0.iter().map(|g| -(g.0 as f64) * 10f64.ln()).collect::<Vec<_>>(),
        &worst0.iter().map(|g| g.ln()).collect::<Vec<_>>(),
    );
    info(
        7,
        &format!(
            "m = 0: conformal H''' = {conf0:.10e}; gaps {:?}; monotone {mono0}; gap at n = 6 {last0:.3e}; fitted order in delta {rate:.3}",
            worst0.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>()
        ),
    );
    assert!(ok, "the general solve does not approach the conformal solve as xi -> 1/6");
}

#[test]
fn criterion_8_hadamard_difference_persistence() {
    let d = conformal_pure(1e-10);
    let s = d.initial_state(&InitialData { geometry: curved(), modes: perturbed_modes() }).unwrap();
    let w0 = d.hadamard_monitor(&s);
    let mut wmax: f64 = 0.0;
    d.run(s, 1.0, 0.05, |st, _| {
        wmax = wmax.max(d.hadamard_monitor(st));
        Ok(())
    })
    .unwrap();
    let ratio = wmax / w0;
    let ok = ratio < 2.0 && w0 > 0.0;
    verdict(8, ok, &format!("k^7-weighted difference on [1, 32]: initial {w0:.4e}, max over [0, 1] {wmax:.4e}, growth factor {ratio:.3} (need < 2)"));
    assert!(ok);
}

fn run_bytes(cfg: &RunConfig, dir: &Path, threads: usize) -> Vec<(String, Vec<u8>)> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| run(cfg, dir)).unwrap();
    let mut files: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files.into_iter().map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())).collect()
}

#[test]
fn criterion_9_determinism() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/perturbed_conformal.json");
    let mut cfg = RunConfig::load(&path).unwrap();
    cfg.t_end = 0.3;
    cfg.modes_every = 1;
    let tmp = tempfile::tempdir().unwrap();
    let a = run_bytes(&cfg, &tmp.path().join("one"), 1);
    let b = run_bytes(&cfg, &tmp.path().join("four"), 4);
    let c = run_bytes(&cfg, &tmp.path().join("again"), 4);
    let ok = a == b && b == c && a.len() >= 3;
    verdict(9, ok, &format!("{} files byte-identical across 1 and 4 threads and a repeated run: {ok}", a.len()));
    assert!(ok);
}
