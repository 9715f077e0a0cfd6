//! Configuration, verification suites and the trajectory writer behind the `backreact` binary.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use backreact_core::dynamics::{self, Dynamics, DynamicsOptions, InitialData, SystemState};
use backreact_core::hadamard::{self, certified_catalog, CatalogSeries};
use backreact_core::quadrature::{self, grid_build, GridSpec};
use backreact_core::report::{Report, Status};
use backreact_core::subtraction::{self, minkowski_lambda};
use backreact_core::{series, CouplingConfig, Error as CoreError};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VERIFY_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const SOLVER: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("solver: {error}{}", dump.as_ref().map(|d| format!(" (state dumped to {})", d.display())).unwrap_or_default())]
    Solver { error: CoreError, dump: Option<PathBuf> },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Solver { .. } | CliError::Io(_) => exit::SOLVER,
        }
    }
}

/// `lambda` as a number or a named calibration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Value(f64),
    Named(LambdaRule),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// `2 exp(7/8 - gamma_E) / m`.
    Minkowski,
    /// Value at which massive Minkowski vacuum modes solve the conformal trace equation on the run grid.
    Static,
}

/// Coupling block of a run configuration; `lambda` may be named.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub m: f64,
    pub xi: f64,
    pub lambda: LambdaSpec,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub c_prime: f64,
    #[serde(default)]
    pub c_dprime: f64,
    #[serde(default)]
    pub g_newton: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub coupling: CouplingSpec,
    #[serde(default)]
    pub grid: GridSpec,
    pub init: InitialData,
    #[serde(default)]
    pub options: DynamicsOptions,
    pub t_end: f64,
    pub cadence: f64,
    /// Write a mode snapshot every this many output times; 0 disables snapshots.
    #[serde(default = "default_modes_every")]
    pub modes_every: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_modes_every() -> usize {
    1
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.t_end > self.init.geometry.t && self.t_end.is_finite()) {
            return Err(CliError::Config(format!("t_end must exceed the initial time, got {}", self.t_end)));
        }
        if !(self.cadence > 0.0 && self.cadence.is_finite()) {
            return Err(CliError::Config(format!("cadence must be positive, got {}", self.cadence)));
        }
        self.init.modes.validate().map_err(config)?;
        self.init.geometry.validate().map_err(config)?;
        Ok(())
    }

    /// Coupling with `lambda` resolved on the given grid.
    pub fn coupling(&self, grid: &backreact_core::ModeGrid) -> Result<CouplingConfig, CliError> {
        let s = &self.coupling;
        let lambda = match s.lambda {
            LambdaSpec::Value(v) => v,
            LambdaSpec::Named(LambdaRule::Minkowski) => minkowski_lambda(s.m).map_err(config)?,
            LambdaSpec::Named(LambdaRule::Static) => {
                dynamics::static_lambda(s.m, s.c, grid, &self.options.pairing).map_err(config)?
            }
        };
        let mut c = CouplingConfig::new(s.m, s.xi, lambda);
        c.c = s.c;
        c.c_prime = s.c_prime;
        c.c_dprime = s.c_dprime;
        if let Some(g) = s.g_newton {
            c.g_newton = g;
        }
        c.validate().map_err(config)?;
        Ok(c)
    }
}

fn config(e: CoreError) -> CliError {
    CliError::Config(e.to_string())
}

/// Verification scopes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    Series,
    Hadamard,
    Subtraction,
    Quadrature,
    Dynamics,
    All,
}

impl std::str::FromStr for Scope {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "series" => Scope::Series,
            "hadamard" => Scope::Hadamard,
            "subtraction" => Scope::Subtraction,
            "quadrature" => Scope::Quadrature,
            "dynamics" => Scope::Dynamics,
            "all" => Scope::All,
            _ => return Err(format!("unknown scope {s:?}; expected series, hadamard, subtraction, quadrature, dynamics or all")),
        })
    }
}

/// Perturbation `series:p,q:n/d` added to one coefficient of the certified catalog.
#[derive(Clone, Debug, PartialEq)]
pub struct Injection {
    pub series: CatalogSeries,
    pub p: i32,
    pub q: i32,
    pub delta: BigRational,
}

impl std::str::FromStr for Injection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("expected series:p,q:rational (e.g. u:0,1:1/7), got {s:?}");
        let mut parts = s.split(':');
        let (name, slot, value) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c), None) => (a, b, c),
            _ => return Err(bad()),
        };
        let series = CatalogSeries::parse(name).ok_or_else(|| format!("unknown series {name:?}; expected sigma2, u or v0"))?;
        let (p, q) = slot.split_once(',').ok_or_else(bad)?;
        let p: i32 = p.trim().parse().map_err(|_| bad())?;
        let q: i32 = q.trim().parse().map_err(|_| bad())?;
        let (n, d) = value.split_once('/').unwrap_or((value, "1"));
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d == BigInt::from(0) {
            return Err(bad());
        }
        Ok(Injection { series, p, q, delta: BigRational::new(n, d) })
    }
}

/// Runs the selected suites; the injection, if any, perturbs the catalog the hadamard suite certifies.
pub fn verify(scope: Scope, inject: Option<&Injection>) -> Report {
    let mut r = Report::default();
    let want = |s: Scope| scope == s || scope == Scope::All;
    if want(Scope::Series) {
        r.extend(series::verify());
    }
    if want(Scope::Hadamard) {
        let mut cat = certified_catalog();
        if let Some(i) = inject {
            cat.perturb(i.series, i.p, i.q, &i.delta);
            r.push(
                "hadamard",
                "injected mutation",
                Status::Info,
                format!("{} at z0^{} Z^{} shifted by {}", i.series.name(), i.p, i.q, i.delta),
            );
        }
        r.extend(hadamard::verify(&cat));
    }
    if want(Scope::Subtraction) {
        r.extend(subtraction::verify());
    }
    if want(Scope::Quadrature) {
        r.extend(quadrature::verify());
    }
    if want(Scope::Dynamics) {
        r.extend(dynamics::verify());
    }
    r
}

/// Formats a float with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

struct Writers {
    dir: PathBuf,
    geometry: fs::File,
    diagnostics: fs::File,
}

fn create(path: &Path) -> Result<fs::File, CliError> {
    Ok(fs::File::create(path)?)
}

fn write_modes(path: &Path, grid: &backreact_core::ModeGrid, state: &SystemState) -> Result<(), CliError> {
    let mut s = String::from("k,Gpp,Gppi,Gpipi,Jk\n");
    for (&k, g) in grid.nodes().iter().zip(&state.modes) {
        let j = g[0] * g[2] - g[1] * g[1];
        let _ = writeln!(s, "{},{},{},{},{}", num(k), num(g[0]), num(g[1]), num(g[2]), num(j));
    }
    fs::write(path, s)?;
    Ok(())
}

/// Outcome of a completed run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub out: PathBuf,
    pub rows: usize,
    pub stats: dynamics::StepStats,
    pub final_state: SystemState,
}

/// Integrates the configuration and writes `geometry.csv`, `diagnostics.csv` and mode snapshots.
/// On a solver failure the last observed state is written to `dump.json` and `dump_modes.csv`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunOutcome, CliError> {
    let grid = grid_build(&cfg.grid).map_err(config)?;
    let coupling = cfg.coupling(&grid)?;
    let dynamics = Dynamics::new(grid.clone(), coupling, cfg.options.clone()).map_err(config)?;
    fs::create_dir_all(out)?;
    let mut w = Writers {
        dir: out.to_path_buf(),
        geometry: create(&out.join("geometry.csv"))?,
        diagnostics: create(&out.join("diagnostics.csv"))?,
    };
    writeln!(w.geometry, "t,a,H,Hdot,Hddot,Hdddot,R,residual")?;
    writeln!(w.diagnostics, "t,phi2_ren,max_abs_J_minus_quarter,max_weighted_hadamard_diff,tail_bound")?;

    let mut last: Option<SystemState> = None;
    let solver = |e: CoreError, last: &Option<SystemState>, dir: &Path| -> CliError {
        let dump = last.as_ref().and_then(|s| write_dump(dir, &grid, s, &e).ok());
        CliError::Solver { error: e, dump }
    };
    let state = match dynamics.initial_state(&cfg.init) {
        Ok(s) => s,
        Err(e) => return Err(solver(e, &None, out)),
    };
    let mut rows = 0usize;
    let mut io_error: Option<std::io::Error> = None;
    let result = dynamics.run(state, cfg.t_end, cfg.cadence, |s, _| {
        last = Some(s.clone());
        if let Some(k) = s.modes.iter().zip(grid.nodes()).find(|(g, _)| !(g[0] > 0.0)).map(|(_, &k)| k) {
            return Err(CoreError::NonPositiveMode { k });
        }
        let diag = dynamics.trace_diagnostics(s, s.hdddot)?;
        let phi2 = dynamics.phi2_estimate(s)?;
        let g = &s.geo;
        let line = format!(
            "{},{},{},{},{},{},{},{}\n",
            num(g.t),
            num(g.a),
            num(g.h),
            num(g.hd),
            num(g.hdd),
            num(s.hdddot),
            num(g.ricci()),
            num(diag.residual)
        );
        let dline = format!(
            "{},{},{},{},{}\n",
            num(g.t),
            num(phi2.value),
            num(s.max_purity_deviation()),
            num(dynamics.hadamard_monitor(s)),
            num(phi2.tail.abs())
        );
        let mut write = || -> std::io::Result<()> {
            w.geometry.write_all(line.as_bytes())?;
            w.diagnostics.write_all(dline.as_bytes())?;
            if cfg.modes_every > 0 && rows % cfg.modes_every == 0 {
                write_modes(&w.dir.join(format!("modes_{}.csv", snapshot_label(g.t))), &grid, s)
                    .map_err(|e| std::io::Error::other(e.to_string()))?;
            }
            Ok(())
        };
        if let Err(e) = write() {
            io_error = Some(e);
            return Err(CoreError::Config("output write failed".into()));
        }
        rows += 1;
        Ok(())
    });
    if let Some(e) = io_error {
        return Err(CliError::Io(e));
    }
    match result {
        Ok(summary) => Ok(RunOutcome { out: out.to_path_buf(), rows, stats: summary.stats, final_state: summary.final_state }),
        Err(e) => Err(solver(e, &last, out)),
    }
}

/// Fixed-width time label so snapshot files sort by time.
pub fn snapshot_label(t: f64) -> String {
    format!("{t:012.6}")
}

#[derive(Serialize)]
struct Dump<'a> {
    error: String,
    last_observed: &'a backreact_core::GeometryState,
    hdddot: f64,
    max_abs_j_minus_quarter: f64,
    modes: &'a str,
}

fn write_dump(dir: &Path, grid: &backreact_core::ModeGrid, s: &SystemState, e: &CoreError) -> Result<PathBuf, CliError> {
    write_modes(&dir.join("dump_modes.csv"), grid, s)?;
    let d = Dump {
        error: e.to_string(),
        last_observed: &s.geo,
        hdddot: s.hdddot,
        max_abs_j_minus_quarter: s.max_purity_deviation(),
        modes: "dump_modes.csv",
    };
    let path = dir.join("dump.json");
    fs::write(&path, serde_json::to_string_pretty(&d).map_err(|e| CliError::Config(e.to_string()))?)?;
    Ok(path)
}
