//! Semiclassical backreaction of a quantized scalar on spatially flat
//! Robertson-Walker spacetimes: exact Hadamard series algebra, adiabatic mode
//! subtraction, regularized momentum quadrature and the coupled evolution.

pub mod dynamics;
pub mod error;
pub mod hadamard;
pub mod quadrature;
pub mod report;
pub mod series;
pub mod subtraction;

pub use error::{Error, Result};
pub use quadrature::{ModeGrid, RegularizedPairing};
pub use series::{CoeffPoly, GeomSymbol, Monomial, TruncatedSeries};
pub use subtraction::{CouplingConfig, GeometryState, SubtractionCoefficients};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
