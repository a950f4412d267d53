//! Frenet-framed flows of closed space curves and their Hasimoto wave-function
//! equations.
//!
//! The crate evolves a curve `gamma(s, t)` under `gamma_t = C T + B N + A B` with the
//! coefficients given as expressions over curvature and torsion ([`flow`]), maps the
//! curve to the complex field `psi = k exp(i int tau ds)` and back ([`hasimoto`]),
//! integrates the induced scalar equations, and checks both descriptions against
//! each other through length and bending-energy diagnostics ([`diagnostics`]).

pub mod diagnostics;
pub mod error;
pub mod evolver;
pub mod flow;
pub mod geometry;
pub mod hasimoto;
pub mod io;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
