use std::f64::consts::TAU;

use super::{DiscreteCurve, Vec3};
use crate::error::{Error, Result};

/// Circle of radius `r` in the xy-plane, traversed counter-clockwise from `(r, 0, 0)`.
pub fn circle(n: usize, r: f64) -> Result<DiscreteCurve> {
    if !(r > 0.0) {
        return Err(Error::InvalidInput(format!("circle radius must be positive, got {r}")));
    }
    let points = (0..n)
        .map(|j| {
            let phi = TAU * j as f64 / n as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), 0.0)
        })
        .collect();
    DiscreteCurve::new(points, TAU * r)
}

/// One turn of the helix `(a cos phi, a sin phi, b phi)`; curvature `a/(a^2+b^2)`,
/// torsion `b/(a^2+b^2)`. Not closed: the curve carries the lead `(0, 0, 2 pi b)`.
pub fn helix(n: usize, a: f64, b: f64) -> Result<DiscreteCurve> {
    if !(a > 0.0) {
        return Err(Error::InvalidInput(format!("helix radius must be positive, got {a}")));
    }
    let c = (a * a + b * b).sqrt();
    let points = (0..n)
        .map(|j| {
            let phi = TAU * j as f64 / n as f64;
            Vec3::new(a * phi.cos(), a * phi.sin(), b * phi)
        })
        .collect();
    DiscreteCurve::with_lead(points, TAU * c, Vec3::new(0.0, 0.0, TAU * b))
}

/// Planar unit circle with radial perturbation `r(phi) = 1 + amplitude cos(mode phi)`,
/// resampled at uniform arclength.
pub fn perturbed_circle(n: usize, amplitude: f64, mode: u32) -> Result<DiscreteCurve> {
    if !(amplitude.abs() < 0.5) {
        return Err(Error::InvalidInput(format!(
            "perturbation amplitude must satisfy |a| < 0.5, got {amplitude}"
        )));
    }
    let m = mode as f64;
    DiscreteCurve::from_parametric(n, Vec3::zeros(), |phi| {
        let r = 1.0 + amplitude * (m * phi).cos();
        let dr = -amplitude * m * (m * phi).sin();
        let (s, c) = phi.sin_cos();
        (Vec3::new(r * c, r * s, 0.0), Vec3::new(dr * c - r * s, dr * s + r * c, 0.0))
    })
}

/// Non-planar closed ring `r = 1 + radial cos(mode phi)`, `z = vertical sin(mode phi)`,
/// resampled at uniform arclength.
pub fn wavy_ring(n: usize, radial: f64, vertical: f64, mode: u32) -> Result<DiscreteCurve> {
    if !(radial.abs() < 0.5) || !vertical.is_finite() {
        return Err(Error::InvalidInput(format!("wavy ring needs |radial| < 0.5, got {radial}")));
    }
    let m = mode as f64;
    DiscreteCurve::from_parametric(n, Vec3::zeros(), |phi| {
        let r = 1.0 + radial * (m * phi).cos();
        let dr = -radial * m * (m * phi).sin();
        let (s, c) = phi.sin_cos();
        let pos = Vec3::new(r * c, r * s, vertical * (m * phi).sin());
        let vel = Vec3::new(dr * c - r * s, dr * s + r * c, vertical * m * (m * phi).cos());
        (pos, vel)
    })
}
