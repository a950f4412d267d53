//! Closed space curves on a periodic arclength grid: Frenet frames, curvature and
//! torsion, and reconstruction of a curve from its intrinsic profile.

mod presets;
mod spline;

pub use presets::{circle, helix, perturbed_circle, wavy_ring};
pub use spline::reparameterize;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gl10;
use crate::spectral;

pub type Vec3 = Vector3<f64>;

/// Curvature below which the normal direction is treated as undefined.
pub const K_FLOOR: f64 = 1e-8;

/// Largest fraction of degenerate nodes that is repaired instead of rejected.
pub const MAX_DEGENERATE_FRACTION: f64 = 0.01;

pub(crate) fn validate_grid_size(n: usize) -> Result<()> {
    if n < 8 || !n.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "grid size must be a power of two >= 8, got {n}"
        )));
    }
    Ok(())
}

fn validate_length(length: f64) -> Result<()> {
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::InvalidInput(format!("domain length must be positive, got {length}")));
    }
    Ok(())
}

/// A closed curve sampled at `N` nodes of a uniform periodic parameter grid.
///
/// `lead` is the translation picked up over one period, `gamma(s + L) = gamma(s) + lead`.
/// It is zero for closed curves and lets helical arcs reuse the periodic machinery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCurve {
    points: Vec<Vec3>,
    length: f64,
    lead: Vec3,
}

impl DiscreteCurve {
    pub fn new(points: Vec<Vec3>, length: f64) -> Result<Self> {
        Self::with_lead(points, length, Vec3::zeros())
    }

    pub fn with_lead(points: Vec<Vec3>, length: f64, lead: Vec3) -> Result<Self> {
        validate_grid_size(points.len())?;
        validate_length(length)?;
        if points.iter().any(|p| !p.iter().all(|x| x.is_finite())) || !lead.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("curve contains non-finite coordinates".into()));
        }
        Ok(Self { points, length, lead })
    }

    /// Samples the closed parametric curve `phi -> f(phi)` (period `2 pi`, returning
    /// position and derivative) at `n` nodes of uniform arclength, starting at `phi = 0`.
    pub fn from_parametric(n: usize, lead: Vec3, f: impl Fn(f64) -> (Vec3, Vec3)) -> Result<Self> {
        validate_grid_size(n)?;
        let fine = 16 * n;
        let dphi = std::f64::consts::TAU / fine as f64;
        let speed = |phi: f64| f(phi).1.norm();
        let rule = gl10();
        let mut cumulative = Vec::with_capacity(fine + 1);
        cumulative.push(0.0);
        for j in 0..fine {
            let a = j as f64 * dphi;
            let seg = rule.integrate(a, a + dphi, speed);
            cumulative.push(cumulative[j] + seg);
        }
        let total = cumulative[fine];
        let mut points = Vec::with_capacity(n);
        for m in 0..n {
            let target = total * m as f64 / n as f64;
            let j = cumulative.partition_point(|&c| c <= target).saturating_sub(1).min(fine - 1);
            let a = j as f64 * dphi;
            let mut phi = a + (target - cumulative[j]) / speed(a).max(f64::MIN_POSITIVE);
            for _ in 0..50 {
                let arc = cumulative[j] + rule.integrate(a, phi, speed);
                let step = (arc - target) / speed(phi);
                phi -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            points.push(f(phi).0);
        }
        Self::with_lead(points, total, lead)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Nominal domain length `L`.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn lead(&self) -> Vec3 {
        self.lead
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points.len() as f64
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }

    pub fn rigid_transform(&self, rotation: &Matrix3<f64>, translation: &Vec3) -> Self {
        Self {
            points: self.points.iter().map(|p| rotation * p + translation).collect(),
            length: self.length,
            lead: rotation * self.lead,
        }
    }

    /// Coordinate arrays with the helical lead removed, so each is periodic.
    fn periodic_coordinates(&self) -> [Vec<f64>; 3] {
        let n = self.len();
        std::array::from_fn(|c| {
            (0..n)
                .map(|j| self.points[j][c] - self.lead[c] * j as f64 / n as f64)
                .collect()
        })
    }

    /// Parameter derivatives `d^m gamma / du^m` for the requested orders, where `u` is the
    /// uniform grid coordinate with spacing `L / N`.
    pub(crate) fn parameter_derivatives(&self, orders: &[usize]) -> Vec<Vec<Vec3>> {
        let n = self.len();
        let coords = self.periodic_coordinates();
        let per_coord: Vec<Vec<Vec<f64>>> = coords
            .iter()
            .map(|c| spectral::derivatives(c, self.length, orders))
            .collect();
        orders
            .iter()
            .enumerate()
            .map(|(o, &order)| {
                (0..n)
                    .map(|j| {
                        let mut v = Vec3::new(per_coord[0][o][j], per_coord[1][o][j], per_coord[2][o][j]);
                        if order == 1 {
                            v += self.lead / self.length;
                        } else if order == 0 {
                            v += self.lead * j as f64 / n as f64;
                        }
                        v
                    })
                    .collect()
            })
            .collect()
    }

    /// `|gamma_u|` at each node; identically one under arclength parameterisation.
    pub fn speed(&self) -> Vec<f64> {
        self.parameter_derivatives(&[1])[0].iter().map(|d| d.norm()).collect()
    }

    /// Largest relative deviation of consecutive chord lengths from their mean.
    pub fn chord_nonuniformity(&self) -> f64 {
        let n = self.len();
        let chords: Vec<f64> = (0..n)
            .map(|j| {
                let next = if j + 1 == n { self.points[0] + self.lead } else { self.points[j + 1] };
                (next - self.points[j]).norm()
            })
            .collect();
        let mean = chords.iter().sum::<f64>() / n as f64;
        chords.iter().map(|c| (c - mean).abs() / mean).fold(0.0, f64::max)
    }
}

/// Orthonormal right-handed Frenet triples at each node.
#[derive(Debug, Clone, PartialEq)]
pub struct FrenetFrame {
    pub t: Vec<Vec3>,
    pub n: Vec<Vec3>,
    pub b: Vec<Vec3>,
}

/// Sampled curvature and torsion on a uniform arclength grid of length `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryProfile {
    pub k: Vec<f64>,
    pub tau: Vec<f64>,
    pub length: f64,
    /// Nodes where `k < K_FLOOR`; their torsion was copied from the nearest regular node.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<usize>,
}

impl GeometryProfile {
    pub fn new(k: Vec<f64>, tau: Vec<f64>, length: f64) -> Result<Self> {
        validate_grid_size(k.len())?;
        validate_length(length)?;
        if tau.len() != k.len() {
            return Err(Error::InvalidInput(format!(
                "curvature has {} samples but torsion has {}",
                k.len(),
                tau.len()
            )));
        }
        if let Some(i) = k.iter().position(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidInput(format!("curvature must be finite and >= 0 (node {i})")));
        }
        if let Some(i) = tau.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("torsion must be finite (node {i})")));
        }
        Ok(Self { k, tau, length, degenerate: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.k.len() as f64
    }

    pub fn arclength(&self) -> Vec<f64> {
        let ds = self.spacing();
        (0..self.len()).map(|j| j as f64 * ds).collect()
    }
}

/// Everything the evolver and diagnostics need from one curve state.
#[derive(Debug, Clone)]
pub(crate) struct CurveGeometry {
    pub frame: FrenetFrame,
    pub k: Vec<f64>,
    pub tau: Vec<f64>,
    /// `|gamma_u|`.
    pub speed: Vec<f64>,
    pub degenerate: Vec<usize>,
}

impl CurveGeometry {
    pub fn measured_length(&self, nominal: f64) -> f64 {
        spectral::integrate(&self.speed, nominal)
    }
}

fn cyclic_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}

/// Minimal rotation carrying unit vector `from` onto unit vector `to`.
fn transport(from: &Vec3, to: &Vec3) -> Rotation3<f64> {
    Rotation3::rotation_between(from, to).unwrap_or_else(|| {
        // antiparallel: rotate by pi about any axis orthogonal to `from`
        let axis = if from.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let axis = Unit::new_normalize(from.cross(&axis));
        Rotation3::from_axis_angle(&axis, std::f64::consts::PI)
    })
}

pub(crate) fn analyze_curve(curve: &DiscreteCurve) -> Result<CurveGeometry> {
    let n = curve.len();
    let d = curve.parameter_derivatives(&[1, 2, 3]);
    let (d1, d2, d3) = (&d[0], &d[1], &d[2]);

    let mut t = Vec::with_capacity(n);
    let mut nn = vec![Vec3::zeros(); n];
    let mut b = vec![Vec3::zeros(); n];
    let mut k = Vec::with_capacity(n);
    let mut tau = vec![0.0; n];
    let mut speed = Vec::with_capacity(n);
    let mut degenerate = Vec::new();

    for j in 0..n {
        let v = d1[j].norm();
        if v == 0.0 || !v.is_finite() {
            return Err(Error::DegenerateFrame { degenerate: n, total: n });
        }
        let c = d1[j].cross(&d2[j]);
        let cn = c.norm();
        let kj = cn / (v * v * v);
        speed.push(v);
        t.push(d1[j] / v);
        k.push(kj);
        if kj < K_FLOOR {
            degenerate.push(j);
            continue;
        }
        b[j] = c / cn;
        nn[j] = b[j].cross(&t[j]);
        tau[j] = c.dot(&d3[j]) / (cn * cn);
    }

    if degenerate.len() as f64 > MAX_DEGENERATE_FRACTION * n as f64 {
        return Err(Error::DegenerateFrame { degenerate: degenerate.len(), total: n });
    }
    if !degenerate.is_empty() {
        let regular: Vec<usize> = (0..n).filter(|j| degenerate.binary_search(j).is_err()).collect();
        for &j in &degenerate {
            let src = *regular
                .iter()
                .min_by_key(|&&r| cyclic_distance(r, j, n))
                .expect("at least one regular node");
            let rot = transport(&t[src], &t[j]);
            let normal = (rot * nn[src]).normalize();
            nn[j] = normal;
            b[j] = t[j].cross(&normal);
            tau[j] = tau[src];
        }
    }

    Ok(CurveGeometry { frame: FrenetFrame { t, n: nn, b }, k, tau, speed, degenerate })
}

/// Discrete Frenet frame of a closed curve from spectral derivatives of position.
pub fn frames_from_curve(curve: &DiscreteCurve) -> Result<FrenetFrame> {
    Ok(analyze_curve(curve)?.frame)
}

/// Curvature and torsion of a closed curve.
pub fn profile_from_curve(curve: &DiscreteCurve) -> Result<GeometryProfile> {
    let geo = analyze_curve(curve)?;
    let length = geo.measured_length(curve.length());
    Ok(GeometryProfile { k: geo.k, tau: geo.tau, length, degenerate: geo.degenerate })
}

/// Result of integrating the Frenet-Serret system along a profile.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub curve: DiscreteCurve,
    /// `|gamma(L) - gamma(0)|`; closure is reported, never enforced.
    pub closure_defect: f64,
    /// Frame reached at `s = L`.
    pub end_frame: [Vec3; 3],
}

#[derive(Clone, Copy)]
struct FrenetState {
    x: Vec3,
    t: Vec3,
    n: Vec3,
    b: Vec3,
}

impl FrenetState {
    fn rate(&self, k: f64, tau: f64) -> Self {
        Self {
            x: self.t,
            t: self.n * k,
            n: -self.t * k + self.b * tau,
            b: -self.n * tau,
        }
    }

    fn axpy(&self, h: f64, d: &Self) -> Self {
        Self { x: self.x + d.x * h, t: self.t + d.t * h, n: self.n + d.n * h, b: self.b + d.b * h }
    }

    fn orthonormalize(&mut self) {
        self.t = self.t.normalize();
        self.n = (self.n - self.t * self.t.dot(&self.n)).normalize();
        self.b = self.t.cross(&self.n);
    }
}

/// Integrates `gamma_s = T, T_s = kN, N_s = -kT + tau B, B_s = -tau N` over one period
/// with classical RK4, re-orthonormalising the frame after every step. Midpoint
/// values of `k` and `tau` come from band-limited interpolation.
pub fn reconstruct_curve(
    profile: &GeometryProfile,
    initial_point: Vec3,
    initial_frame: [Vec3; 3],
) -> Result<Reconstruction> {
    let n = profile.len();
    let [t0, n0, b0] = initial_frame;
    let gram = Matrix3::from_columns(&[t0, n0, b0]);
    if (gram.transpose() * gram - Matrix3::identity()).amax() > 1e-8 || gram.determinant() < 0.0 {
        return Err(Error::InvalidInput("initial frame must be orthonormal and right-handed".into()));
    }
    let h = profile.spacing();
    let k_mid = spectral::half_shift(&profile.k);
    let tau_mid = spectral::half_shift(&profile.tau);

    let mut state = FrenetState { x: initial_point, t: t0, n: n0, b: b0 };
    let mut points = Vec::with_capacity(n);
    for j in 0..n {
        points.push(state.x);
        let next = (j + 1) % n;
        let k1 = state.rate(profile.k[j], profile.tau[j]);
        let s2 = state.axpy(0.5 * h, &k1);
        let k2 = s2.rate(k_mid[j], tau_mid[j]);
        let s3 = state.axpy(0.5 * h, &k2);
        let k3 = s3.rate(k_mid[j], tau_mid[j]);
        let s4 = state.axpy(h, &k3);
        let k4 = s4.rate(profile.k[next], profile.tau[next]);
        state = FrenetState {
            x: state.x + (k1.x + (k2.x + k3.x) * 2.0 + k4.x) * (h / 6.0),
            t: state.t + (k1.t + (k2.t + k3.t) * 2.0 + k4.t) * (h / 6.0),
            n: state.n + (k1.n + (k2.n + k3.n) * 2.0 + k4.n) * (h / 6.0),
            b: state.b + (k1.b + (k2.b + k3.b) * 2.0 + k4.b) * (h / 6.0),
        };
        state.orthonormalize();
    }
    let lead = state.x - initial_point;
    let closure_defect = lead.norm();
    let curve = DiscreteCurve::with_lead(points, profile.length, lead)?;
    Ok(Reconstruction { curve, closure_defect, end_frame: [state.t, state.n, state.b] })
}

/// Least-squares rigid alignment (Kabsch) of `moving` onto `target`; returns the
/// largest pointwise distance after alignment.
pub fn aligned_linf_distance(moving: &[Vec3], target: &[Vec3]) -> f64 {
    assert_eq!(moving.len(), target.len());
    let n = moving.len() as f64;
    let cm = moving.iter().sum::<Vec3>() / n;
    let ct = target.iter().sum::<Vec3>() / n;
    let mut h = Matrix3::zeros();
    for (p, q) in moving.iter().zip(target) {
        h += (p - cm) * (q - ct).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("u");
    let v_t = svd.v_t.expect("v_t");
    let mut d = Matrix3::identity();
    if (v_t.transpose() * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = v_t.transpose() * d * u.transpose();
    moving
        .iter()
        .zip(target)
        .map(|(p, q)| (r * (p - cm) + ct - q).norm())
        .fold(0.0, f64::max)
}
