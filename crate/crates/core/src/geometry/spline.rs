//! Periodic cubic-spline resampling at uniform arclength.

use super::{DiscreteCurve, Vec3};
use crate::error::{Error, Result};
use crate::quadrature::gl10;

/// Closed (lead-periodic) interpolating cubic spline through the curve nodes,
/// parameterised by cumulative chord length.
struct PeriodicSpline {
    knots: Vec<f64>,
    values: Vec<Vec3>,
    second: Vec<Vec3>,
    lead: Vec3,
}

impl PeriodicSpline {
    fn new(curve: &DiscreteCurve) -> Result<Self> {
        let pts = curve.points();
        let n = pts.len();
        let lead = curve.lead();
        let next = |j: usize| if j + 1 == n { pts[0] + lead } else { pts[j + 1] };
        let h: Vec<f64> = (0..n).map(|j| (next(j) - pts[j]).norm()).collect();
        let mut knots = Vec::with_capacity(n + 1);
        knots.push(0.0);
        for (j, &hj) in h.iter().enumerate() {
            if !(hj > 0.0 && hj.is_finite()) {
                return Err(Error::SelfIntersectionSuspected { index: j });
            }
            knots.push(knots[j] + hj);
        }

        // h_{j-1} M_{j-1} + 2 (h_{j-1} + h_j) M_j + h_j M_{j+1} = 6 (slope_j - slope_{j-1})
        let slope: Vec<Vec3> = (0..n).map(|j| (next(j) - pts[j]) / h[j]).collect();
        let sub: Vec<f64> = (0..n).map(|j| h[(j + n - 1) % n]).collect();
        let diag: Vec<f64> = (0..n).map(|j| 2.0 * (h[(j + n - 1) % n] + h[j])).collect();
        let sup: Vec<f64> = h.clone();
        let rhs: Vec<Vec3> = (0..n).map(|j| (slope[j] - slope[(j + n - 1) % n]) * 6.0).collect();
        let second = solve_cyclic(&sub, &diag, &sup, &rhs);
        Ok(Self { knots, values: pts.to_vec(), second, lead })
    }

    fn segment(&self, j: usize) -> (f64, Vec3, Vec3, Vec3, Vec3) {
        let n = self.values.len();
        let h = self.knots[j + 1] - self.knots[j];
        let y1 = if j + 1 == n { self.values[0] + self.lead } else { self.values[j + 1] };
        (h, self.values[j], y1, self.second[j], self.second[(j + 1) % n])
    }

    fn eval(&self, j: usize, t: f64) -> Vec3 {
        let (h, y0, y1, m0, m1) = self.segment(j);
        let a = h - t;
        m0 * (a * a * a / (6.0 * h)) + m1 * (t * t * t / (6.0 * h)) + (y0 / h - m0 * (h / 6.0)) * a
            + (y1 / h - m1 * (h / 6.0)) * t
    }

    fn speed(&self, j: usize, t: f64) -> f64 {
        let (h, y0, y1, m0, m1) = self.segment(j);
        let a = h - t;
        (-m0 * (a * a / (2.0 * h)) + m1 * (t * t / (2.0 * h)) - (y0 / h - m0 * (h / 6.0))
            + (y1 / h - m1 * (h / 6.0)))
            .norm()
    }

    fn arc(&self, j: usize, t: f64) -> f64 {
        gl10().integrate(0.0, t, |x| self.speed(j, x))
    }
}

/// Cyclic tridiagonal solve (Sherman-Morrison on top of the Thomas algorithm).
fn solve_cyclic(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[Vec3]) -> Vec<Vec3> {
    let n = diag.len();
    let alpha = sup[n - 1];
    let beta = sub[0];
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= alpha * beta / gamma;

    let thomas = |r: &[Vec3]| -> Vec<Vec3> {
        let mut c = vec![0.0; n];
        let mut x = vec![Vec3::zeros(); n];
        c[0] = sup[0] / d[0];
        x[0] = r[0] / d[0];
        for i in 1..n {
            let m = d[i] - sub[i] * c[i - 1];
            c[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
            x[i] = (r[i] - x[i - 1] * sub[i]) / m;
        }
        for i in (0..n - 1).rev() {
            x[i] = x[i] - x[i + 1] * c[i];
        }
        x
    };

    let y = thomas(rhs);
    let mut u = vec![Vec3::zeros(); n];
    u[0] = Vec3::repeat(gamma);
    u[n - 1] = Vec3::repeat(alpha);
    let z = thomas(&u);
    let fact: Vec3 = Vec3::from_fn(|c, _| {
        (y[0][c] + beta * y[n - 1][c] / gamma) / (1.0 + z[0][c] + beta * z[n - 1][c] / gamma)
    });
    (0..n).map(|i| y[i] - z[i].component_mul(&fact)).collect()
}

/// Resamples the curve at `N` nodes equally spaced in arclength along its periodic
/// cubic-spline interpolant, keeping node 0 fixed. The new domain length is the
/// spline's total arclength.
pub fn reparameterize(curve: &DiscreteCurve) -> Result<DiscreteCurve> {
    let spline = PeriodicSpline::new(curve)?;
    let n = curve.len();
    let mut cumulative = Vec::with_capacity(n + 1);
    cumulative.push(0.0);
    for j in 0..n {
        let h = spline.knots[j + 1] - spline.knots[j];
        let seg = spline.arc(j, h);
        if !(seg > 0.0 && seg.is_finite()) {
            return Err(Error::SelfIntersectionSuspected { index: j });
        }
        cumulative.push(cumulative[j] + seg);
    }
    let total = cumulative[n];

    let mut points = Vec::with_capacity(n);
    for m in 0..n {
        let target = total * m as f64 / n as f64;
        let j = cumulative.partition_point(|&c| c <= target).saturating_sub(1).min(n - 1);
        let h = spline.knots[j + 1] - spline.knots[j];
        let local = target - cumulative[j];
        let seg_len = cumulative[j + 1] - cumulative[j];
        let mut t = h * local / seg_len;
        if local > 0.0 {
            let mut converged = false;
            for _ in 0..60 {
                let step = (spline.arc(j, t) - local) / spline.speed(j, t);
                t = (t - step).clamp(0.0, h);
                if step.abs() <= 1e-14 * h {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::SelfIntersectionSuspected { index: j });
            }
        }
        points.push(if local > 0.0 { spline.eval(j, t) } else { curve.points()[j] });
    }
    DiscreteCurve::with_lead(points, total, curve.lead())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{circle, helix};
    use std::f64::consts::TAU;

    #[test]
    fn uniform_circle_is_a_fixed_point() {
        let c = circle(64, 1.5).unwrap();
        let r = reparameterize(&c).unwrap();
        for (p, q) in c.points().iter().zip(r.points()) {
            assert!((p - q).norm() < 1e-12);
        }
        assert!(r.chord_nonuniformity() < 1e-10);
    }

    fn warped_circle(n: usize, r: f64) -> DiscreteCurve {
        let pts = (0..n)
            .map(|j| {
                let u = TAU * j as f64 / n as f64;
                let phi = u + 0.3 * u.sin();
                Vec3::new(r * phi.cos(), r * phi.sin(), 0.0)
            })
            .collect();
        DiscreteCurve::new(pts, TAU * r).unwrap()
    }

    #[test]
    fn nonuniform_circle_becomes_uniform() {
        let mut errs = Vec::new();
        for n in [64, 128] {
            let r = reparameterize(&warped_circle(n, 2.0)).unwrap();
            assert!(r.chord_nonuniformity() < 1e-6);
            errs.push((r.length() - TAU * 2.0).abs());
        }
        assert!(errs[1] < 1e-5);
        assert!((errs[0] / errs[1]).log2() > 3.5, "{errs:?}");
    }

    #[test]
    fn uniform_circle_output_has_uniform_chords_after_warped_input() {
        let r = reparameterize(&warped_circle(256, 1.0)).unwrap();
        let r2 = reparameterize(&r).unwrap();
        assert!(r2.chord_nonuniformity() < 1e-8);
        for p in r.points() {
            assert!((p.norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn helix_lead_is_kept() {
        let h = helix(64, 1.0, 0.5).unwrap();
        let r = reparameterize(&h).unwrap();
        assert_eq!(r.lead(), h.lead());
        assert!((r.length() - h.length()).abs() < 1e-5);
    }

    #[test]
    fn duplicate_nodes_are_rejected() {
        let mut pts = circle(16, 1.0).unwrap().into_points();
        pts[5] = pts[4];
        let c = DiscreteCurve::new(pts, TAU).unwrap();
        assert!(matches!(reparameterize(&c), Err(Error::SelfIntersectionSuspected { index: 4 })));
    }
}
