//! Length, bending energy and their rates under a flow.
//!
//! Rates use spectral derivatives and periodic quadrature, so integrals of exact
//! derivatives vanish to roundoff.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolver::Trajectory;
use crate::flow::{eval, profile_context, Expr, FlowSpec};
use crate::geometry::{analyze_curve, frames_from_curve, reconstruct_curve, DiscreteCurve, GeometryProfile};
use crate::hasimoto::WaveTrajectory;
use crate::spectral;

/// `int |gamma_u| du` from the raw points.
pub fn curve_length(curve: &DiscreteCurve) -> f64 {
    spectral::integrate(&curve.speed(), curve.length())
}

pub fn profile_length(profile: &GeometryProfile) -> f64 {
    profile.length
}

/// `int (C_s - B k) ds`.
pub fn length_rate(profile: &GeometryProfile, spec: &FlowSpec, time: f64) -> Result<f64> {
    let r = crate::flow::length_condition(spec, profile, time)?;
    Ok(spectral::integrate(&r, profile.length))
}

pub fn bending_energy(profile: &GeometryProfile) -> f64 {
    let k2: Vec<f64> = profile.k.iter().map(|k| k * k).collect();
    spectral::integrate(&k2, profile.length)
}

/// `int k^2 |gamma_u| du` on a possibly non-uniform parameterisation.
pub fn curve_bending_energy(curve: &DiscreteCurve) -> Result<f64> {
    let geo = analyze_curve(curve)?;
    let f: Vec<f64> = geo.k.iter().zip(&geo.speed).map(|(k, v)| k * k * v).collect();
    Ok(spectral::integrate(&f, curve.length()))
}

struct RateFields {
    k: Vec<f64>,
    k_s: Vec<f64>,
    tau: Vec<f64>,
    tau_s: Vec<f64>,
    a: Vec<f64>,
    a_s: Vec<f64>,
    b: Vec<f64>,
    b_ss: Vec<f64>,
    c: Vec<f64>,
    c_s: Vec<f64>,
}

fn rate_fields(profile: &GeometryProfile, spec: &FlowSpec, time: f64) -> Result<RateFields> {
    spec.validate_periodicity(profile.length)?;
    let n = profile.len();
    let s = profile.arclength();
    let ctx = profile_context(profile, &s, time);
    let field = |e: &Expr| -> Result<Vec<f64>> { Ok(eval(e, &ctx)?.into_field(n)) };
    let ds = |e: &Expr| Expr::Ds(Box::new(e.clone()));
    Ok(RateFields {
        k: profile.k.clone(),
        k_s: ctx.d_s(&profile.k),
        tau: profile.tau.clone(),
        tau_s: ctx.d_s(&profile.tau),
        a: field(spec.a())?,
        a_s: field(&ds(spec.a()))?,
        b: field(spec.b())?,
        b_ss: field(&ds(&ds(spec.b())))?,
        c: field(spec.c())?,
        c_s: field(&ds(spec.c()))?,
    })
}

/// `2 int [k B_ss + 2 k^2 C_s + k k_s C - 2 k A_s tau - k A tau_s - k B tau^2 - B k^2 tau] ds`.
///
/// Exact for binormal flows. For flows with normal or tangential components it omits
/// the stretching of the metric; see [`bending_energy_rate_general`].
pub fn bending_energy_rate(profile: &GeometryProfile, spec: &FlowSpec, time: f64) -> Result<f64> {
    let f = rate_fields(profile, spec, time)?;
    let integrand: Vec<f64> = (0..profile.len())
        .map(|j| {
            let (k, tau) = (f.k[j], f.tau[j]);
            k * f.b_ss[j] + 2.0 * k * k * f.c_s[j] + k * f.k_s[j] * f.c[j]
                - 2.0 * k * f.a_s[j] * tau
                - k * f.a[j] * f.tau_s[j]
                - k * f.b[j] * tau * tau
                - f.b[j] * k * k * tau
        })
        .collect();
    Ok(2.0 * spectral::integrate(&integrand, profile.length))
}

/// `int [2 k B_ss - 4 k A_s tau - 2 k A tau_s - 2 k B tau^2 + B k^3] ds`, valid for any flow.
///
/// Tangential motion is a reparameterisation and does not enter.
pub fn bending_energy_rate_general(profile: &GeometryProfile, spec: &FlowSpec, time: f64) -> Result<f64> {
    let f = rate_fields(profile, spec, time)?;
    let integrand: Vec<f64> = (0..profile.len())
        .map(|j| {
            let (k, tau, b) = (f.k[j], f.tau[j], f.b[j]);
            2.0 * k * f.b_ss[j] - 4.0 * k * f.a_s[j] * tau - 2.0 * k * f.a[j] * f.tau_s[j] - 2.0 * k * b * tau * tau
                + b * k * k * k
        })
        .collect();
    Ok(spectral::integrate(&integrand, profile.length))
}

/// `int (2n - 2)/(n + 1) k^(n+1) tau_s ds`, the rate for `A = k^n`, `B = C = 0`.
pub fn power_law_rate(profile: &GeometryProfile, n: i32) -> f64 {
    let tau_s = spectral::derivative(&profile.tau, profile.length, 1);
    let factor = (2 * n - 2) as f64 / (n + 1) as f64;
    let f: Vec<f64> = profile.k.iter().zip(&tau_s).map(|(k, ts)| factor * k.powi(n + 1) * ts).collect();
    spectral::integrate(&f, profile.length)
}

/// Time series of invariants along a run, aligned with `times`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub times: Vec<f64>,
    #[serde(rename = "I1")]
    pub i1: Vec<f64>,
    #[serde(rename = "I2")]
    pub i2: Vec<f64>,
    #[serde(rename = "dI1_analytic")]
    pub di1_analytic: Vec<f64>,
    #[serde(rename = "dI2_analytic")]
    pub di2_analytic: Vec<f64>,
    pub closure_defect: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_path_error: Option<Vec<f64>>,
}

/// Scalar digest of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsSummary {
    pub max_relative_length_drift: f64,
    pub max_relative_energy_drift: f64,
    /// `(I(t_end) - I(0)) / t_end`, zero for a single sample.
    pub measured_length_rate: f64,
    pub measured_energy_rate: f64,
    pub max_closure_defect: f64,
    pub max_dual_path_error: Option<f64>,
}

/// `|gamma(L) - gamma(0) - lead|` of the curve rebuilt from `profile`, started at node 0 of `curve`.
pub fn closure_defect(curve: &DiscreteCurve, profile: &GeometryProfile) -> Result<f64> {
    let frame = frames_from_curve(curve)?;
    let rec = reconstruct_curve(profile, curve.points()[0], [frame.t[0], frame.n[0], frame.b[0]])?;
    Ok((rec.curve.lead() - curve.lead()).norm())
}

impl DiagnosticsReport {
    pub fn from_trajectory(traj: &Trajectory, spec: &FlowSpec) -> Result<Self> {
        let mut r = Self::empty();
        for (&t, (curve, profile)) in traj.times.iter().zip(&traj.snapshots) {
            r.times.push(t);
            r.i1.push(curve_length(curve));
            r.i2.push(curve_bending_energy(curve)?);
            r.di1_analytic.push(length_rate(profile, spec, t)?);
            r.di2_analytic.push(bending_energy_rate_general(profile, spec, t)?);
            r.closure_defect.push(closure_defect(curve, profile)?);
        }
        Ok(r)
    }

    /// Intrinsic run: `I1 = L`, `I2 = int |psi|^2 ds`, closure of the rebuilt curve.
    pub fn from_waves(traj: &WaveTrajectory, spec: &FlowSpec) -> Result<Self> {
        let mut r = Self::empty();
        for (&t, wave) in traj.times.iter().zip(&traj.waves) {
            let profile = crate::hasimoto::inverse_transform(wave);
            r.times.push(t);
            r.i1.push(wave.length);
            r.i2.push(wave.norm_squared());
            r.di1_analytic.push(length_rate(&profile, spec, t)?);
            r.di2_analytic.push(bending_energy_rate_general(&profile, spec, t)?);
            let rec = reconstruct_curve(&profile, Default::default(), identity_frame())?;
            r.closure_defect.push(rec.closure_defect);
        }
        Ok(r)
    }

    pub fn with_dual_path_error(mut self, error: Vec<f64>) -> Result<Self> {
        if error.len() != self.times.len() {
            return Err(Error::InvalidInput(format!(
                "dual-path error has {} samples for {} times",
                error.len(),
                self.times.len()
            )));
        }
        self.dual_path_error = Some(error);
        Ok(self)
    }

    pub fn summary(&self) -> DiagnosticsSummary {
        let drift = |v: &[f64]| {
            let v0 = v.first().copied().unwrap_or(0.0);
            let scale = if v0 != 0.0 { v0.abs() } else { 1.0 };
            v.iter().map(|x| (x - v0).abs() / scale).fold(0.0, f64::max)
        };
        let rate = |v: &[f64]| match (v.first(), v.last(), self.times.last()) {
            (Some(a), Some(b), Some(&t)) if t > 0.0 => (b - a) / t,
            _ => 0.0,
        };
        let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        DiagnosticsSummary {
            max_relative_length_drift: drift(&self.i1),
            max_relative_energy_drift: drift(&self.i2),
            measured_length_rate: rate(&self.i1),
            measured_energy_rate: rate(&self.i2),
            max_closure_defect: max(&self.closure_defect),
            max_dual_path_error: self.dual_path_error.as_deref().map(max),
        }
    }

    fn empty() -> Self {
        Self {
            times: Vec::new(),
            i1: Vec::new(),
            i2: Vec::new(),
            di1_analytic: Vec::new(),
            di2_analytic: Vec::new(),
            closure_defect: Vec::new(),
            dual_path_error: None,
        }
    }
}

fn identity_frame() -> [crate::geometry::Vec3; 3] {
    use crate::geometry::Vec3;
    [Vec3::x(), Vec3::y(), Vec3::z()]
}
