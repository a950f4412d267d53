//! The intrinsic description of a curve flow.
//!
//! A profile `(k, tau)` maps to the wave function `psi = k exp(i theta)` with
//! `theta(s) = int_0^s tau`. On a closed curve `psi` is periodic only when the total
//! torsion is a multiple of `2 pi`, so samples are stored in the gauge
//! `psi~ = psi exp(-i mu s)` with `mu` the mean torsion; derivatives of the physical
//! field become `D = d/ds + i mu` acting on `psi~`.
//!
//! A flow `gamma_t = C T + B N + A B` induces
//!
//! ```text
//! psi_t = i [ ((A/k) psi - i (B/k) psi)_ss - i C psi_s + (R - i B k) psi ]
//! R     = A k - Lambda + int_0^s B tau k,     Lambda_s = A k_s
//! ```
//!
//! `Lambda` is built by splitting `A` into its top-level terms that depend on `k` alone,
//! `alpha0(k)`, integrated in `k`, and the rest, `A1`, integrated along the curve:
//! `Lambda = int_0^k alpha0 + int_0^s A1 k_s`. The part of `R` that grows linearly in
//! `s` is absorbed by letting the gauge wavenumber drift,
//! `mu_t = mean(B tau k - A1 k_s)`.

mod solvers;

pub use solvers::{
    evolve_wave, step_general, step_specialized, step_specialized_with, LinearPart, SolverKind, SplitOrder,
    WaveTrajectory, WaveStepper,
};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{eval, eval_k_only, BinOp, EvalContext, Expr, FlowSpec, Var};
use crate::geometry::{validate_grid_size, GeometryProfile, K_FLOOR};
use crate::quadrature::gl32;
use crate::spectral;

/// Sampled wave function in the quasi-periodic gauge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveFunction {
    /// Gauged samples `psi~_j = psi(s_j) exp(-i mu s_j)`.
    pub psi: Vec<C64>,
    /// Gauge wavenumber.
    pub mu: f64,
    pub length: f64,
}

impl WaveFunction {
    pub fn new(psi: Vec<C64>, length: f64) -> Result<Self> {
        Self::with_gauge(psi, 0.0, length)
    }

    pub fn with_gauge(psi: Vec<C64>, mu: f64, length: f64) -> Result<Self> {
        validate_grid_size(psi.len())?;
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidInput(format!("domain length must be positive, got {length}")));
        }
        if !mu.is_finite() || psi.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidInput("wave function samples must be finite".into()));
        }
        Ok(Self { psi, mu, length })
    }

    /// Gauges a physical sample set: `psi~ = psi exp(-i mu s)`.
    pub fn from_physical(psi: &[C64], mu: f64, length: f64) -> Result<Self> {
        let ds = length / psi.len() as f64;
        let gauged = psi.iter().enumerate().map(|(j, z)| z * C64::from_polar(1.0, -mu * ds * j as f64)).collect();
        Self::with_gauge(gauged, mu, length)
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.psi.len() as f64
    }

    pub fn arclength(&self) -> Vec<f64> {
        let ds = self.spacing();
        (0..self.len()).map(|j| j as f64 * ds).collect()
    }

    /// Physical samples `psi(s_j)`.
    pub fn physical(&self) -> Vec<C64> {
        let ds = self.spacing();
        self.psi.iter().enumerate().map(|(j, z)| z * C64::from_polar(1.0, self.mu * ds * j as f64)).collect()
    }

    /// Multiplies by the global phase `exp(i phi)`.
    pub fn rotated(&self, phi: f64) -> Self {
        let r = C64::from_polar(1.0, phi);
        Self { psi: self.psi.iter().map(|z| z * r).collect(), mu: self.mu, length: self.length }
    }

    /// `int |psi|^2 ds`.
    pub fn norm_squared(&self) -> f64 {
        spectral::integrate(&self.psi.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>(), self.length)
    }

    pub fn max_modulus(&self) -> f64 {
        self.psi.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest pointwise distance between the physical fields.
    pub fn linf_distance(&self, other: &WaveFunction) -> f64 {
        self.physical().iter().zip(other.physical()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// `psi = k exp(i int_0^s tau)`, stored in the gauge `mu = mean(tau)`.
pub fn forward_transform(profile: &GeometryProfile) -> WaveFunction {
    let (theta, mu) = spectral::antiderivative(&profile.tau, profile.length);
    let psi = profile.k.iter().zip(&theta).map(|(&k, &th)| C64::from_polar(k, th)).collect();
    WaveFunction { psi, mu, length: profile.length }
}

/// As [`forward_transform`] with the phase measured from node `base`, so `theta(s_base) = 0`.
pub fn forward_transform_with_base(profile: &GeometryProfile, base: usize) -> WaveFunction {
    let mut w = forward_transform(profile);
    let phase = w.physical()[base % w.len()].arg();
    w.psi.iter_mut().for_each(|z| *z *= C64::from_polar(1.0, -phase));
    w
}

/// `k = |psi|`, `tau = Im(psi_s conj psi) / |psi|^2`; torsion at nodes with
/// `|psi| < K_FLOOR` is copied from the nearest regular node.
pub fn inverse_transform(wave: &WaveFunction) -> GeometryProfile {
    let n = wave.len();
    let d = spectral::complex_derivative(&wave.psi, wave.length, 1, 0.0);
    let k: Vec<f64> = wave.psi.iter().map(|z| z.norm()).collect();
    let mut tau = vec![0.0; n];
    let mut degenerate = Vec::new();
    for j in 0..n {
        if k[j] < K_FLOOR {
            degenerate.push(j);
        } else {
            tau[j] = (d[j] * wave.psi[j].conj()).im / (k[j] * k[j]) + wave.mu;
        }
    }
    if degenerate.len() < n {
        for &j in &degenerate {
            let src = (1..n)
                .flat_map(|o| [(j + o) % n, (j + n - o % n) % n])
                .find(|i| k[*i] >= K_FLOOR)
                .expect("a regular node exists");
            tau[j] = tau[src];
        }
    }
    GeometryProfile { k, tau, length: wave.length, degenerate }
}

fn sum_terms(terms: &[(f64, &Expr)]) -> Expr {
    terms.iter().fold(Expr::Num(0.0), |acc, &(sign, e)| {
        let op = if sign > 0.0 { BinOp::Add } else { BinOp::Sub };
        if acc.is_zero() && sign > 0.0 {
            e.clone()
        } else {
            Expr::binary(op, acc, e.clone())
        }
    })
}

/// `A = alpha0(k) + A1` by top-level terms.
pub fn split_binormal(a: &Expr) -> (Expr, Expr) {
    let terms = a.additive_terms();
    let (k_only, rest): (Vec<_>, Vec<_>) = terms.into_iter().partition(|(_, e)| e.is_k_only());
    (sum_terms(&k_only), sum_terms(&rest))
}

/// `int_0^k alpha0(kappa) d kappa`, closed form for polynomials, else 32-point Gauss-Legendre.
pub fn lambda_of_k(alpha0: &Expr, k: &[f64]) -> Result<Vec<f64>> {
    if let Some(poly) = alpha0.k_polynomial() {
        return Ok(k
            .iter()
            .map(|&x| poly.iter().enumerate().rev().fold(0.0, |acc, (n, &c)| acc * x + c / (n + 1) as f64) * x)
            .collect());
    }
    let rule = gl32();
    k.iter()
        .map(|&x| {
            let mut err = None;
            let v = rule.integrate(0.0, x, |kappa| {
                eval_k_only(alpha0, kappa).unwrap_or_else(|e| {
                    err = Some(e);
                    f64::NAN
                })
            });
            err.map_or(Ok(v), |e| Err(e.into()))
        })
        .collect()
}

/// Potential of the wave equation on one profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialTerm {
    /// `Lambda(s) = int_0^k alpha0 + int_0^s A1 k_s`.
    pub lambda: Vec<f64>,
    /// `int_0^s B tau k`.
    pub nonlocal: Vec<f64>,
    /// `A k - i B k - Lambda + nonlocal`.
    pub combined: Vec<C64>,
    /// Mean slope of `R`, the gauge drift `mu_t`.
    pub drift: f64,
    /// `R` with its linear trend `drift * s` removed; periodic.
    pub r_periodic: Vec<f64>,
}

struct Sampled {
    b: Vec<f64>,
    c: Vec<f64>,
    a_over_k: Vec<f64>,
    b_over_k: Vec<f64>,
    potential: PotentialTerm,
}

fn sample(spec: &FlowSpec, profile: &GeometryProfile, time: f64) -> Result<Sampled> {
    if !spec.is_geometric() {
        return Err(Error::NonGeometricFlow);
    }
    let n = profile.len();
    let s = profile.arclength();
    let ctx = EvalContext { k: &profile.k, tau: &profile.tau, s: &s, t: time, period: profile.length, speed: None };
    let field = |e: &Expr| -> Result<Vec<f64>> { Ok(eval(e, &ctx)?.into_field(n)) };
    let k_var = || Expr::Var(Var::K);
    let a = field(spec.a())?;
    let b = field(spec.b())?;
    let c = field(spec.c())?;
    let a_over_k = field(&Expr::div(spec.a().clone(), k_var()))?;
    let b_over_k = field(&Expr::div(spec.b().clone(), k_var()))?;

    let (alpha0, a1) = split_binormal(spec.a());
    let lambda0 = lambda_of_k(&alpha0, &profile.k)?;
    let k_s = spectral::derivative(&profile.k, profile.length, 1);
    let a1 = field(&a1)?;
    let a1_ks: Vec<f64> = a1.iter().zip(&k_s).map(|(x, y)| x * y).collect();
    let btk: Vec<f64> = (0..n).map(|j| b[j] * profile.tau[j] * profile.k[j]).collect();
    let (p_a1, m_a1) = spectral::antiderivative(&a1_ks, profile.length);
    let (p_btk, m_btk) = spectral::antiderivative(&btk, profile.length);

    let lambda: Vec<f64> = (0..n).map(|j| lambda0[j] + p_a1[j] + m_a1 * s[j]).collect();
    let nonlocal: Vec<f64> = (0..n).map(|j| p_btk[j] + m_btk * s[j]).collect();
    let combined = (0..n)
        .map(|j| C64::new(a[j] * profile.k[j] - lambda[j] + nonlocal[j], -b[j] * profile.k[j]))
        .collect();
    let r_periodic = (0..n).map(|j| a[j] * profile.k[j] - lambda0[j] - p_a1[j] + p_btk[j]).collect();
    let potential = PotentialTerm { lambda, nonlocal, combined, drift: m_btk - m_a1, r_periodic };
    Ok(Sampled { b, c, a_over_k, b_over_k, potential })
}

/// The potential term of the flow's wave equation on `profile`.
pub fn potential_term(spec: &FlowSpec, profile: &GeometryProfile) -> Result<PotentialTerm> {
    Ok(sample(spec, profile, 0.0)?.potential)
}

/// Right-hand side for `psi~` together with the gauge drift `mu_t`.
pub fn general_rhs_with_drift(wave: &WaveFunction, spec: &FlowSpec, time: f64) -> Result<(Vec<C64>, f64)> {
    let profile = inverse_transform(wave);
    let f = sample(spec, &profile, time)?;
    let (l, mu) = (wave.length, wave.mu);
    let n = wave.len();
    let p_psi: Vec<C64> = (0..n).map(|j| C64::new(f.a_over_k[j], -f.b_over_k[j]) * wave.psi[j]).collect();
    let dispersion = spectral::complex_derivative(&p_psi, l, 2, mu);
    let d_psi = spectral::complex_derivative(&wave.psi, l, 1, mu);
    let i = C64::i();
    let rhs = (0..n)
        .map(|j| {
            let pot = C64::new(f.potential.r_periodic[j], -f.b[j] * profile.k[j]);
            i * (dispersion[j] - i * f.c[j] * d_psi[j] + pot * wave.psi[j])
        })
        .collect();
    Ok((rhs, f.potential.drift))
}

/// `psi~_t` for an arbitrary geometric flow.
pub fn general_rhs(wave: &WaveFunction, spec: &FlowSpec, time: f64) -> Result<Vec<C64>> {
    Ok(general_rhs_with_drift(wave, spec, time)?.0)
}

/// `i (psi_ss + |psi|^2 psi / 2)`.
pub fn nls_rhs(wave: &WaveFunction) -> Vec<C64> {
    let d2 = spectral::complex_derivative(&wave.psi, wave.length, 2, wave.mu);
    let i = C64::i();
    wave.psi.iter().zip(d2).map(|(z, d)| i * (d + 0.5 * z.norm_sqr() * z)).collect()
}

/// `i (psi_ss + |psi|^2 psi / 2) + W (psi_sss + 3/2 |psi|^2 psi_s)`.
pub fn hirota_rhs(wave: &WaveFunction, w: f64) -> Vec<C64> {
    let (l, mu) = (wave.length, wave.mu);
    let d1 = spectral::complex_derivative(&wave.psi, l, 1, mu);
    let d2 = spectral::complex_derivative(&wave.psi, l, 2, mu);
    let d3 = spectral::complex_derivative(&wave.psi, l, 3, mu);
    let i = C64::i();
    (0..wave.len())
        .map(|j| {
            let r2 = wave.psi[j].norm_sqr();
            i * (d2[j] + 0.5 * r2 * wave.psi[j]) + w * (d3[j] + 1.5 * r2 * d1[j])
        })
        .collect()
}

/// `f(r) = sum_n a_n n/(n+1) r^(n+1)`; `coefficients[i]` is `a_{i+1}`.
pub fn power_series_potential(coefficients: &[f64], r: f64) -> f64 {
    coefficients
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let n = (i + 1) as f64;
            a * n / (n + 1.0) * r.powi(i as i32 + 2)
        })
        .sum()
}

/// `i [ (sum_n a_n |psi|^(n-1) psi)_ss + f(|psi|) psi ]`.
pub fn power_series_rhs(wave: &WaveFunction, coefficients: &[f64]) -> Vec<C64> {
    let weighted: Vec<C64> = wave
        .psi
        .iter()
        .map(|z| {
            let r = z.norm();
            let p: f64 = coefficients.iter().enumerate().map(|(i, a)| a * r.powi(i as i32)).sum();
            p * z
        })
        .collect();
    let d2 = spectral::complex_derivative(&weighted, wave.length, 2, wave.mu);
    let i = C64::i();
    wave.psi.iter().zip(d2).map(|(z, d)| i * (d + power_series_potential(coefficients, z.norm()) * z)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::random_profile;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;
    use std::f64::consts::TAU;

    fn linf(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    /// Band-limited `psi` with `|psi| >= 0.1`, returned in a random gauge.
    pub(crate) fn random_wave(rng: &mut impl Rng, n: usize, length: f64, modes: i64) -> WaveFunction {
        loop {
            let mut psi = vec![C64::new(0.0, 0.0); n];
            let base = C64::from_polar(rng.random_range(0.8..1.5), rng.random_range(0.0..TAU));
            for m in -modes..=modes {
                let amp = if m == 0 {
                    base
                } else {
                    C64::from_polar(rng.random_range(0.0..0.3) / (m * m) as f64, rng.random_range(0.0..TAU))
                };
                for (j, z) in psi.iter_mut().enumerate() {
                    *z += amp * C64::from_polar(1.0, TAU * (m * j as i64) as f64 / n as f64);
                }
            }
            if psi.iter().all(|z| z.norm() >= 0.1) {
                return WaveFunction::with_gauge(psi, rng.random_range(-1.0..1.0), length).unwrap();
            }
        }
    }

    #[test]
    fn forward_examples() {
        let p = GeometryProfile::new(vec![2.0; 32], vec![0.0; 32], 3.0).unwrap();
        let w = forward_transform(&p);
        assert!(w.psi.iter().all(|z| (z - C64::new(2.0, 0.0)).norm() < 1e-15));

        let p = GeometryProfile::new(vec![0.8; 64], vec![0.4; 64], 7.0).unwrap();
        let w = forward_transform(&p);
        for (s, z) in w.arclength().iter().zip(w.physical()) {
            assert!((z - C64::from_polar(0.8, 0.4 * s)).norm() < 1e-14);
        }

        let n = 256;
        let k: Vec<f64> = (0..n).map(|j| 2.0 / (5.0 * ((j as f64 - 128.0) / 16.0)).cosh()).collect();
        let p = GeometryProfile::new(k.clone(), vec![0.0; n], 16.0).unwrap();
        let w = forward_transform(&p);
        for (z, k) in w.physical().iter().zip(&k) {
            assert!(z.im == 0.0 && (z.re - k).abs() < 1e-14);
        }
    }

    #[test]
    fn inverse_examples() {
        let w = WaveFunction::new(vec![C64::new(3.0, 0.0); 16], 2.0).unwrap();
        let p = inverse_transform(&w);
        assert!(p.k.iter().all(|&k| k == 3.0) && p.tau.iter().all(|t| t.abs() < 1e-15));

        let l = 5.0 * TAU;
        let psi: Vec<C64> = (0..64).map(|j| C64::from_polar(0.8, 0.4 * l * j as f64 / 64.0)).collect();
        let p = inverse_transform(&WaveFunction::new(psi, l).unwrap());
        assert!(p.k.iter().all(|k| (k - 0.8).abs() < 1e-14));
        assert!(p.tau.iter().all(|t| (t - 0.4).abs() < 1e-12));
    }

    #[test]
    fn round_trip_on_random_profiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = random_profile(&mut rng, 128, 9.0, 6, 0.1);
            let q = inverse_transform(&forward_transform(&p));
            for j in 0..128 {
                assert!((p.k[j] - q.k[j]).abs() < 1e-10);
                assert!((p.tau[j] - q.tau[j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn base_point_changes_only_a_global_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_profile(&mut rng, 64, 4.0, 5, 0.2);
        let a = forward_transform(&p).physical();
        let b = forward_transform_with_base(&p, 17).physical();
        let ratio = b[0] / a[0];
        assert!((ratio.norm() - 1.0).abs() < 1e-14);
        for j in 0..64 {
            assert!((b[j] - a[j] * ratio).norm() < 1e-13);
        }
        assert!((b[17] - C64::new(p.k[17], 0.0)).norm() < 1e-13);
    }

    #[test]
    fn lambda_closed_form_and_quadrature_agree() {
        let a = crate::flow::parse_expr("k - 0.5*k^3").unwrap();
        let k = [0.0, 0.3, 1.0, 2.2];
        let exact = lambda_of_k(&a, &k).unwrap();
        for (x, l) in k.iter().zip(&exact) {
            assert!((l - (x * x / 2.0 - x.powi(4) / 8.0)).abs() < 1e-12);
        }
        let s = crate::flow::parse_expr("sqrt(1 + k^2)").unwrap();
        let q = lambda_of_k(&s, &k).unwrap();
        for (x, l) in k.iter().zip(&q) {
            let oracle = 0.5 * (x * (1.0 + x * x).sqrt() + x.asinh());
            assert!((l - oracle).abs() < 1e-13, "{l} {oracle}");
        }
    }

    #[test]
    fn power_series_potential_matches_lambda() {
        let spec = FlowSpec::power_series(&[1.0, -0.4, 0.2]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_profile(&mut rng, 64, 3.0, 4, 0.1);
        let pot = potential_term(&spec, &p).unwrap();
        for j in 0..64 {
            let k = p.k[j];
            let lambda = k * k / 2.0 - 0.4 * k.powi(3) / 3.0 + 0.2 * k.powi(4) / 4.0;
            assert!((pot.lambda[j] - lambda).abs() < 1e-12);
            assert_eq!(pot.nonlocal[j], 0.0);
        }
        assert_eq!(pot.drift, 0.0);
    }

    #[test]
    fn vfe_matches_nls_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = FlowSpec::vfe();
        for _ in 0..10 {
            let w = random_wave(&mut rng, 128, 7.0, 5);
            let err = linf(&general_rhs(&w, &spec, 0.0).unwrap(), &nls_rhs(&w));
            assert!(err < 1e-8, "{err}");
        }
    }

    #[test]
    fn fm_matches_hirota_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = FlowSpec::fukumoto_miyazaki(0.3);
        for _ in 0..10 {
            let w = random_wave(&mut rng, 128, 7.0, 5);
            let (rhs, drift) = general_rhs_with_drift(&w, &spec, 0.0).unwrap();
            let err = linf(&rhs, &hirota_rhs(&w, 0.3));
            assert!(err < 1e-8, "{err}");
            assert!(drift.abs() < 1e-12);
        }
    }

    #[test]
    fn power_series_general_matches_specialized_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let coefficients = [0.7, 0.3, -0.1];
        let spec = FlowSpec::power_series(&coefficients);
        for _ in 0..5 {
            let w = random_wave(&mut rng, 128, 7.0, 4);
            let err = linf(&general_rhs(&w, &spec, 0.0).unwrap(), &power_series_rhs(&w, &coefficients));
            assert!(err < 1e-8, "{err}");
        }
    }

    #[test]
    fn constant_field_under_vfe() {
        let c = 0.7;
        let w = WaveFunction::new(vec![C64::new(c, 0.0); 32], 4.0).unwrap();
        let rhs = general_rhs(&w, &FlowSpec::vfe(), 0.0).unwrap();
        for z in rhs {
            assert!((z - C64::new(0.0, c * c * c / 2.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn explicit_coordinates_are_rejected() {
        let spec = FlowSpec::parse("k*(1 + 0*t) + t", "0", "0", BTreeMap::new()).unwrap();
        let w = WaveFunction::new(vec![C64::new(1.0, 0.0); 16], 1.0).unwrap();
        assert!(matches!(general_rhs(&w, &spec, 0.0), Err(Error::NonGeometricFlow)));
    }

    #[test]
    fn normal_flow_drifts_the_gauge() {
        // B = k: mu_t = mean(k^2 tau)
        let spec = FlowSpec::parse("0", "k", "0", BTreeMap::new()).unwrap();
        let p = GeometryProfile::new(vec![0.5; 32], vec![0.25; 32], 3.0).unwrap();
        let (_, drift) = general_rhs_with_drift(&forward_transform(&p), &spec, 0.0).unwrap();
        assert!((drift - 0.0625).abs() < 1e-14);
    }
}
