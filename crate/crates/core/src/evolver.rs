//! Extrinsic time stepping of `gamma_t = C T + B N + A B`.
//!
//! Each RK4 stage recomputes the Frenet frame and profile from the current points.
//! Derivatives are taken with respect to the grid coordinate `u` and divided by
//! `|gamma_u|`, so stages on a grid that is no longer uniform in arclength stay
//! consistent. The velocity is left unfiltered: a mode cut would tilt it out of the
//! normal plane and break arclength preservation of binormal flows. Increments are
//! accumulated with compensated summation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{default_probes, length_condition, EvalContext, FlowCoefficients, FlowSpec};
use crate::geometry::{analyze_curve, profile_from_curve, reparameterize, DiscreteCurve, GeometryProfile, Vec3};
use crate::spectral;

/// Default prefactor of the step-size cap.
pub const STABILITY_CONSTANT: f64 = 0.25;

/// A step may move no node further than this fraction of the grid spacing.
pub const MAX_DISPLACEMENT_FRACTION: f64 = 0.5;

/// Local length-condition residual above which the evolver resamples every step.
const LENGTH_CONDITION_TOLERANCE: f64 = 1e-10;

/// `h rho` bound kept inside the RK4 stability region (boundary near 2.8 on both axes).
pub const RK4_STABLE_PRODUCT: f64 = 2.0;

const POWER_ITERATIONS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    /// Macro step; split into equal substeps no longer than the stability cap.
    pub dt: f64,
    pub t_final: f64,
    /// Macro steps between reparameterisations; `None` resamples every step exactly
    /// when the flow changes local arclength (`C_s != B k`), and never otherwise.
    #[serde(default)]
    pub reparam_every: Option<usize>,
    pub record_every: usize,
}

impl EvolutionConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        Self { dt, t_final, reparam_every: None, record_every: 1 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidInput(format!("t_final must be >= 0, got {}", self.t_final)));
        }
        if self.record_every == 0 || self.reparam_every == Some(0) {
            return Err(Error::InvalidInput("record_every and reparam_every must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<(DiscreteCurve, GeometryProfile)>,
    /// Step actually taken after substepping.
    pub step: f64,
    pub substeps_per_step: usize,
    pub reparam_every: Option<usize>,
    /// Estimated spectral radius of the velocity Jacobian on the initial curve.
    pub spectral_radius: f64,
}

/// `c ds^(2+d) / (1 + d + max(deg_k A - 1, 0))` with `d` the `d_s` nesting depth.
pub fn stability_cap(n: usize, length: f64, spec: &FlowSpec) -> f64 {
    stability_cap_with(n, length, spec, STABILITY_CONSTANT)
}

pub fn stability_cap_with(n: usize, length: f64, spec: &FlowSpec, c: f64) -> f64 {
    let ds = length / n as f64;
    let depth = spec.derivative_depth();
    let degree = (spec.a().k_degree() - 1.0).max(0.0);
    c * ds.powi(2 + depth as i32) / (1.0 + depth as f64 + degree)
}

/// Whether the flow needs resampling to keep the grid uniform in arclength.
pub fn changes_local_length(spec: &FlowSpec, length: f64) -> Result<bool> {
    if spec.b().is_zero() && spec.c().is_zero() {
        return Ok(false);
    }
    for p in default_probes(32, length, 3, 0) {
        let r = length_condition(spec, &p, 0.0)?;
        if r.iter().any(|x| x.abs() > LENGTH_CONDITION_TOLERANCE) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Velocity `C T + B N + A B` at every node, 2/3-dealiased when a coefficient contains `d_s`.
pub fn curve_velocity(curve: &DiscreteCurve, spec: &FlowSpec, time: f64) -> Result<Vec<Vec3>> {
    let geo = analyze_curve(curve)?;
    let n = curve.len();
    let s = spectral::cumulative_integral(&geo.speed, curve.length());
    let ctx = EvalContext {
        k: &geo.k,
        tau: &geo.tau,
        s: &s,
        t: time,
        period: curve.length(),
        speed: Some(&geo.speed),
    };
    let f = FlowCoefficients::from_context(spec, &ctx)?;
    let v: Vec<Vec3> = (0..n)
        .map(|j| geo.frame.t[j] * f.c[j] + geo.frame.n[j] * f.b[j] + geo.frame.b[j] * f.a[j])
        .collect();
    if spec.derivative_depth() == 0 {
        return Ok(v);
    }
    // products of derivatives alias into an instability at the top modes
    let mut comps: [Vec<f64>; 3] = std::array::from_fn(|d| v.iter().map(|x| x[d]).collect());
    comps.iter_mut().for_each(|c| spectral::dealias_real(c));
    Ok((0..n).map(|j| Vec3::new(comps[0][j], comps[1][j], comps[2][j])).collect())
}

/// Power-iteration estimate of the spectral radius of `d velocity / d points`.
///
/// Dispersive modes come in conjugate pairs, so the estimate is the geometric mean of
/// the growth factors over the second half of the iterations.
pub fn estimate_spectral_radius(curve: &DiscreteCurve, spec: &FlowSpec, time: f64) -> Result<f64> {
    let n = curve.len();
    let base = curve_velocity(curve, spec, time)?;
    let eps = 1e-7 * curve.spacing();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut dir: Vec<Vec3> =
        (0..n).map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let norm = |v: &[Vec3]| v.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt();
    let scale = norm(&dir);
    dir.iter_mut().for_each(|x| *x /= scale);
    let mut log_growth = 0.0;
    for it in 0..POWER_ITERATIONS {
        let moved = shifted(curve, eps, &dir)?;
        let v = curve_velocity(&moved, spec, time)?;
        let mut w: Vec<Vec3> = v.iter().zip(&base).map(|(a, b)| (a - b) / eps).collect();
        let g = norm(&w);
        if g == 0.0 || !g.is_finite() {
            return Ok(if g == 0.0 { 0.0 } else { f64::INFINITY });
        }
        if it >= POWER_ITERATIONS / 2 {
            log_growth += g.ln();
        }
        w.iter_mut().for_each(|x| *x /= g);
        dir = w;
    }
    Ok((log_growth / (POWER_ITERATIONS - POWER_ITERATIONS / 2) as f64).exp())
}

fn shifted(curve: &DiscreteCurve, h: f64, v: &[Vec3]) -> Result<DiscreteCurve> {
    let pts = curve.points().iter().zip(v).map(|(p, d)| p + d * h).collect();
    DiscreteCurve::with_lead(pts, curve.length(), curve.lead())
}

/// Classical RK4 increment `x(t + h) - x(t)` of the point positions.
pub fn rk4_increment(curve: &DiscreteCurve, spec: &FlowSpec, time: f64, h: f64) -> Result<Vec<Vec3>> {
    let k1 = curve_velocity(curve, spec, time)?;
    let limit = MAX_DISPLACEMENT_FRACTION * curve.spacing();
    let vmax = k1.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if vmax * h > limit {
        return Err(Error::BlowUp(format!(
            "max |velocity| * dt = {:.3e} exceeds half the grid spacing {:.3e}",
            vmax * h,
            limit
        )));
    }
    let k2 = curve_velocity(&shifted(curve, 0.5 * h, &k1)?, spec, time + 0.5 * h)?;
    let k3 = curve_velocity(&shifted(curve, 0.5 * h, &k2)?, spec, time + 0.5 * h)?;
    let k4 = curve_velocity(&shifted(curve, h, &k3)?, spec, time + h)?;
    Ok((0..curve.len()).map(|j| (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (h / 6.0)).collect())
}

pub fn rk4_step(curve: &DiscreteCurve, spec: &FlowSpec, time: f64, h: f64) -> Result<DiscreteCurve> {
    let inc = rk4_increment(curve, spec, time, h)?;
    shifted(curve, 1.0, &inc)
}

/// Positions updated with compensated summation, so that rounding of many small
/// increments does not accumulate.
struct CompensatedCurve {
    curve: DiscreteCurve,
    carry: Vec<Vec3>,
}

impl CompensatedCurve {
    fn new(curve: DiscreteCurve) -> Self {
        let carry = vec![Vec3::zeros(); curve.len()];
        Self { curve, carry }
    }

    fn add(&mut self, inc: &[Vec3]) -> Result<()> {
        let pts = self
            .curve
            .points()
            .iter()
            .zip(inc)
            .zip(self.carry.iter_mut())
            .map(|((x, d), c)| {
                let y = d - *c;
                let t = x + y;
                *c = (t - x) - y;
                t
            })
            .collect();
        self.curve = DiscreteCurve::with_lead(pts, self.curve.length(), self.curve.lead())?;
        Ok(())
    }
}

/// Step: the smaller of [`stability_cap`] and `RK4_STABLE_PRODUCT / rho`, with `rho` from
/// [`estimate_spectral_radius`] on the initial curve.
pub fn evolve_curve(curve: &DiscreteCurve, spec: &FlowSpec, config: &EvolutionConfig) -> Result<Trajectory> {
    let rho = estimate_spectral_radius(curve, spec, 0.0)?;
    let cap = stability_cap(curve.len(), curve.length(), spec).min(RK4_STABLE_PRODUCT / rho);
    let mut traj = evolve_curve_with_cap(curve, spec, config, cap)?;
    traj.spectral_radius = rho;
    Ok(traj)
}

/// As [`evolve_curve`] with an explicit step-size cap and no spectral-radius estimate.
pub fn evolve_curve_with_cap(
    curve: &DiscreteCurve,
    spec: &FlowSpec,
    config: &EvolutionConfig,
    cap: f64,
) -> Result<Trajectory> {
    config.validate()?;
    spec.validate_periodicity(curve.length())?;
    let reparam_every = match config.reparam_every {
        Some(k) => Some(k),
        None => changes_local_length(spec, curve.length())?.then_some(1),
    };
    let macro_steps = ((config.t_final / config.dt) * (1.0 - 1e-12)).ceil() as usize;
    let dt = if macro_steps == 0 { 0.0 } else { config.t_final / macro_steps as f64 };
    let substeps = ((dt / cap) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = dt / substeps as f64;

    let mut current = CompensatedCurve::new(curve.clone());
    let mut traj = Trajectory {
        times: vec![0.0],
        snapshots: vec![(curve.clone(), profile_from_curve(curve)?)],
        step: h,
        substeps_per_step: substeps,
        reparam_every,
        spectral_radius: f64::NAN,
    };
    for i in 1..=macro_steps {
        let t0 = (i - 1) as f64 * dt;
        for m in 0..substeps {
            let inc = rk4_increment(&current.curve, spec, t0 + m as f64 * h, h)?;
            current.add(&inc)?;
        }
        if reparam_every.is_some_and(|k| i % k == 0) {
            current = CompensatedCurve::new(reparameterize(&current.curve)?);
        }
        if i % config.record_every == 0 || i == macro_steps {
            traj.times.push(i as f64 * dt);
            traj.snapshots.push((current.curve.clone(), profile_from_curve(&current.curve)?));
        }
    }
    Ok(traj)
}
