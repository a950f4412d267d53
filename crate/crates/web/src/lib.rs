//! Browser bindings: a filament evolving under a configurable flow, a wave function
//! under its dedicated solver, and the flow classifier.
//!
//! Errors cross the boundary as strings so the same methods run natively in tests.

use std::collections::BTreeMap;

use hasimoto::diagnostics::{bending_energy, curve_length};
use hasimoto::evolver::{
    estimate_spectral_radius, evolve_curve_with_cap, stability_cap, EvolutionConfig, RK4_STABLE_PRODUCT,
};
use hasimoto::flow::{classify_flow, default_probes, FlowSpec};
use hasimoto::geometry::{self, profile_from_curve, DiscreteCurve, GeometryProfile};
use hasimoto::hasimoto::{SolverKind, SplitOrder, WaveFunction, WaveStepper};
use num_complex::Complex64;
use wasm_bindgen::prelude::*;

type JsResult<T> = Result<T, String>;

fn flow(a: &str, b: &str, c: &str, w: f64) -> JsResult<FlowSpec> {
    FlowSpec::parse(a, b, c, BTreeMap::from([("W".to_string(), w)])).map_err(|e| e.to_string())
}

/// A closed curve advanced frame by frame.
#[wasm_bindgen]
pub struct Filament {
    curve: DiscreteCurve,
    profile: GeometryProfile,
    spec: FlowSpec,
    cap: f64,
    time: f64,
    length0: f64,
    energy0: f64,
}

#[wasm_bindgen]
impl Filament {
    /// `preset` is `circle`, `perturbed_circle`, `helix` or `wavy_ring`; `p` and `q` are
    /// its two shape parameters and `mode` its wavenumber where one applies.
    #[wasm_bindgen(constructor)]
    #[allow(clippy::too_many_arguments)]
    pub fn new(preset: &str, n: usize, p: f64, q: f64, mode: u32, a: &str, b: &str, c: &str, w: f64) -> JsResult<Filament> {
        if !n.is_power_of_two() || n < 16 {
            return Err(format!("node count {n} must be a power of two >= 16"));
        }
        let curve = match preset {
            "circle" => geometry::circle(n, p),
            "perturbed_circle" => geometry::perturbed_circle(n, p, mode),
            "helix" => geometry::helix(n, p, q),
            "wavy_ring" => geometry::wavy_ring(n, p, q, mode),
            other => return Err(format!("unknown preset {other}")),
        }
        .map_err(|e| e.to_string())?;
        let spec = flow(a, b, c, w)?;
        spec.validate_periodicity(curve.length()).map_err(|e| e.to_string())?;
        let rho = estimate_spectral_radius(&curve, &spec, 0.0).map_err(|e| e.to_string())?;
        let cap = stability_cap(n, curve.length(), &spec).min(RK4_STABLE_PRODUCT / rho);
        let profile = profile_from_curve(&curve).map_err(|e| e.to_string())?;
        let length0 = curve_length(&curve);
        let energy0 = bending_energy(&profile);
        Ok(Filament { curve, profile, spec, cap, time: 0.0, length0, energy0 })
    }

    /// Advances by `dt`, substepping below the stability cap.
    pub fn advance(&mut self, dt: f64) -> JsResult<()> {
        let traj = evolve_curve_with_cap(&self.curve, &self.spec, &EvolutionConfig::new(dt, dt), self.cap)
            .map_err(|e| e.to_string())?;
        let (curve, profile) = traj.snapshots.into_iter().next_back().expect("final snapshot");
        self.curve = curve;
        self.profile = profile;
        self.time += dt;
        Ok(())
    }

    /// Node coordinates as `x0, y0, z0, x1, ...`.
    pub fn points(&self) -> Vec<f64> {
        self.curve.points().iter().flat_map(|p| [p.x, p.y, p.z]).collect()
    }

    pub fn curvature(&self) -> Vec<f64> {
        self.profile.k.clone()
    }

    pub fn torsion(&self) -> Vec<f64> {
        self.profile.tau.clone()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    #[wasm_bindgen(js_name = lengthDrift)]
    pub fn length_drift(&self) -> f64 {
        (curve_length(&self.curve) - self.length0) / self.length0
    }

    #[wasm_bindgen(js_name = energyDrift)]
    pub fn energy_drift(&self) -> f64 {
        (bending_energy(&self.profile) - self.energy0) / self.energy0
    }
}

/// `psi = 2a sech(a s)` on a periodic box, advanced by a split-step or
/// integrating-factor solver.
#[wasm_bindgen]
pub struct Wave {
    wave: WaveFunction,
    stepper: WaveStepper,
    time: f64,
    norm0: f64,
}

#[wasm_bindgen]
impl Wave {
    /// `solver` is `nls`, `nls2` (second-order splitting) or `hirota`; `w` is the Hirota
    /// coefficient and `kick` a phase gradient that sets the soliton moving.
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, length: f64, a: f64, kick: f64, solver: &str, w: f64) -> JsResult<Wave> {
        if !n.is_power_of_two() || n < 16 {
            return Err(format!("node count {n} must be a power of two >= 16"));
        }
        if !(a > 0.0 && a * length >= 20.0) {
            return Err(format!("need a > 0 and a L >= 20 for a decayed soliton, got a L = {}", a * length));
        }
        let stepper = match solver {
            "nls" => WaveStepper::Specialized { kind: SolverKind::CubicNls, order: SplitOrder::Fourth },
            "nls2" => WaveStepper::Specialized { kind: SolverKind::CubicNls, order: SplitOrder::Second },
            "hirota" => WaveStepper::Specialized { kind: SolverKind::Hirota { w }, order: SplitOrder::Fourth },
            other => return Err(format!("unknown solver {other}")),
        };
        let h = length / n as f64;
        let psi = (0..n)
            .map(|j| {
                let s = j as f64 * h - length / 2.0;
                Complex64::from_polar(2.0 * a / (a * s).cosh(), kick * s)
            })
            .collect();
        let wave = WaveFunction::new(psi, length).map_err(|e| e.to_string())?;
        let norm0 = wave.norm_squared();
        Ok(Wave { wave, stepper, time: 0.0, norm0 })
    }

    pub fn advance(&mut self, dt: f64, steps: usize) -> JsResult<()> {
        for _ in 0..steps {
            self.wave = self.stepper.step(&self.wave, dt).map_err(|e| e.to_string())?;
        }
        self.time += dt * steps as f64;
        Ok(())
    }

    pub fn modulus(&self) -> Vec<f64> {
        self.wave.psi.iter().map(|z| z.norm()).collect()
    }

    /// Phase of the physical field, in `(-pi, pi]`.
    pub fn phase(&self) -> Vec<f64> {
        self.wave.physical().iter().map(|z| z.arg()).collect()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    #[wasm_bindgen(js_name = normDrift)]
    pub fn norm_drift(&self) -> f64 {
        (self.wave.norm_squared() - self.norm0) / self.norm0
    }
}

/// Classification of `gamma_t = C T + B N + A B` as JSON.
#[wasm_bindgen]
pub fn classify(a: &str, b: &str, c: &str, w: f64) -> JsResult<String> {
    let spec = flow(a, b, c, w)?;
    let probes = default_probes(64, std::f64::consts::TAU, 4, 0);
    let cls = classify_flow(&spec, &probes).map_err(|e| e.to_string())?;
    let report = serde_json::json!({
        "is_binormal": cls.is_binormal,
        "length_condition_residual": cls.length_condition_residual,
        "preserves_length": cls.length_condition_residual < 1e-10,
        "power_series": cls.power_series,
        "is_geometric": spec.is_geometric(),
        "derivative_depth": spec.derivative_depth(),
    });
    Ok(report.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vfe_ring_keeps_length_and_energy() {
        let mut f = Filament::new("perturbed_circle", 64, 0.05, 0.0, 3, "k", "0", "0", 0.0).unwrap();
        for _ in 0..5 {
            f.advance(0.01).unwrap();
        }
        assert!((f.time() - 0.05).abs() < 1e-15);
        assert!(f.length_drift().abs() < 1e-10);
        assert!(f.energy_drift().abs() < 1e-8);
        assert_eq!(f.points().len(), 3 * 64);
    }

    #[test]
    fn circle_translates_along_its_axis() {
        let mut f = Filament::new("circle", 64, 1.0, 0.0, 0, "k", "0", "0", 0.0).unwrap();
        f.advance(0.1).unwrap();
        let z = f.points();
        assert!(z.chunks(3).all(|p| (p[2] - 0.1).abs() < 1e-10));
    }

    #[test]
    fn fm_helix_keeps_constant_curvature() {
        let mut f = Filament::new("helix", 64, 1.0, 0.5, 0, "k + W*k*tau", "W*d_s(k)", "(W/2)*k^2", 0.1).unwrap();
        f.advance(0.02).unwrap();
        assert!(f.curvature().iter().all(|k| (k - 0.8).abs() < 1e-8));
        assert!(f.torsion().iter().all(|t| (t - 0.4).abs() < 1e-6));
    }

    #[test]
    fn bad_inputs_are_reported() {
        assert!(Filament::new("circle", 100, 1.0, 0.0, 0, "k", "0", "0", 0.0).is_err());
        assert!(Filament::new("trefoil", 64, 1.0, 0.0, 0, "k", "0", "0", 0.0).is_err());
        assert!(Filament::new("circle", 64, 1.0, 0.0, 0, "k +", "0", "0", 0.0).is_err());
        assert!(Wave::new(256, 10.0, 1.0, 0.0, "nls", 0.0).is_err());
        assert!(Wave::new(256, 40.0, 1.0, 0.0, "kdv", 0.0).is_err());
    }

    #[test]
    fn soliton_moves_at_twice_its_kick() {
        let mut w = Wave::new(512, 40.0, 1.0, 0.5, "nls", 0.0).unwrap();
        w.advance(1e-3, 1000).unwrap();
        let m = w.modulus();
        let peak = m.iter().enumerate().fold((0, 0.0), |b, (j, &x)| if x > b.1 { (j, x) } else { b }).0;
        let s = peak as f64 * 40.0 / 512.0 - 20.0;
        assert!((s - 1.0).abs() < 40.0 / 512.0, "{s}");
        assert!((m[peak] - 2.0).abs() < 1e-3);
        assert!(w.norm_drift().abs() < 1e-12);
        assert_eq!(w.phase().len(), 512);
    }

    #[test]
    fn classifier_separates_binormal_and_fm() {
        let v: serde_json::Value = serde_json::from_str(&classify("k^2", "0", "0", 0.0).unwrap()).unwrap();
        assert_eq!(v["is_binormal"], true);
        assert_eq!(v["power_series"], serde_json::json!([[2, 1.0]]));
        let v: serde_json::Value =
            serde_json::from_str(&classify("k + W*k*tau", "W*d_s(k)", "(W/2)*k^2", 0.3).unwrap()).unwrap();
        assert_eq!(v["is_binormal"], false);
        assert_eq!(v["preserves_length"], true);
        assert_eq!(v["derivative_depth"], 1);
        let v: serde_json::Value = serde_json::from_str(&classify("k", "0", "1", 0.0).unwrap()).unwrap();
        assert_eq!(v["preserves_length"], true);
        let v: serde_json::Value = serde_json::from_str(&classify("k", "0", "k", 0.0).unwrap()).unwrap();
        assert_eq!(v["preserves_length"], false);
        assert!(classify("k", "0", "Q", 0.0).is_err());
    }
}
