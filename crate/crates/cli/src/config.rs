//! Run configuration: grid, initial condition, flow law, solver and time stepping.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hasimoto::evolver::EvolutionConfig;
use hasimoto::flow::{classify_flow, default_probes, FlowSpec};
use hasimoto::geometry::{circle, helix, perturbed_circle, Vec3};
use hasimoto::hasimoto::{SolverKind, SplitOrder, WaveFunction, WaveStepper};
use hasimoto::io::curve_from_csv;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Smallest accepted `a L`; keeps the periodisation jump `2a sech(aL/2)` below `1e-8 a`.
const SOLITON_MIN_WIDTH_PRODUCT: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: Grid,
    pub initial: Initial,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub evolution: Evolution,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Seed for the random probe profiles used by `classify`.
    #[serde(default)]
    pub seed: u64,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(rename = "N")]
    pub n: usize,
    /// Period of the soliton domain; curve presets fix their own length.
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum Initial {
    Circle {
        #[serde(default = "one")]
        radius: f64,
    },
    Helix {
        a: f64,
        b: f64,
    },
    PerturbedCircle {
        amplitude: f64,
        mode: u32,
    },
    /// `psi = 2a sech(a s)` centred in the domain.
    Soliton {
        a: f64,
    },
    /// Curve samples `s,x,y,z`; relative paths resolve against the config file.
    Csv {
        path: PathBuf,
        #[serde(default)]
        lead: [f64; 3],
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    #[serde(rename = "A", default = "default_a")]
    pub a: String,
    #[serde(rename = "B", default = "zero")]
    pub b: String,
    #[serde(rename = "C", default = "zero")]
    pub c: String,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
}

fn default_a() -> String {
    "k".into()
}

fn zero() -> String {
    "0".into()
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { a: default_a(), b: zero(), c: zero(), constants: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    #[default]
    General,
    Nls,
    Hirota,
    Powerseries,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub kind: Kind,
    #[serde(default)]
    pub order: SplitOrder,
    /// Hirota coefficient; defaults to the flow constant `W`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<f64>,
    /// `a_1, a_2, ...`; defaults to the power series detected in `A`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Evolution {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "one_usize")]
    pub record_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reparam_every: Option<usize>,
}

fn one_usize() -> usize {
    1
}

impl Evolution {
    pub fn to_core(&self) -> EvolutionConfig {
        EvolutionConfig {
            dt: self.dt,
            t_final: self.t_final,
            reparam_every: self.reparam_every,
            record_every: self.record_every,
        }
    }
}

/// Either representation a run can start from.
pub enum Start {
    Curve(hasimoto::geometry::DiscreteCurve),
    Wave(WaveFunction),
}

impl RunConfig {
    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let config: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        };
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((config, base))
    }

    /// Checks ranges and paths; `base` resolves relative CSV paths.
    pub fn validate(&self, base: &Path) -> Result<(), CliError> {
        let n = self.grid.n;
        if n < 8 || !n.is_power_of_two() {
            return Err(CliError::Config(format!("grid.N = {n} must be a power of two >= 8")));
        }
        let bad = |msg: String| Err(CliError::Config(msg));
        match &self.initial {
            Initial::Soliton { a } => {
                let Some(l) = self.grid.length else {
                    return bad("initial.preset = \"soliton\" needs grid.L".into());
                };
                if !(l.is_finite() && l > 0.0) {
                    return bad(format!("grid.L = {l} must be positive"));
                }
                if !(a.is_finite() && *a > 0.0) || a * l < SOLITON_MIN_WIDTH_PRODUCT {
                    return bad(format!(
                        "soliton amplitude a = {a} must be positive with a * L >= {SOLITON_MIN_WIDTH_PRODUCT} (got {})",
                        a * l
                    ));
                }
            }
            _ if self.grid.length.is_some() => {
                return bad("grid.L applies only to the soliton preset; curve presets fix their own length".into())
            }
            Initial::Circle { radius } if !(radius.is_finite() && *radius > 0.0) => {
                return bad(format!("circle radius = {radius} must be positive"))
            }
            Initial::Helix { a, b } if !(a.is_finite() && *a > 0.0 && b.is_finite()) => {
                return bad(format!("helix needs a > 0 and finite b, got a = {a}, b = {b}"))
            }
            Initial::PerturbedCircle { amplitude, mode } => {
                if !(amplitude.abs() < 0.5) {
                    return bad(format!("perturbed_circle amplitude = {amplitude} must satisfy |amplitude| < 0.5"));
                }
                if *mode == 0 || *mode as usize > n / 8 {
                    return bad(format!("perturbed_circle mode = {mode} must lie in 1..={} for N = {n}", n / 8));
                }
            }
            Initial::Csv { path, .. } => {
                let full = base.join(path);
                if !full.is_file() {
                    return bad(format!("initial.path {} does not exist", full.display()));
                }
            }
            _ => {}
        }
        let e = &self.evolution;
        if !(e.dt.is_finite() && e.dt > 0.0) || !(e.t_final.is_finite() && e.t_final >= 0.0) {
            return bad(format!("evolution needs dt > 0 and t_final >= 0, got dt = {}, t_final = {}", e.dt, e.t_final));
        }
        if e.record_every == 0 || e.reparam_every == Some(0) {
            return bad("evolution.record_every and evolution.reparam_every must be >= 1".into());
        }
        self.flow_spec()?;
        Ok(())
    }

    pub fn flow_spec(&self) -> Result<FlowSpec, CliError> {
        let f = &self.flow;
        FlowSpec::parse(&f.a, &f.b, &f.c, f.constants.clone()).map_err(|e| CliError::Config(format!("flow: {e}")))
    }

    /// The solver named by `kind`, with parameters filled in from the flow when absent.
    pub fn stepper(&self, kind: Kind) -> Result<WaveStepper, CliError> {
        let s = &self.solver;
        let spec = self.flow_spec()?;
        let kind = match kind {
            Kind::General => return Ok(WaveStepper::General { spec, linear: None }),
            Kind::Nls => SolverKind::CubicNls,
            Kind::Hirota => {
                let w = s.w.or_else(|| self.flow.constants.get("W").copied()).ok_or_else(|| {
                    CliError::Config("solver.kind = \"hirota\" needs solver.w or a flow constant W".into())
                })?;
                SolverKind::Hirota { w }
            }
            Kind::Powerseries => {
                let coefficients = match &s.coefficients {
                    Some(c) => c.clone(),
                    None => {
                        let probes = default_probes(32, std::f64::consts::TAU, 0, self.seed);
                        let class = classify_flow(&spec, &probes).map_err(|e| CliError::Config(format!("flow: {e}")))?;
                        let terms = class.power_series.ok_or_else(|| {
                            CliError::Config(format!(
                                "solver.kind = \"powerseries\" needs solver.coefficients or a binormal A polynomial in k, got A = {}",
                                self.flow.a
                            ))
                        })?;
                        let top = terms.last().map_or(0, |t| t.0);
                        let mut c = vec![0.0; top];
                        terms.iter().for_each(|&(n, a)| c[n - 1] = a);
                        c
                    }
                };
                SolverKind::PowerSeries { coefficients }
            }
        };
        kind.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(WaveStepper::Specialized { kind, order: s.order })
    }

    pub fn start(&self, base: &Path) -> Result<Start, CliError> {
        let n = self.grid.n;
        let curve = match &self.initial {
            Initial::Circle { radius } => circle(n, *radius)?,
            Initial::Helix { a, b } => helix(n, *a, *b)?,
            Initial::PerturbedCircle { amplitude, mode } => perturbed_circle(n, *amplitude, *mode)?,
            Initial::Soliton { a } => {
                let l = self.grid.length.expect("validated");
                let psi = (0..n)
                    .map(|j| {
                        let s = -l / 2.0 + l * j as f64 / n as f64;
                        C64::new(2.0 * a / (a * s).cosh(), 0.0)
                    })
                    .collect();
                return Ok(Start::Wave(WaveFunction::new(psi, l)?));
            }
            Initial::Csv { path, lead } => {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", full.display())))?;
                let c = curve_from_csv(&text, Vec3::from(*lead)).map_err(|e| CliError::Config(format!("{}: {e}", full.display())))?;
                if c.len() != n {
                    return Err(CliError::Config(format!("{} holds {} points but grid.N = {n}", full.display(), c.len())));
                }
                c
            }
        };
        Ok(Start::Curve(curve))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
        [grid]
        N = 64
        [initial]
        preset = "perturbed_circle"
        amplitude = 0.05
        mode = 3
        [evolution]
        dt = 1e-3
        t_final = 0.01
    "#;

    fn parse(text: &str) -> RunConfig {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let c = parse(BASIC);
        assert_eq!(c.flow, FlowConfig::default());
        assert_eq!(c.solver.kind, Kind::General);
        assert_eq!(c.evolution.record_every, 1);
        assert_eq!(c.output, PathBuf::from("out"));
        c.validate(Path::new(".")).unwrap();
    }

    #[test]
    fn rejects_bad_grid_and_presets() {
        let mut c = parse(BASIC);
        c.grid.n = 100;
        let msg = c.validate(Path::new(".")).unwrap_err().to_string();
        assert!(msg.contains("grid.N = 100"), "{msg}");
        let mut c = parse(BASIC);
        c.initial = Initial::PerturbedCircle { amplitude: 0.7, mode: 3 };
        assert!(c.validate(Path::new(".")).is_err());
        c.initial = Initial::Soliton { a: 1.0 };
        assert!(c.validate(Path::new(".")).unwrap_err().to_string().contains("grid.L"));
        c.grid.length = Some(40.0);
        c.validate(Path::new(".")).unwrap();
        c.initial = Initial::Csv { path: "missing.csv".into(), lead: [0.0; 3] };
        c.grid.length = None;
        assert!(c.validate(Path::new(".")).unwrap_err().to_string().contains("does not exist"));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(toml::from_str::<RunConfig>(&format!("{BASIC}\nextra = 1")).is_err());
    }

    #[test]
    fn solver_parameters_come_from_the_flow() {
        let mut c = parse(BASIC);
        c.flow.a = "k + 0.5*k^3".into();
        match c.stepper(Kind::Powerseries).unwrap() {
            WaveStepper::Specialized { kind: SolverKind::PowerSeries { coefficients }, .. } => {
                assert_eq!(coefficients, vec![1.0, 0.0, 0.5])
            }
            other => panic!("{other:?}"),
        }
        c.flow = FlowConfig { a: "k + W*k*tau".into(), b: "W*d_s(k)".into(), c: "0.5*W*k^2".into(), constants: [("W".into(), 0.2)].into() };
        assert!(matches!(c.stepper(Kind::Hirota).unwrap(), WaveStepper::Specialized { kind: SolverKind::Hirota { w }, .. } if w == 0.2));
        c.flow.constants.clear();
        c.flow.a = "k".into();
        c.flow.b = "0".into();
        c.flow.c = "0".into();
        assert!(c.stepper(Kind::Hirota).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = parse(BASIC);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
