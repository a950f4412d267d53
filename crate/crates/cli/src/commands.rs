//! Subcommand implementations. Each writes its artifacts plus `manifest.json` into the
//! output directory and returns a JSON summary for stdout.

use std::path::{Path, PathBuf};

use hasimoto::diagnostics::DiagnosticsReport;
use hasimoto::evolver::{changes_local_length, evolve_curve, stability_cap, Trajectory};
use hasimoto::flow::{classify_flow, default_probes, FlowSpec};
use hasimoto::geometry::{
    aligned_linf_distance, frames_from_curve, profile_from_curve, reconstruct_curve, DiscreteCurve, GeometryProfile,
    Vec3,
};
use hasimoto::hasimoto::{
    evolve_wave, forward_transform_with_base, inverse_transform, WaveFunction, WaveStepper, WaveTrajectory,
};
use hasimoto::io::{curve_to_csv, profile_to_csv, wave_to_csv, Envelope};
use num_complex::Complex64 as C64;
use serde_json::{json, Value};

use crate::config::{Initial, Kind, RunConfig, Start};
use crate::error::CliError;
use crate::output::{read_table, Artifacts, Manifest};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const TRAJECTORY_COLUMNS: [&str; 8] = ["t", "L", "s", "x", "y", "z", "k", "tau"];
pub const WAVES_FILE: &str = "waves.csv";
pub const WAVES_COLUMNS: [&str; 6] = ["t", "L", "mu", "s", "re_psi", "im_psi"];
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// A loaded config with the directory its relative paths resolve against.
pub struct Loaded {
    pub config: RunConfig,
    pub base: PathBuf,
}

impl Loaded {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let (config, base) = RunConfig::load(path)?;
        config.validate(&base)?;
        Ok(Self { config, base })
    }

    fn manifest(&self, subcommand: &str) -> Result<Manifest, CliError> {
        let mut m = Manifest::new(subcommand, Some(&self.config));
        if let Initial::Csv { path, .. } = &self.config.initial {
            m.input(&self.base.join(path))?;
        }
        Ok(m)
    }

    fn curve(&self, subcommand: &str) -> Result<DiscreteCurve, CliError> {
        match self.config.start(&self.base)? {
            Start::Curve(c) => Ok(c),
            Start::Wave(_) => Err(CliError::Config(format!("{subcommand} needs a curve preset, not a soliton"))),
        }
    }

    fn wave(&self) -> Result<WaveFunction, CliError> {
        Ok(match self.config.start(&self.base)? {
            Start::Curve(c) => forward_transform_with_base(&profile_from_curve(&c)?, 0),
            Start::Wave(w) => w,
        })
    }
}

fn extrinsic_scheme(traj: &Trajectory) -> String {
    let reparam = match traj.reparam_every {
        Some(k) => format!("spline reparameterisation every {k} steps"),
        None => "no reparameterisation".into(),
    };
    format!(
        "classical RK4 on node positions, spectral derivatives, compensated summation; step {:e} ({} substeps per dt); {reparam}",
        traj.step, traj.substeps_per_step
    )
}

/// The flow whose invariants a wave run is checked against.
fn wave_flow(stepper: &WaveStepper) -> FlowSpec {
    match stepper {
        WaveStepper::General { spec, .. } => spec.clone(),
        WaveStepper::Specialized { kind, .. } => kind.flow().expect("specialised solvers come from a flow"),
    }
}

/// Centred differences inside, one-sided at the ends.
fn measured_rate(times: &[f64], values: &[f64]) -> Vec<f64> {
    let n = times.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (values[b] - values[a]) / (times[b] - times[a])
        })
        .collect()
}

fn write_report(art: &mut Artifacts, report: &DiagnosticsReport) -> Result<(), CliError> {
    let di1 = measured_rate(&report.times, &report.i1);
    let di2 = measured_rate(&report.times, &report.i2);
    let mut header = vec!["t", "I1", "I2", "dI1_analytic", "dI2_analytic", "dI1_measured", "dI2_measured", "closure_defect"];
    if report.dual_path_error.is_some() {
        header.push("dual_path_error");
    }
    let rows = (0..report.times.len()).map(|i| {
        let mut row = vec![
            report.times[i],
            report.i1[i],
            report.i2[i],
            report.di1_analytic[i],
            report.di2_analytic[i],
            di1[i],
            di2[i],
            report.closure_defect[i],
        ];
        if let Some(d) = &report.dual_path_error {
            row.push(d[i]);
        }
        row
    });
    art.write_table(DIAGNOSTICS_FILE, &header, rows)
}

fn write_trajectory(art: &mut Artifacts, traj: &Trajectory) -> Result<(), CliError> {
    let rows = traj.times.iter().zip(&traj.snapshots).flat_map(|(&t, (curve, profile))| {
        let ds = curve.spacing();
        curve.points().iter().enumerate().map(move |(j, p)| {
            vec![t, curve.length(), j as f64 * ds, p.x, p.y, p.z, profile.k[j], profile.tau[j]]
        })
    });
    art.write_table(TRAJECTORY_FILE, &TRAJECTORY_COLUMNS, rows)
}

fn write_waves(art: &mut Artifacts, traj: &WaveTrajectory) -> Result<(), CliError> {
    let rows = traj.times.iter().zip(&traj.waves).flat_map(|(&t, w)| {
        let s = w.arclength();
        w.physical().into_iter().enumerate().map(move |(j, z)| vec![t, w.length, w.mu, s[j], z.re, z.im])
    });
    art.write_table(WAVES_FILE, &WAVES_COLUMNS, rows)
}

/// Splits long-format rows into consecutive blocks sharing the first column.
fn blocks(rows: Vec<Vec<f64>>) -> Vec<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<Vec<f64>>> = Vec::new();
    for row in rows {
        match out.last_mut() {
            Some(block) if block[0][0] == row[0] => block.push(row),
            _ => out.push(vec![row]),
        }
    }
    out
}

fn lead_of(curve: &DiscreteCurve) -> [f64; 3] {
    let l = curve.lead();
    [l.x, l.y, l.z]
}

pub fn evolve(run: &Loaded, out: &Path) -> Result<Value, CliError> {
    let spec = run.config.flow_spec()?;
    let curve = run.curve("evolve")?;
    let traj = evolve_curve(&curve, &spec, &run.config.evolution.to_core())?;
    let report = DiagnosticsReport::from_trajectory(&traj, &spec)?;

    let mut art = Artifacts::create(out, run.manifest("evolve")?)?;
    art.manifest.scheme("extrinsic", extrinsic_scheme(&traj));
    art.manifest.meta("lead", lead_of(&curve));
    write_trajectory(&mut art, &traj)?;
    let (last, last_profile) = traj.snapshots.last().expect("initial snapshot");
    art.write("curve_final.csv", curve_to_csv(last)?.as_bytes())?;
    art.write("profile_final.csv", profile_to_csv(last_profile)?.as_bytes())?;
    write_report(&mut art, &report)?;
    let summary = json!({
        "subcommand": "evolve",
        "t_final": traj.times.last(),
        "snapshots": traj.times.len(),
        "step": traj.step,
        "substeps_per_step": traj.substeps_per_step,
        "spectral_radius": traj.spectral_radius,
        "diagnostics": report.summary(),
    });
    art.write_json(SUMMARY_FILE, &summary)?;
    art.finish()?;
    Ok(summary)
}

pub fn solve(run: &Loaded, kind: Kind, out: &Path) -> Result<Value, CliError> {
    let stepper = run.config.stepper(kind)?;
    let wave = run.wave()?;
    let e = &run.config.evolution;
    let traj = evolve_wave(&wave, &stepper, e.dt, e.t_final, e.record_every)?;
    let report = DiagnosticsReport::from_waves(&traj, &wave_flow(&stepper))?;

    let mut manifest = run.manifest("solve")?;
    manifest.argument("kind", kind);
    let mut art = Artifacts::create(out, manifest)?;
    art.manifest.scheme("intrinsic", stepper.describe());
    write_waves(&mut art, &traj)?;
    let last = traj.waves.last().expect("initial wave");
    art.write("wave_final.csv", wave_to_csv(last)?.as_bytes())?;
    let envelope = Envelope::from_wave(last, 0).with_metadata("t", traj.times.last())?;
    art.write("wave_final.json", envelope.to_json()?.as_bytes())?;
    art.write("profile_final.csv", profile_to_csv(&inverse_transform(last))?.as_bytes())?;
    write_report(&mut art, &report)?;
    let summary = json!({
        "subcommand": "solve",
        "solver": stepper.describe(),
        "t_final": traj.times.last(),
        "snapshots": traj.times.len(),
        "max_modulus": last.max_modulus(),
        "diagnostics": report.summary(),
    });
    art.write_json(SUMMARY_FILE, &summary)?;
    art.finish()?;
    Ok(summary)
}

pub fn transform(run: &Loaded, base_node: usize, out: &Path) -> Result<Value, CliError> {
    let n = run.config.grid.n;
    if base_node >= n {
        return Err(CliError::Config(format!("--base {base_node} must be below N = {n}")));
    }
    let mut manifest = run.manifest("transform")?;
    manifest.argument("base", base_node);
    let mut art = Artifacts::create(out, manifest)?;
    art.manifest.scheme("transform", "spectral antiderivative of tau; tau = Im(psi_s conj psi)/|psi|^2");
    art.manifest.scheme("reconstruction", "RK4 on the Frenet-Serret system with band-limited midpoints");

    let summary = match run.config.start(&run.base)? {
        Start::Curve(curve) => {
            let profile = profile_from_curve(&curve)?;
            let wave = forward_transform_with_base(&profile, base_node);
            let back = inverse_transform(&wave);
            let round_trip = linf(&back.k, &profile.k).max(linf(&back.tau, &profile.tau));
            let frame = frames_from_curve(&curve)?;
            let rebuilt = reconstruct_curve(&profile, curve.points()[0], [frame.t[0], frame.n[0], frame.b[0]])?;
            art.write("curve.csv", curve_to_csv(&curve)?.as_bytes())?;
            art.write("profile.csv", profile_to_csv(&profile)?.as_bytes())?;
            art.write("wave.csv", wave_to_csv(&wave)?.as_bytes())?;
            art.write("wave.json", Envelope::from_wave(&wave, base_node).to_json()?.as_bytes())?;
            json!({
                "subcommand": "transform",
                "direction": "curve -> profile -> wave",
                "L": profile.length,
                "mu": wave.mu,
                "bending_energy": wave.norm_squared(),
                "profile_round_trip_error": round_trip,
                "reconstruction_error": aligned_linf_distance(rebuilt.curve.points(), curve.points()),
                "closure_defect": (rebuilt.curve.lead() - curve.lead()).norm(),
            })
        }
        Start::Wave(wave) => {
            let profile = inverse_transform(&wave);
            let rebuilt = reconstruct_curve(&profile, Vec3::zeros(), [Vec3::x(), Vec3::y(), Vec3::z()])?;
            art.write("wave.csv", wave_to_csv(&wave)?.as_bytes())?;
            art.write("profile.csv", profile_to_csv(&profile)?.as_bytes())?;
            art.write("curve.csv", curve_to_csv(&rebuilt.curve)?.as_bytes())?;
            json!({
                "subcommand": "transform",
                "direction": "wave -> profile -> curve",
                "L": profile.length,
                "degenerate_nodes": profile.degenerate.len(),
                "bending_energy": wave.norm_squared(),
                "closure_defect": rebuilt.closure_defect,
            })
        }
    };
    art.write_json(SUMMARY_FILE, &summary)?;
    art.finish()?;
    Ok(summary)
}

/// Number of random probe profiles `classify` adds to the fixed ones.
const RANDOM_PROBES: usize = 8;

pub fn classify(run: &Loaded, out: &Path) -> Result<Value, CliError> {
    let spec = run.config.flow_spec()?;
    let n = run.config.grid.n;
    let length = match run.config.start(&run.base)? {
        Start::Curve(c) => c.length(),
        Start::Wave(w) => w.length,
    };
    let probes = default_probes(n, length, RANDOM_PROBES, run.config.seed);
    let class = classify_flow(&spec, &probes).map_err(hasimoto::Error::from)?;
    let summary = json!({
        "subcommand": "classify",
        "A": spec.source_a(),
        "B": spec.source_b(),
        "C": spec.source_c(),
        "is_binormal": class.is_binormal,
        "residual": class.length_condition_residual,
        "preserves_length": !changes_local_length(&spec, length)?,
        "power_series": class.power_series,
        "is_geometric": spec.is_geometric(),
        "derivative_depth": spec.derivative_depth(),
        "k_degree": spec.k_degree(),
        "stability_cap": stability_cap(n, length, &spec),
        "probes": probes.len(),
    });
    let mut art = Artifacts::create(out, run.manifest("classify")?)?;
    art.manifest.scheme("probes", format!("2 fixed + {RANDOM_PROBES} seeded band-limited profiles"));
    art.write_json("classification.json", &summary)?;
    art.finish()?;
    Ok(summary)
}

/// Recomputes diagnostics from the trajectory recorded by an earlier `evolve` or `solve`.
pub fn diagnose(run_dir: &Path, out: &Path) -> Result<Value, CliError> {
    let source = Manifest::read(run_dir)?;
    let config = source
        .config
        .clone()
        .ok_or_else(|| CliError::Config(format!("{}: manifest has no config", run_dir.display())))?;
    let mut manifest = Manifest::new("diagnose", Some(&config));
    manifest.argument("run", run_dir.display().to_string());
    manifest.schemes = source.schemes.clone();

    let report = match source.subcommand.as_str() {
        "evolve" => {
            let path = run_dir.join(TRAJECTORY_FILE);
            manifest.input(&path)?;
            let lead: [f64; 3] = source
                .metadata
                .get("lead")
                .map(|v| serde_json::from_value(v.clone()))
                .transpose()?
                .unwrap_or_default();
            let mut traj = Trajectory {
                times: Vec::new(),
                snapshots: Vec::new(),
                step: f64::NAN,
                substeps_per_step: 0,
                reparam_every: None,
                spectral_radius: f64::NAN,
            };
            for block in blocks(read_table(&path, &TRAJECTORY_COLUMNS)?) {
                let points = block.iter().map(|r| Vec3::new(r[3], r[4], r[5])).collect();
                let curve = DiscreteCurve::with_lead(points, block[0][1], Vec3::from(lead))?;
                let profile = profile_from_curve(&curve)?;
                traj.times.push(block[0][0]);
                traj.snapshots.push((curve, profile));
            }
            DiagnosticsReport::from_trajectory(&traj, &config.flow_spec()?)?
        }
        "solve" => {
            let path = run_dir.join(WAVES_FILE);
            manifest.input(&path)?;
            let kind: Kind = source
                .arguments
                .get("kind")
                .map(|v| serde_json::from_value(v.clone()))
                .transpose()?
                .unwrap_or(config.solver.kind);
            let mut traj = WaveTrajectory { times: Vec::new(), waves: Vec::new() };
            for block in blocks(read_table(&path, &WAVES_COLUMNS)?) {
                let psi: Vec<C64> = block.iter().map(|r| C64::new(r[4], r[5])).collect();
                traj.times.push(block[0][0]);
                traj.waves.push(WaveFunction::from_physical(&psi, block[0][2], block[0][1])?);
            }
            DiagnosticsReport::from_waves(&traj, &wave_flow(&config.stepper(kind)?))?
        }
        other => {
            return Err(CliError::Config(format!(
                "diagnose reads runs of evolve or solve, but {} holds a {other} run",
                run_dir.display()
            )))
        }
    };
    let mut art = Artifacts::create(out, manifest)?;
    write_report(&mut art, &report)?;
    let summary = json!({
        "subcommand": "diagnose",
        "source": source.subcommand,
        "snapshots": report.times.len(),
        "diagnostics": report.summary(),
    });
    art.write_json(SUMMARY_FILE, &summary)?;
    art.finish()?;
    Ok(summary)
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Extrinsic and intrinsic runs from one initial curve, compared on the common record times.
struct DualPath {
    traj: Trajectory,
    times: Vec<f64>,
    err_k: Vec<f64>,
    err_tau: Vec<f64>,
    intrinsic_scheme: String,
}

fn dual_path(curve: &DiscreteCurve, spec: &FlowSpec, run: &Loaded, kind: Kind) -> Result<DualPath, CliError> {
    let stepper = run.config.stepper(kind)?;
    let evo = run.config.evolution.to_core();
    let traj = evolve_curve(curve, spec, &evo)?;
    let p0: &GeometryProfile = &traj.snapshots[0].1;
    // same step as the extrinsic run, recorded at the same instants
    let every = traj.substeps_per_step.saturating_mul(evo.record_every);
    let waves = evolve_wave(&forward_transform_with_base(p0, 0), &stepper, traj.step, evo.t_final, every)?;
    if waves.times.len() != traj.times.len()
        || waves.times.iter().zip(&traj.times).any(|(a, b)| (a - b).abs() > 1e-9 * evo.t_final.max(1.0))
    {
        return Err(CliError::Numerical("extrinsic and intrinsic record times do not line up".into()));
    }
    let (mut err_k, mut err_tau) = (Vec::new(), Vec::new());
    for ((_, extrinsic), wave) in traj.snapshots.iter().zip(&waves.waves) {
        let intrinsic = inverse_transform(wave);
        err_k.push(linf(&extrinsic.k, &intrinsic.k));
        err_tau.push(linf(&extrinsic.tau, &intrinsic.tau));
    }
    let times = traj.times.clone();
    Ok(DualPath { traj, times, err_k, err_tau, intrinsic_scheme: stepper.describe() })
}

/// Least-squares slope of `-log err` against `log N`.
pub fn fitted_order(ns: &[usize], errs: &[f64]) -> Option<f64> {
    if ns.len() < 2 || errs.iter().any(|&e| !(e > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| -e.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

pub fn compare(run: &Loaded, kind: Kind, sizes: &[usize], out: &Path) -> Result<Value, CliError> {
    let spec = run.config.flow_spec()?;
    let curve = run.curve("compare")?;
    let dp = dual_path(&curve, &spec, run, kind)?;
    let dual: Vec<f64> = dp.err_k.iter().zip(&dp.err_tau).map(|(a, b)| a.max(*b)).collect();
    let report = DiagnosticsReport::from_trajectory(&dp.traj, &spec)?.with_dual_path_error(dual)?;

    let mut manifest = run.manifest("compare")?;
    manifest.argument("kind", kind);
    manifest.argument("sizes", sizes);
    let mut art = Artifacts::create(out, manifest)?;
    art.manifest.scheme("extrinsic", extrinsic_scheme(&dp.traj));
    art.manifest.scheme("intrinsic", dp.intrinsic_scheme.clone());
    art.manifest.meta("lead", lead_of(&curve));
    let rows = (0..dp.times.len()).map(|i| vec![dp.times[i], dp.err_k[i], dp.err_tau[i]]);
    art.write_table("dual_path.csv", &["t", "err_k", "err_tau"], rows)?;
    write_trajectory(&mut art, &dp.traj)?;
    write_report(&mut art, &report)?;

    let mut summary = json!({
        "subcommand": "compare",
        "N": run.config.grid.n,
        "final_err_k": dp.err_k.last(),
        "final_err_tau": dp.err_tau.last(),
        "diagnostics": report.summary(),
    });
    if !sizes.is_empty() {
        let mut study = Vec::new();
        for &n in sizes {
            let mut config = run.config.clone();
            config.grid.n = n;
            config.validate(&run.base)?;
            let sized = Loaded { config, base: run.base.clone() };
            let c = sized.curve("compare")?;
            let d = dual_path(&c, &spec, &sized, kind)?;
            study.push((n, *d.err_k.last().expect("final"), *d.err_tau.last().expect("final")));
        }
        let ns: Vec<usize> = study.iter().map(|s| s.0).collect();
        let ek: Vec<f64> = study.iter().map(|s| s.1).collect();
        let et: Vec<f64> = study.iter().map(|s| s.2).collect();
        art.write_table("convergence.csv", &["N", "err_k", "err_tau"], study.iter().map(|s| vec![s.0 as f64, s.1, s.2]))?;
        summary["convergence"] = json!({
            "N": ns,
            "err_k": ek,
            "err_tau": et,
            "order_k": fitted_order(&ns, &ek),
            "order_tau": fitted_order(&ns, &et),
        });
    }
    art.write_json(SUMMARY_FILE, &summary)?;
    art.finish()?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measured_rate_is_exact_on_lines() {
        let t = [0.0, 0.1, 0.3, 0.6];
        let v: Vec<f64> = t.iter().map(|x| 2.0 - 3.0 * x).collect();
        assert!(measured_rate(&t, &v).iter().all(|r| (r + 3.0).abs() < 1e-12));
        assert_eq!(measured_rate(&[0.0], &[1.0]), vec![0.0]);
    }

    #[test]
    fn blocks_split_on_time() {
        let rows = vec![vec![0.0, 1.0], vec![0.0, 2.0], vec![0.5, 3.0]];
        let b = blocks(rows);
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].len(), 2);
    }

    #[test]
    fn order_of_exact_power_law() {
        let ns = [64, 128, 256];
        let errs: Vec<f64> = ns.iter().map(|&n| 3.0 * (n as f64).powi(-2)).collect();
        assert!((fitted_order(&ns, &errs).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(fitted_order(&ns, &[1.0, 0.0, 1.0]), None);
    }
}
