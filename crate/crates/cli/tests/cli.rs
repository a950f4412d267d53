use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hasimoto"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("summary is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const VFE: &str = r#"
[grid]
N = 128
[initial]
preset = "perturbed_circle"
amplitude = 0.05
mode = 3
[solver]
kind = "nls"
[evolution]
dt = 1e-3
t_final = 0.05
record_every = 10
"#;

const FM: &str = r#"
[grid]
N = 64
[initial]
preset = "helix"
a = 1.0
b = 0.5
[flow]
A = "k + W*k*tau"
B = "W*d_s(k)"
C = "(W/2)*k^2"
constants = { W = 0.1 }
[evolution]
dt = 1e-3
t_final = 0.01
"#;

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn non_power_of_two_grid_exits_2_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &VFE.replace("N = 128", "N = 100"));
    let out = run(&["evolve", "-c", s(&cfg), "-o", s(&dir.path().join("out"))]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config");
    assert_eq!(err["exit_code"], 2);
    assert!(err["message"].as_str().unwrap().contains("grid.N = 100"));
}

#[test]
fn runaway_tangential_flow_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "fast.toml",
        "[grid]\nN = 64\n[initial]\npreset = \"circle\"\n[flow]\nA = \"0\"\nC = \"1e3\"\n[evolution]\ndt = 1e-3\nt_final = 0.01\n",
    );
    let out = run(&["evolve", "-c", s(&cfg), "-o", s(&dir.path().join("out"))]);
    assert_eq!(out.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "numerical");
}

#[test]
fn classify_fm_reports_the_length_condition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "fm.toml", FM);
    let v = stdout_json(&run(&["classify", "-c", s(&cfg), "-o", s(&dir.path().join("out"))]));
    assert_eq!(v["is_binormal"], false);
    assert_eq!(v["preserves_length"], true);
    assert!(v["residual"].as_f64().unwrap() < 1e-12);
    assert!(dir.path().join("out/classification.json").is_file());
}

#[test]
fn evolve_is_bit_reproducible_and_diagnose_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "vfe.toml", VFE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = stdout_json(&run(&["evolve", "-c", s(&cfg), "-o", s(&a)]));
    stdout_json(&run(&["evolve", "-c", s(&cfg), "-o", s(&b)]));
    for f in ["trajectory.csv", "diagnostics.csv", "curve_final.csv", "profile_final.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let manifest: Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "evolve");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["schemes"]["extrinsic"].as_str().unwrap().contains("RK4"));
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 5);

    let diag = stdout_json(&run(&["diagnose", "-r", s(&a)]));
    assert_eq!(diag["diagnostics"], first["diagnostics"]);
    assert!(first["diagnostics"]["max_relative_length_drift"].as_f64().unwrap() < 1e-10);
    assert_eq!(
        std::fs::read(a.join("diagnostics.csv")).unwrap(),
        std::fs::read(a.join("diagnose/diagnostics.csv")).unwrap()
    );
}

#[test]
fn solve_soliton_from_json_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sol.json",
        r#"{"grid": {"N": 512, "L": 40.0}, "initial": {"preset": "soliton", "a": 1.0},
            "solver": {"kind": "nls"}, "evolution": {"dt": 1e-3, "t_final": 0.2, "record_every": 100}}"#,
    );
    let out = dir.path().join("out");
    let v = stdout_json(&run(&["solve", "-c", s(&cfg), "-o", s(&out)]));
    assert!((v["max_modulus"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert!(v["diagnostics"]["max_relative_energy_drift"].as_f64().unwrap() < 1e-12);
    let env: Value = serde_json::from_slice(&std::fs::read(out.join("wave_final.json")).unwrap()).unwrap();
    assert_eq!(env["N"], 512);
    // the general solver on the same data, selected from the command line
    let v = stdout_json(&run(&["solve", "-c", s(&cfg), "--kind", "general", "-o", s(&dir.path().join("g"))]));
    assert!((v["max_modulus"].as_f64().unwrap() - 2.0).abs() < 1e-3);
    let diag = stdout_json(&run(&["diagnose", "-r", s(&out)]));
    assert_eq!(diag["source"], "solve");
}

#[test]
fn transform_round_trips_the_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "fm.toml", FM);
    let v = stdout_json(&run(&["transform", "-c", s(&cfg), "--base", "5", "-o", s(&dir.path().join("out"))]));
    assert!(v["profile_round_trip_error"].as_f64().unwrap() < 1e-10);
    assert!(v["reconstruction_error"].as_f64().unwrap() < 1e-5);
    assert!((v["mu"].as_f64().unwrap() - 0.4).abs() < 1e-12);
}

#[test]
fn csv_initial_condition_is_hashed_into_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "vfe.toml", VFE);
    let first = dir.path().join("first");
    stdout_json(&run(&["transform", "-c", s(&cfg), "-o", s(&first)]));
    std::fs::copy(first.join("curve.csv"), dir.path().join("ring.csv")).unwrap();
    let csv_cfg = VFE.replace(
        "preset = \"perturbed_circle\"\namplitude = 0.05\nmode = 3",
        "preset = \"csv\"\npath = \"ring.csv\"",
    );
    let cfg = write(dir.path(), "csv.toml", &csv_cfg);
    let out = dir.path().join("second");
    stdout_json(&run(&["transform", "-c", s(&cfg), "-o", s(&out)]));
    assert_eq!(std::fs::read(first.join("profile.csv")).unwrap(), std::fs::read(out.join("profile.csv")).unwrap());
    let manifest: Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 1);
}

#[test]
fn compare_converges_with_grid_size() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "vfe.toml", &VFE.replace("t_final = 0.05", "t_final = 0.2"));
    let out = dir.path().join("out");
    let v = stdout_json(&run(&["compare", "-c", s(&cfg), "--sizes", "64,128,256", "-o", s(&out)]));
    let conv = &v["convergence"];
    assert!(conv["order_k"].as_f64().unwrap() >= 2.0, "{conv}");
    assert!(conv["order_tau"].as_f64().unwrap() >= 2.0, "{conv}");
    assert!(out.join("dual_path.csv").is_file() && out.join("convergence.csv").is_file());
    assert!(v["diagnostics"]["max_dual_path_error"].as_f64().unwrap() < 1e-6);
}

#[test]
fn shipped_configs_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        hasimoto_cli::commands::Loaded::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 3);
}

#[test]
fn help_documents_the_grammar() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains(hasimoto::flow::GRAMMAR));
}
