//! Flow laws `gamma_t = C T + B N + A B` with coefficients written as expressions over
//! curvature `k`, torsion `tau`, arclength `s`, time `t` and named constants.
//!
//! ```
//! use hasimoto::flow::FlowSpec;
//! let fm = FlowSpec::fukumoto_miyazaki(0.1);
//! assert_eq!(fm.source_b(), "W*d_s(k)");
//! ```

pub mod ast;
mod eval;
mod parse;

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::{BinOp, Expr, Func, Var};
pub use eval::{eval, eval_k_only, EvalContext, Value, DIVISION_GUARD};
pub use parse::{parse_expr, ParseError, MAX_DERIVATIVE_DEPTH};

use crate::geometry::GeometryProfile;

/// Coefficients below this magnitude are dropped from a detected power series.
pub const POWER_SERIES_TOLERANCE: f64 = 1e-13;

/// Expression grammar accepted for each coefficient.
pub const GRAMMAR: &str = "\
expr   := term (('+'|'-') term)*
term   := factor (('*'|'/') factor)*
factor := ('-'|'+') factor | base ('^' ['-'|'+'] number)?
base   := number | ident | 'd_s' '(' expr ')' | func '(' expr ')' | '(' expr ')'
func   := sin | cos | exp | sqrt | abs
ident  := k | tau | s | t | pi | <constant name>
d_s nests at most 3 deep; whitespace is insignificant; s-dependence must be L-periodic.";

/// Which of the three velocity components an expression defines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coefficient {
    /// Binormal component.
    A,
    /// Normal component.
    B,
    /// Tangential component.
    C,
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coefficient::A => "A",
            Coefficient::B => "B",
            Coefficient::C => "C",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("syntax error in coefficient {coefficient} at byte {offset}: {message}")]
    Syntax { coefficient: Coefficient, offset: usize, message: String },

    #[error("unbound constant '{0}'")]
    UnboundConstant(String),

    #[error("denominator below {DIVISION_GUARD:e} at node {node} in '{expr}'")]
    DivisionNearZero { node: usize, expr: String },

    #[error("coefficient {coefficient} depends on s but is not periodic over L = {length}")]
    Aperiodic { coefficient: Coefficient, length: f64 },
}

/// Parsed flow law. The stored trees have constants substituted and are constant-folded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    sources: [String; 3],
    constants: BTreeMap<String, f64>,
    raw: [Expr; 3],
    folded: [Expr; 3],
}

impl FlowSpec {
    pub fn parse(a: &str, b: &str, c: &str, constants: BTreeMap<String, f64>) -> Result<Self, FlowError> {
        let parse_one = |text: &str, coefficient| {
            parse_expr(text).map_err(|e| FlowError::Syntax { coefficient, offset: e.offset, message: e.message })
        };
        let raw = [parse_one(a, Coefficient::A)?, parse_one(b, Coefficient::B)?, parse_one(c, Coefficient::C)?];
        let mut names = Vec::new();
        raw.iter().for_each(|e| e.constants(&mut names));
        if let Some(missing) = names.into_iter().find(|n| !constants.contains_key(n)) {
            return Err(FlowError::UnboundConstant(missing));
        }
        let folded = [raw[0].fold(&constants), raw[1].fold(&constants), raw[2].fold(&constants)];
        Ok(Self { sources: [a.into(), b.into(), c.into()], constants, raw, folded })
    }

    /// Vortex filament equation, `gamma_t = k B`.
    pub fn vfe() -> Self {
        Self::parse("k", "0", "0", BTreeMap::new()).expect("valid preset")
    }

    /// Filament with axial flow: `gamma_t = k B + W (k^2/2 T + k_s N + k tau B)`.
    pub fn fukumoto_miyazaki(w: f64) -> Self {
        let constants = BTreeMap::from([("W".to_string(), w)]);
        Self::parse("k + W*k*tau", "W*d_s(k)", "(W/2)*k^2", constants).expect("valid preset")
    }

    /// Binormal flow `gamma_t = (sum_n a_n k^n) B`; `coefficients[i]` is `a_{i+1}`.
    pub fn power_series(coefficients: &[f64]) -> Self {
        let a = coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| format!("({c:e})*k^{}", i + 1))
            .collect::<Vec<_>>()
            .join(" + ");
        let a = if a.is_empty() { "0".to_string() } else { a };
        Self::parse(&a, "0", "0", BTreeMap::new()).expect("valid preset")
    }

    pub fn a(&self) -> &Expr {
        &self.folded[0]
    }

    pub fn b(&self) -> &Expr {
        &self.folded[1]
    }

    pub fn c(&self) -> &Expr {
        &self.folded[2]
    }

    pub fn source_a(&self) -> &str {
        &self.sources[0]
    }

    pub fn source_b(&self) -> &str {
        &self.sources[1]
    }

    pub fn source_c(&self) -> &str {
        &self.sources[2]
    }

    pub fn constants(&self) -> &BTreeMap<String, f64> {
        &self.constants
    }

    /// The parsed trees before folding, with constants substituted.
    pub fn unfolded(&self) -> [Expr; 3] {
        [
            self.raw[0].substitute(&self.constants),
            self.raw[1].substitute(&self.constants),
            self.raw[2].substitute(&self.constants),
        ]
    }

    pub fn expressions(&self) -> [&Expr; 3] {
        [&self.folded[0], &self.folded[1], &self.folded[2]]
    }

    /// True when no coefficient references `s` or `t` explicitly.
    pub fn is_geometric(&self) -> bool {
        self.folded.iter().all(|e| !e.uses(Var::S) && !e.uses(Var::T))
    }

    pub fn derivative_depth(&self) -> usize {
        self.folded.iter().map(Expr::derivative_depth).max().unwrap_or(0)
    }

    /// Highest polynomial degree in `k` among the three coefficients.
    pub fn k_degree(&self) -> f64 {
        self.folded.iter().map(Expr::k_degree).fold(0.0, f64::max)
    }

    /// Rejects coefficients whose `s`-dependence does not repeat with period `length`.
    pub fn validate_periodicity(&self, length: f64) -> Result<(), FlowError> {
        const N: usize = 64;
        let ds = length / N as f64;
        let k: Vec<f64> = (0..N).map(|j| 1.0 + 0.25 * (TAU * j as f64 / N as f64).cos()).collect();
        let tau: Vec<f64> = (0..N).map(|j| 0.5 * (TAU * j as f64 / N as f64).sin()).collect();
        let s0: Vec<f64> = (0..N).map(|j| j as f64 * ds).collect();
        let s1: Vec<f64> = s0.iter().map(|s| s + length).collect();
        let coefficients = [Coefficient::A, Coefficient::B, Coefficient::C];
        for (e, coefficient) in self.folded.iter().zip(coefficients) {
            if !e.uses(Var::S) {
                continue;
            }
            let at = |s: &[f64]| {
                let ctx = EvalContext { k: &k, tau: &tau, s, t: 0.0, period: length, speed: None };
                eval(e, &ctx).map(|v| v.into_field(N))
            };
            let (v0, v1) = (at(&s0)?, at(&s1)?);
            let scale = 1.0 + v0.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            if v0.iter().zip(&v1).any(|(x, y)| (x - y).abs() > 1e-9 * scale) {
                return Err(FlowError::Aperiodic { coefficient, length });
            }
        }
        Ok(())
    }
}

/// Sampled coefficients `(A, B, C)` at the grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowCoefficients {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl FlowCoefficients {
    pub fn from_context(spec: &FlowSpec, ctx: &EvalContext) -> Result<Self, FlowError> {
        let n = ctx.len();
        Ok(Self {
            a: eval(spec.a(), ctx)?.into_field(n),
            b: eval(spec.b(), ctx)?.into_field(n),
            c: eval(spec.c(), ctx)?.into_field(n),
        })
    }
}

pub fn evaluate_flow(spec: &FlowSpec, profile: &GeometryProfile, time: f64) -> Result<FlowCoefficients, FlowError> {
    spec.validate_periodicity(profile.length)?;
    let s = profile.arclength();
    let ctx = profile_context(profile, &s, time);
    FlowCoefficients::from_context(spec, &ctx)
}

pub(crate) fn profile_context<'a>(profile: &'a GeometryProfile, s: &'a [f64], time: f64) -> EvalContext<'a> {
    EvalContext { k: &profile.k, tau: &profile.tau, s, t: time, period: profile.length, speed: None }
}

/// `C_s - B k` at each node; zero for flows that preserve local arclength.
pub fn length_condition(spec: &FlowSpec, profile: &GeometryProfile, time: f64) -> Result<Vec<f64>, FlowError> {
    let s = profile.arclength();
    let ctx = profile_context(profile, &s, time);
    let n = ctx.len();
    let c_s = eval(&Expr::Ds(Box::new(spec.c().clone())), &ctx)?;
    let b = eval(spec.b(), &ctx)?;
    Ok((0..n).map(|j| c_s.at(j) - b.at(j) * profile.k[j]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowClassification {
    pub is_binormal: bool,
    /// Largest `|C_s - B k|` over all probe nodes.
    pub length_condition_residual: f64,
    /// `(n, a_n)` pairs when the flow is binormal with `A = sum_n a_n k^n`, `n >= 1`.
    pub power_series: Option<Vec<(usize, f64)>>,
}

pub fn classify_flow(spec: &FlowSpec, probes: &[GeometryProfile]) -> Result<FlowClassification, FlowError> {
    let is_binormal = spec.b().is_zero() && spec.c().is_zero();
    let mut residual: f64 = 0.0;
    if !is_binormal {
        for p in probes {
            spec.validate_periodicity(p.length)?;
            let r = length_condition(spec, p, 0.0)?;
            residual = r.iter().fold(residual, |m, x| m.max(x.abs()));
        }
    }
    let power_series = is_binormal.then(|| power_series_terms(spec.a())).flatten();
    Ok(FlowClassification { is_binormal, length_condition_residual: residual, power_series })
}

/// Nonzero `(n, a_n)` of a polynomial in `k` with vanishing constant term.
pub fn power_series_terms(a: &Expr) -> Option<Vec<(usize, f64)>> {
    let poly = a.k_polynomial()?;
    if poly[0].abs() >= POWER_SERIES_TOLERANCE {
        return None;
    }
    let terms: Vec<(usize, f64)> =
        poly.iter().enumerate().skip(1).filter(|(_, c)| c.abs() >= POWER_SERIES_TOLERANCE).map(|(n, &c)| (n, c)).collect();
    (!terms.is_empty()).then_some(terms)
}

/// Random band-limited profile with `k >= k_min`, modes `1..=max_mode`.
pub fn random_profile(rng: &mut impl Rng, n: usize, length: f64, max_mode: usize, k_min: f64) -> GeometryProfile {
    let mut k = vec![0.0; n];
    let mut tau = vec![rng.random_range(-0.5..0.5); n];
    for m in 1..=max_mode {
        let decay = 1.0 / (m * m) as f64;
        let (ak, pk) = (rng.random_range(-0.5..0.5) * decay, rng.random_range(0.0..TAU));
        let (at, pt) = (rng.random_range(-0.5..0.5) * decay, rng.random_range(0.0..TAU));
        for j in 0..n {
            let x = TAU * (m * j) as f64 / n as f64;
            k[j] += ak * (x + pk).cos();
            tau[j] += at * (x + pt).cos();
        }
    }
    let lo = k.iter().cloned().fold(f64::INFINITY, f64::min);
    let shift = k_min - lo + rng.random_range(0.0..1.0);
    k.iter_mut().for_each(|x| *x += shift);
    GeometryProfile::new(k, tau, length).expect("well-formed probe")
}

/// Constant, single-mode, and `random` seeded band-limited profiles.
pub fn default_probes(n: usize, length: f64, random: usize, seed: u64) -> Vec<GeometryProfile> {
    let mode = |amp: f64, base: f64, f: fn(f64) -> f64| -> Vec<f64> {
        (0..n).map(|j| base + amp * f(TAU * j as f64 / n as f64)).collect()
    };
    let mut probes = vec![
        GeometryProfile::new(vec![1.0; n], vec![0.3; n], length).expect("constant probe"),
        GeometryProfile::new(mode(0.3, 1.0, f64::cos), mode(0.2, 0.1, f64::sin), length).expect("mode probe"),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    probes.extend((0..random).map(|_| random_profile(&mut rng, n, length, (n / 8).min(6), 0.2)));
    probes
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn consts(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn syntax_error_names_coefficient_and_offset() {
        let err = FlowSpec::parse("k +", "0", "0", BTreeMap::new()).unwrap_err();
        assert!(matches!(err, FlowError::Syntax { coefficient: Coefficient::A, offset: 3, .. }));
        let err = FlowSpec::parse("k", "0", "W*k", BTreeMap::new()).unwrap_err();
        assert_eq!(err, FlowError::UnboundConstant("W".into()));
    }

    #[test]
    fn vfe_on_circle() {
        let p = GeometryProfile::new(vec![0.5; 64], vec![0.0; 64], TAU * 2.0).unwrap();
        let f = evaluate_flow(&FlowSpec::vfe(), &p, 0.0).unwrap();
        assert!(f.a.iter().all(|&x| x == 0.5));
        assert!(f.b.iter().chain(&f.c).all(|&x| x == 0.0));
    }

    #[test]
    fn fm_on_helix() {
        let p = GeometryProfile::new(vec![0.8; 64], vec![0.4; 64], TAU * 1.25f64.sqrt()).unwrap();
        let f = evaluate_flow(&FlowSpec::fukumoto_miyazaki(0.1), &p, 0.0).unwrap();
        for j in 0..64 {
            assert!((f.a[j] - 0.832).abs() < 1e-15);
            assert!(f.b[j].abs() < 1e-15);
            assert!((f.c[j] - 0.032).abs() < 1e-15);
        }
    }

    #[test]
    fn square_is_pointwise() {
        let n = 128;
        let k: Vec<f64> = (0..n).map(|j| 1.0 + 0.3 * (TAU * j as f64 / n as f64).cos()).collect();
        let p = GeometryProfile::new(k.clone(), vec![0.0; n], 5.0).unwrap();
        let spec = FlowSpec::parse("k^2", "0", "0", BTreeMap::new()).unwrap();
        let f = evaluate_flow(&spec, &p, 0.0).unwrap();
        for j in 0..n {
            assert!((f.a[j] - k[j] * k[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn classification_of_presets() {
        let probes = default_probes(64, TAU, 5, 7);
        let vfe = classify_flow(&FlowSpec::vfe(), &probes).unwrap();
        assert!(vfe.is_binormal);
        assert_eq!(vfe.length_condition_residual, 0.0);
        assert_eq!(vfe.power_series, Some(vec![(1, 1.0)]));

        let fm = classify_flow(&FlowSpec::fukumoto_miyazaki(0.1), &probes).unwrap();
        assert!(!fm.is_binormal);
        assert!(fm.length_condition_residual < 1e-12, "{}", fm.length_condition_residual);
        assert_eq!(fm.power_series, None);

        let ps = classify_flow(&FlowSpec::power_series(&[1.0, 0.0, -0.25]), &probes).unwrap();
        assert_eq!(ps.power_series, Some(vec![(1, 1.0), (3, -0.25)]));
        let shifted = FlowSpec::parse("1 + k", "0", "0", BTreeMap::new()).unwrap();
        assert_eq!(classify_flow(&shifted, &probes).unwrap().power_series, None);
    }

    #[test]
    fn constant_tangential_flow_has_zero_residual() {
        let spec = FlowSpec::parse("k", "0", "c", consts(&[("c", 2.5)])).unwrap();
        let r = classify_flow(&spec, &default_probes(32, 3.0, 3, 1)).unwrap();
        assert!(!r.is_binormal);
        assert_eq!(r.length_condition_residual, 0.0);
    }

    #[test]
    fn normal_flow_breaks_the_length_condition() {
        let spec = FlowSpec::parse("0", "k", "0", BTreeMap::new()).unwrap();
        let r = classify_flow(&spec, &default_probes(32, 3.0, 0, 1)).unwrap();
        assert!((r.length_condition_residual - 1.69).abs() < 1e-12);
    }

    #[test]
    fn aperiodic_s_dependence_is_rejected() {
        let spec = FlowSpec::parse("k", "0", "s", BTreeMap::new()).unwrap();
        let err = classify_flow(&spec, &default_probes(32, TAU, 0, 1)).unwrap_err();
        assert!(matches!(err, FlowError::Aperiodic { coefficient: Coefficient::C, .. }));
        let spec = FlowSpec::parse("k*cos(s)", "0", "0", BTreeMap::new()).unwrap();
        assert!(spec.validate_periodicity(TAU).is_ok());
        assert!(spec.validate_periodicity(5.0).is_err());
        assert!(!spec.is_geometric());
    }

    #[test]
    fn bare_k_division_is_regular_at_zero_curvature() {
        let n = 16;
        let k: Vec<f64> = (0..n).map(|j| if j == 3 { 0.0 } else { 1.0 }).collect();
        let p = GeometryProfile::new(k, vec![0.0; n], 1.0).unwrap();
        let s = p.arclength();
        let ctx = profile_context(&p, &s, 0.0);
        let ok = eval(&parse_expr("(k + 2*k^3) / k").unwrap(), &ctx).unwrap();
        assert_eq!(ok.at(3), 1.0);
        let err = eval(&parse_expr("tau / k").unwrap(), &ctx).unwrap_err();
        assert!(matches!(err, FlowError::DivisionNearZero { node: 3, .. }));
        let err = eval(&parse_expr("k / (k*k)").unwrap(), &ctx).unwrap_err();
        assert!(matches!(err, FlowError::DivisionNearZero { node: 3, .. }));
    }

    #[test]
    fn derivative_of_constant_is_exact_zero() {
        let p = default_probes(32, 2.0, 1, 3).pop().unwrap();
        let s = p.arclength();
        let ctx = profile_context(&p, &s, 0.7);
        assert_eq!(eval(&parse_expr("d_s(3*t)").unwrap(), &ctx).unwrap(), Value::Scalar(0.0));
        let ds = eval(&parse_expr("d_s(s)").unwrap().fold(&BTreeMap::new()), &ctx).unwrap();
        assert_eq!(ds, Value::Scalar(1.0));
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-3.0..3.0f64).prop_map(|x| Expr::Num((x * 8.0).round() / 8.0 + 0.0)),
            Just(Expr::Num(0.0)),
            Just(Expr::Num(1.0)),
            Just(Expr::Var(Var::K)),
            Just(Expr::Var(Var::Tau)),
            Just(Expr::Var(Var::T)),
            Just(Expr::Const("W".into())),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::binary(BinOp::Add, a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::binary(BinOp::Sub, a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::binary(BinOp::Mul, a, b)),
                inner.clone().prop_map(|a| Expr::div(a, Expr::binary(BinOp::Add, Expr::Num(2.0), Expr::Var(Var::K)))),
                inner.clone().prop_map(|a| Expr::div(a, Expr::Var(Var::K))),
                inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
                (inner.clone(), 0u8..4).prop_map(|(a, e)| Expr::Pow(Box::new(a), e as f64)),
                inner.clone().prop_map(|a| Expr::Call(Func::Sin, Box::new(a))),
                inner.prop_map(|a| Expr::Ds(Box::new(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(e in arb_expr()) {
            prop_assume!(e.derivative_depth() <= MAX_DERIVATIVE_DEPTH);
            let printed = e.to_string();
            let back = parse_expr(&printed).unwrap();
            prop_assert_eq!(back, e, "{}", printed);
        }

        #[test]
        fn folding_preserves_values(e in arb_expr(), seed in 0u64..1000) {
            prop_assume!(e.derivative_depth() <= MAX_DERIVATIVE_DEPTH);
            let c = consts(&[("W", 0.3)]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_profile(&mut rng, 32, 3.0, 4, 0.5);
            let s = p.arclength();
            let ctx = profile_context(&p, &s, 0.4);
            let plain = eval(&e.substitute(&c), &ctx).unwrap().into_field(32);
            let folded = eval(&e.fold(&c), &ctx).unwrap().into_field(32);
            for (x, y) in plain.iter().zip(&folded) {
                let scale = 1.0 + x.abs().max(y.abs());
                prop_assert!((x - y).abs() <= 1e-12 * scale || (x.is_nan() && y.is_nan()), "{} vs {}", x, y);
            }
        }
    }
}
