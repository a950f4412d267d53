//! CSV tables and JSON envelopes for curves, profiles and wave functions.
//!
//! Numbers are written with 17 significant digits, which round-trips every `f64`.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{reparameterize, DiscreteCurve, GeometryProfile, Vec3};
use crate::hasimoto::WaveFunction;

/// Relative tolerance for recognising a uniformly spaced `s` column.
const UNIFORM_TOLERANCE: f64 = 1e-9;

pub const CURVE_COLUMNS: [&str; 4] = ["s", "x", "y", "z"];
pub const PROFILE_COLUMNS: [&str; 3] = ["s", "k", "tau"];
pub const WAVE_COLUMNS: [&str; 3] = ["s", "re_psi", "im_psi"];

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_table(columns: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns)?;
    for row in rows {
        w.write_record(row.into_iter().map(fmt))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ascii"))
}

/// Parses a table with exactly the given header; returns the columns.
fn read_table(text: &str, columns: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != columns {
        return Err(Error::InvalidInput(format!("expected columns {columns:?}, found {header:?}")));
    }
    let mut out = vec![Vec::new(); columns.len()];
    for (line, record) in r.records().enumerate() {
        let record = record?;
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::InvalidInput(format!("row {}: `{field}` is not a number", line + 1)))?;
            out[c].push(v);
        }
    }
    Ok(out)
}

/// Period implied by a uniform `s` column, or `None` when the spacing is not uniform.
fn uniform_period(s: &[f64]) -> Option<f64> {
    if s.len() < 2 {
        return None;
    }
    let ds = s[1] - s[0];
    let uniform = ds > 0.0
        && s.windows(2).all(|w| ((w[1] - w[0]) - ds).abs() <= UNIFORM_TOLERANCE * ds.abs().max(1.0));
    uniform.then_some(ds * s.len() as f64)
}

pub fn curve_to_csv(curve: &DiscreteCurve) -> Result<String> {
    let ds = curve.spacing();
    write_table(
        &CURVE_COLUMNS,
        curve.points().iter().enumerate().map(|(j, p)| vec![j as f64 * ds, p.x, p.y, p.z]),
    )
}

/// Reads `s,x,y,z`. A uniform `s` column is taken as arclength with period `N ds`;
/// otherwise the points are treated as an arbitrary closed polygon and resampled
/// at uniform arclength along their periodic spline.
pub fn curve_from_csv(text: &str, lead: Vec3) -> Result<DiscreteCurve> {
    let cols = read_table(text, &CURVE_COLUMNS)?;
    let points: Vec<Vec3> = (0..cols[0].len()).map(|j| Vec3::new(cols[1][j], cols[2][j], cols[3][j])).collect();
    match uniform_period(&cols[0]) {
        Some(length) => DiscreteCurve::with_lead(points, length, lead),
        None => {
            let n = points.len();
            let perimeter: f64 = (0..n)
                .map(|j| {
                    let next = if j + 1 == n { points[0] + lead } else { points[j + 1] };
                    (next - points[j]).norm()
                })
                .sum();
            reparameterize(&DiscreteCurve::with_lead(points, perimeter, lead)?)
        }
    }
}

pub fn profile_to_csv(profile: &GeometryProfile) -> Result<String> {
    let s = profile.arclength();
    write_table(&PROFILE_COLUMNS, (0..profile.len()).map(|j| vec![s[j], profile.k[j], profile.tau[j]]))
}

pub fn profile_from_csv(text: &str) -> Result<GeometryProfile> {
    let mut cols = read_table(text, &PROFILE_COLUMNS)?;
    let length = uniform_period(&cols[0])
        .ok_or_else(|| Error::InvalidInput("profile `s` column must be uniformly spaced".into()))?;
    let tau = cols.pop().unwrap();
    let k = cols.pop().unwrap();
    GeometryProfile::new(k, tau, length)
}

/// Writes the physical field `psi = psi_gauged e^{i mu s}`.
pub fn wave_to_csv(wave: &WaveFunction) -> Result<String> {
    let s = wave.arclength();
    let psi = wave.physical();
    write_table(&WAVE_COLUMNS, (0..wave.len()).map(|j| vec![s[j], psi[j].re, psi[j].im]))
}

pub fn wave_from_csv(text: &str, mu: f64) -> Result<WaveFunction> {
    let cols = read_table(text, &WAVE_COLUMNS)?;
    let length = uniform_period(&cols[0])
        .ok_or_else(|| Error::InvalidInput("wave `s` column must be uniformly spaced".into()))?;
    let psi: Vec<C64> = cols[1].iter().zip(&cols[2]).map(|(&re, &im)| C64::new(re, im)).collect();
    WaveFunction::from_physical(&psi, mu, length)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    Curve,
    Profile,
    Wave,
}

/// Self-describing JSON document holding one sampled object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub kind: EnvelopeKind,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lead: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_point: Option<usize>,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
    pub columns: Vec<String>,
    /// Column-major samples, one vector per entry of `columns`.
    pub data: Vec<Vec<f64>>,
}

impl Envelope {
    fn new(kind: EnvelopeKind, length: f64, columns: &[&str], data: Vec<Vec<f64>>) -> Self {
        Self {
            kind,
            n: data[0].len(),
            length,
            lead: None,
            mu: None,
            base_point: None,
            metadata: BTreeMap::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            data,
        }
    }

    pub fn from_curve(curve: &DiscreteCurve) -> Self {
        let ds = curve.spacing();
        let p = curve.points();
        let data = vec![
            (0..curve.len()).map(|j| j as f64 * ds).collect(),
            p.iter().map(|v| v.x).collect(),
            p.iter().map(|v| v.y).collect(),
            p.iter().map(|v| v.z).collect(),
        ];
        let mut e = Self::new(EnvelopeKind::Curve, curve.length(), &CURVE_COLUMNS, data);
        let lead = curve.lead();
        e.lead = (lead != Vec3::zeros()).then(|| [lead.x, lead.y, lead.z]);
        e
    }

    pub fn from_profile(profile: &GeometryProfile) -> Self {
        let data = vec![profile.arclength(), profile.k.clone(), profile.tau.clone()];
        Self::new(EnvelopeKind::Profile, profile.length, &PROFILE_COLUMNS, data)
    }

    /// `base` is the node where the torsion integral starts.
    pub fn from_wave(wave: &WaveFunction, base: usize) -> Self {
        let psi = wave.physical();
        let data = vec![wave.arclength(), psi.iter().map(|z| z.re).collect(), psi.iter().map(|z| z.im).collect()];
        let mut e = Self::new(EnvelopeKind::Wave, wave.length, &WAVE_COLUMNS, data);
        e.mu = Some(wave.mu);
        e.base_point = Some(base);
        e
    }

    pub fn with_metadata(mut self, key: &str, value: impl Serialize) -> Result<Self> {
        self.metadata.insert(key.to_owned(), serde_json::to_value(value)?);
        Ok(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let e: Self = serde_json::from_str(text)?;
        let expected: &[&str] = match e.kind {
            EnvelopeKind::Curve => &CURVE_COLUMNS,
            EnvelopeKind::Profile => &PROFILE_COLUMNS,
            EnvelopeKind::Wave => &WAVE_COLUMNS,
        };
        if e.columns != expected || e.data.len() != expected.len() || e.data.iter().any(|c| c.len() != e.n) {
            return Err(Error::InvalidInput(format!("{:?} envelope must hold {} columns of N = {} samples", e.kind, expected.len(), e.n)));
        }
        Ok(e)
    }

    fn expect(&self, kind: EnvelopeKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::InvalidInput(format!("expected a {kind:?} envelope, found {:?}", self.kind)));
        }
        Ok(())
    }

    pub fn to_curve(&self) -> Result<DiscreteCurve> {
        self.expect(EnvelopeKind::Curve)?;
        let points = (0..self.n).map(|j| Vec3::new(self.data[1][j], self.data[2][j], self.data[3][j])).collect();
        let lead = self.lead.map_or(Vec3::zeros(), Vec3::from);
        DiscreteCurve::with_lead(points, self.length, lead)
    }

    pub fn to_profile(&self) -> Result<GeometryProfile> {
        self.expect(EnvelopeKind::Profile)?;
        GeometryProfile::new(self.data[1].clone(), self.data[2].clone(), self.length)
    }

    pub fn to_wave(&self) -> Result<WaveFunction> {
        self.expect(EnvelopeKind::Wave)?;
        let psi: Vec<C64> = self.data[1].iter().zip(&self.data[2]).map(|(&re, &im)| C64::new(re, im)).collect();
        WaveFunction::from_physical(&psi, self.mu.unwrap_or(0.0), self.length)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{circle, helix, profile_from_curve, wavy_ring};
    use crate::hasimoto::forward_transform;
    use proptest::prelude::*;

    #[test]
    fn curve_csv_round_trip_is_exact() {
        for c in [wavy_ring(32, 0.15, 0.2, 2).unwrap(), helix(16, 1.0, 0.5).unwrap()] {
            let text = curve_to_csv(&c).unwrap();
            assert!(text.starts_with("s,x,y,z\n"));
            let back = curve_from_csv(&text, c.lead()).unwrap();
            assert_eq!(back.points(), c.points());
            assert!((back.length() - c.length()).abs() <= 1e-12 * c.length());
        }
    }

    #[test]
    fn nonuniform_csv_is_resampled() {
        let n = 64;
        let mut text = String::from("s,x,y,z\n");
        for j in 0..n {
            // nodes bunched towards phi = 0
            let u = j as f64 / n as f64;
            let phi = std::f64::consts::TAU * (u - 0.08 * (std::f64::consts::TAU * u).sin());
            text.push_str(&format!("{},{},{},0\n", phi, phi.cos(), phi.sin()));
        }
        let c = curve_from_csv(&text, Vec3::zeros()).unwrap();
        assert!((c.length() - std::f64::consts::TAU).abs() < 1e-5);
        assert!(c.points().iter().all(|p| (p.norm() - 1.0).abs() < 1e-5));
        let speed = c.speed();
        assert!(speed.iter().all(|v| (v - 1.0).abs() < 1e-3));
    }

    #[test]
    fn profile_and_wave_round_trips() {
        let p = profile_from_curve(&wavy_ring(32, 0.15, 0.2, 2).unwrap()).unwrap();
        let back = profile_from_csv(&profile_to_csv(&p).unwrap()).unwrap();
        assert_eq!(back.k, p.k);
        assert_eq!(back.tau, p.tau);
        assert!((back.length - p.length).abs() <= 1e-12 * p.length);

        let w = forward_transform(&p);
        let back = wave_from_csv(&wave_to_csv(&w).unwrap(), w.mu).unwrap();
        assert!(back.linf_distance(&w) < 1e-14);
    }

    #[test]
    fn envelopes_round_trip_exactly() {
        let h = helix(16, 1.0, 0.5).unwrap();
        let e = Envelope::from_curve(&h).with_metadata("preset", "helix").unwrap();
        let back = Envelope::from_json(&e.to_json().unwrap()).unwrap();
        assert_eq!(back, e);
        let c = back.to_curve().unwrap();
        assert_eq!(c.points(), h.points());
        assert_eq!(c.lead(), h.lead());
        assert_eq!(c.length(), h.length());

        let p = profile_from_curve(&circle(16, 2.0).unwrap()).unwrap();
        assert_eq!(Envelope::from_json(&Envelope::from_profile(&p).to_json().unwrap()).unwrap().to_profile().unwrap(), p);

        let w = forward_transform(&profile_from_curve(&h).unwrap());
        let back = Envelope::from_json(&Envelope::from_wave(&w, 0).to_json().unwrap()).unwrap().to_wave().unwrap();
        assert!(back.linf_distance(&w) < 1e-14);
        assert_eq!(back.mu, w.mu);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(curve_from_csv("s,x,y\n0,1,2\n", Vec3::zeros()).is_err());
        assert!(profile_from_csv("s,k,tau\n0,1,0\n0.5,oops,0\n").is_err());
        assert!(profile_from_csv("s,k,tau\n0,1,0\n0.5,1,0\n0.6,1,0\n1.5,1,0\n").is_err());
        let mut e = Envelope::from_profile(&profile_from_curve(&circle(16, 1.0).unwrap()).unwrap());
        assert!(e.to_curve().is_err());
        e.data[1].pop();
        assert!(Envelope::from_json(&e.to_json().unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn decimal_format_round_trips(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
            prop_assert_eq!(fmt(x).parse::<f64>().unwrap(), x);
        }
    }
}
