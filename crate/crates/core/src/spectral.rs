//! FFT-based calculus on a uniform periodic grid.
//!
//! Every routine takes samples `f[j] = f(j * L / N)` of an `L`-periodic function.
//! Derivatives are exact for band-limited input. Odd-order derivatives drop the
//! Nyquist mode (its derivative is not representable by a real sample set).

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<usize, Plans>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn with_plans<R>(n: usize, f: impl FnOnce(&Plans) -> R) -> R {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        let plans = cache.entry(n).or_insert_with(|| Plans {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        });
        f(plans)
    })
}

/// Forward DFT, unnormalised.
pub fn fft(data: &[C64]) -> Vec<C64> {
    let mut buf = data.to_vec();
    fft_in_place(&mut buf);
    buf
}

pub fn fft_in_place(buf: &mut [C64]) {
    with_plans(buf.len(), |p| p.forward.process(buf));
}

/// Inverse DFT including the `1/N` normalisation.
pub fn ifft_in_place(buf: &mut [C64]) {
    let n = buf.len();
    with_plans(n, |p| p.inverse.process(buf));
    let scale = 1.0 / n as f64;
    for z in buf.iter_mut() {
        *z *= scale;
    }
}

pub fn ifft(data: &[C64]) -> Vec<C64> {
    let mut buf = data.to_vec();
    ifft_in_place(&mut buf);
    buf
}

/// Signed mode index of FFT bin `j` (`-N/2` for the Nyquist bin).
#[inline]
pub fn mode_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Angular wavenumber of FFT bin `j` for period `length`.
#[inline]
pub fn wavenumber(j: usize, n: usize, length: f64) -> f64 {
    TAU / length * mode_index(j, n) as f64
}

#[inline]
fn is_nyquist(j: usize, n: usize) -> bool {
    n.is_multiple_of(2) && j == n / 2
}

fn to_complex(f: &[f64]) -> Vec<C64> {
    f.iter().map(|&x| C64::new(x, 0.0)).collect()
}

/// `(i (q + shift))^order`, with the Nyquist bin zeroed for odd orders.
fn symbol(j: usize, n: usize, length: f64, order: usize, shift: f64) -> C64 {
    if order == 0 {
        return C64::new(1.0, 0.0);
    }
    if order % 2 == 1 && is_nyquist(j, n) {
        return C64::new(0.0, 0.0);
    }
    let q = wavenumber(j, n, length) + shift;
    C64::new(0.0, q).powu(order as u32)
}

/// Several derivatives of a real periodic sample set sharing one forward transform.
pub fn derivatives(f: &[f64], length: f64, orders: &[usize]) -> Vec<Vec<f64>> {
    let n = f.len();
    let spec = fft(&to_complex(f));
    orders
        .iter()
        .map(|&order| {
            if order == 0 {
                return f.to_vec();
            }
            let mut buf: Vec<C64> = spec
                .iter()
                .enumerate()
                .map(|(j, &c)| c * symbol(j, n, length, order, 0.0))
                .collect();
            ifft_in_place(&mut buf);
            buf.into_iter().map(|z| z.re).collect()
        })
        .collect()
}

pub fn derivative(f: &[f64], length: f64, order: usize) -> Vec<f64> {
    derivatives(f, length, &[order]).pop().unwrap()
}

/// Derivative of the quasi-periodic field `f(s) e^{i shift s}`, expressed again in the
/// gauged frame: returns `e^{-i shift s} d^order/ds^order [f e^{i shift s}]`.
pub fn complex_derivative(f: &[C64], length: f64, order: usize, shift: f64) -> Vec<C64> {
    let n = f.len();
    let mut buf = fft(f);
    for (j, c) in buf.iter_mut().enumerate() {
        *c *= symbol(j, n, length, order, shift);
    }
    ifft_in_place(&mut buf);
    buf
}

/// Applies the Fourier multiplier `m(q)` (with `q` the shifted angular wavenumber).
pub fn apply_multiplier(f: &[C64], length: f64, shift: f64, m: impl Fn(f64) -> C64) -> Vec<C64> {
    let n = f.len();
    let mut buf = fft(f);
    for (j, c) in buf.iter_mut().enumerate() {
        *c *= m(wavenumber(j, n, length) + shift);
    }
    ifft_in_place(&mut buf);
    buf
}

/// Zeroes every mode with `|index| > N/3`.
pub fn dealias_spectrum(spec: &mut [C64]) {
    let n = spec.len();
    let cutoff = (n / 3) as i64;
    for (j, c) in spec.iter_mut().enumerate() {
        if mode_index(j, n).abs() > cutoff {
            *c = C64::new(0.0, 0.0);
        }
    }
}

pub fn dealias_complex(f: &mut [C64]) {
    fft_in_place(f);
    dealias_spectrum(f);
    ifft_in_place(f);
}

pub fn dealias_real(f: &mut [f64]) {
    let mut buf = to_complex(f);
    dealias_complex(&mut buf);
    for (x, z) in f.iter_mut().zip(buf) {
        *x = z.re;
    }
}

/// Cumulative integral `F(s) = int_0^s f ds'` split as `mean * s + P(s)`,
/// with `P` periodic and `P(0) = 0`. Returns `(P, mean)`.
pub fn antiderivative(f: &[f64], length: f64) -> (Vec<f64>, f64) {
    let n = f.len();
    let mut spec = fft(&to_complex(f));
    let mean = spec[0].re / n as f64;
    spec[0] = C64::new(0.0, 0.0);
    for (j, c) in spec.iter_mut().enumerate() {
        if j == 0 || is_nyquist(j, n) {
            *c = C64::new(0.0, 0.0);
            continue;
        }
        *c /= C64::new(0.0, wavenumber(j, n, length));
    }
    ifft_in_place(&mut spec);
    let base = spec[0].re;
    let periodic = spec.into_iter().map(|z| z.re - base).collect();
    (periodic, mean)
}

/// Full cumulative integral `int_0^{s_j} f ds'` on the grid.
pub fn cumulative_integral(f: &[f64], length: f64) -> Vec<f64> {
    let n = f.len();
    let ds = length / n as f64;
    let (p, mean) = antiderivative(f, length);
    p.into_iter()
        .enumerate()
        .map(|(j, v)| v + mean * ds * j as f64)
        .collect()
}

/// Periodic quadrature (trapezoid rule, spectrally accurate for smooth periodic `f`).
pub fn integrate(f: &[f64], length: f64) -> f64 {
    f.iter().sum::<f64>() * length / f.len() as f64
}

/// Band-limited interpolant evaluated at the cell midpoints `s_j + ds/2`.
pub fn half_shift(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut spec = fft(&to_complex(f));
    for (j, c) in spec.iter_mut().enumerate() {
        if is_nyquist(j, n) {
            *c = C64::new(0.0, 0.0);
            continue;
        }
        let phase = std::f64::consts::PI * mode_index(j, n) as f64 / n as f64;
        *c *= C64::from_polar(1.0, phase);
    }
    ifft_in_place(&mut spec);
    spec.into_iter().map(|z| z.re).collect()
}
