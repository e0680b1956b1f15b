//! Periodic spatial discretisation.
//!
//! A [`GridSpec`] describes a uniform grid on a torus of length `L`; a [`Field`]
//! holds complex samples on that grid. Spectral coefficients are normalised so
//! that
//!
//! ```text
//! u(x_j) = Σ_k c_k exp(i k (x_j - origin)),    k = 2π m / L,  m ∈ [-N/2, N/2)
//! ```
//!
//! which makes `L Σ |c_k|²` equal to the grid L² norm squared. Derivatives and
//! Fourier multipliers zero the Nyquist mode so that real fields stay real.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const MAX_DERIVATIVE_ORDER: u32 = 6;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Samples -> normalised coefficients, in place.
pub(crate) fn forward_in_place(buf: &mut [C64]) {
    let n = buf.len();
    plan(n, false).process(buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Normalised coefficients -> samples, in place.
pub(crate) fn inverse_in_place(buf: &mut [C64]) {
    plan(buf.len(), true).process(buf);
}

pub(crate) fn forward(values: &[C64]) -> Vec<C64> {
    let mut buf = values.to_vec();
    forward_in_place(&mut buf);
    buf
}

pub(crate) fn inverse(coeffs: &[C64]) -> Vec<C64> {
    let mut buf = coeffs.to_vec();
    inverse_in_place(&mut buf);
    buf
}

/// Signed mode index for FFT slot `i` of an `n`-point transform.
#[inline]
pub(crate) fn signed_mode(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct GridSpec {
    num_points: usize,
    domain_length: f64,
    origin: f64,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    num_points: usize,
    domain_length: f64,
    #[serde(default)]
    origin: f64,
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = Error;
    fn try_from(raw: RawGrid) -> Result<Self> {
        GridSpec::new(raw.num_points, raw.domain_length, raw.origin)
    }
}

impl From<GridSpec> for RawGrid {
    fn from(g: GridSpec) -> Self {
        RawGrid {
            num_points: g.num_points,
            domain_length: g.domain_length,
            origin: g.origin,
        }
    }
}

impl GridSpec {
    pub fn new(num_points: usize, domain_length: f64, origin: f64) -> Result<Self> {
        if num_points < 8 || !num_points.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid.num_points must be a power of two >= 8, got {num_points}"
            )));
        }
        if !(domain_length.is_finite() && domain_length > 0.0) {
            return Err(Error::Config(format!(
                "grid.domain_length must be positive and finite, got {domain_length}"
            )));
        }
        if !origin.is_finite() {
            return Err(Error::Config(format!(
                "grid.origin must be finite, got {origin}"
            )));
        }
        Ok(GridSpec {
            num_points,
            domain_length,
            origin,
        })
    }

    /// Grid on `[-L/2, L/2)`.
    pub fn centered(num_points: usize, domain_length: f64) -> Result<Self> {
        Self::new(num_points, domain_length, -0.5 * domain_length)
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn dx(&self) -> f64 {
        self.domain_length / self.num_points as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.dx()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.num_points).map(|i| self.x(i)).collect()
    }

    pub fn midpoint(&self) -> f64 {
        self.origin + 0.5 * self.domain_length
    }

    /// Physical wavenumber of FFT slot `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        2.0 * PI / self.domain_length * signed_mode(i, self.num_points) as f64
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.num_points).map(|i| self.wavenumber(i)).collect()
    }

    pub fn nyquist_index(&self) -> usize {
        self.num_points / 2
    }

    /// Largest retained wavenumber magnitude (the Nyquist mode is always zeroed).
    pub fn max_wavenumber(&self) -> f64 {
        2.0 * PI / self.domain_length * (self.num_points / 2 - 1) as f64
    }

    /// π / Δx.
    pub fn nyquist_wavenumber(&self) -> f64 {
        PI / self.dx()
    }

    /// Wrap a coordinate into the chart `[centre - L/2, centre + L/2)`.
    pub fn wrap_about(&self, x: f64, centre: f64) -> f64 {
        let l = self.domain_length;
        centre + (x - centre + 0.5 * l).rem_euclid(l) - 0.5 * l
    }
}

/// Samples of a real- or complex-valued function on a periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<C64>,
    is_real: bool,
}

impl Field {
    pub fn new(grid: GridSpec, mut values: Vec<C64>, is_real: bool) -> Result<Self> {
        if values.len() != grid.num_points {
            return Err(Error::Config(format!(
                "field has {} samples but grid has {} points",
                values.len(),
                grid.num_points
            )));
        }
        if is_real {
            for v in values.iter_mut() {
                v.im = 0.0;
            }
        }
        Ok(Field {
            grid,
            values,
            is_real,
        })
    }

    pub fn from_real(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        Self::new(
            grid,
            values.into_iter().map(|v| C64::new(v, 0.0)).collect(),
            true,
        )
    }

    pub fn from_fn_real(grid: GridSpec, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.num_points)
            .map(|i| C64::new(f(grid.x(i)), 0.0))
            .collect();
        Field {
            grid,
            values,
            is_real: true,
        }
    }

    pub fn from_fn_complex(grid: GridSpec, f: impl Fn(f64) -> C64) -> Self {
        let values = (0..grid.num_points).map(|i| f(grid.x(i))).collect();
        Field {
            grid,
            values,
            is_real: false,
        }
    }

    pub fn zeros(grid: GridSpec, is_real: bool) -> Self {
        Field {
            grid,
            values: vec![C64::new(0.0, 0.0); grid.num_points],
            is_real,
        }
    }

    /// Build from normalised spectral coefficients.
    pub fn from_spectrum(grid: GridSpec, coeffs: &[C64], is_real: bool) -> Result<Self> {
        if coeffs.len() != grid.num_points {
            return Err(Error::Config(format!(
                "spectrum has {} modes but grid has {} points",
                coeffs.len(),
                grid.num_points
            )));
        }
        Self::new(grid, inverse(coeffs), is_real)
    }

    pub fn spectrum(&self) -> Vec<C64> {
        forward(&self.values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.im.abs()))
    }

    /// Δx Σ |u_j|².
    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.dx() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// L Σ |c_k|²; equals [`Field::l2_norm_sq`] by Parseval.
    pub fn spectral_l2_norm_sq(&self) -> f64 {
        self.grid.domain_length * self.spectrum().iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| v * a).collect(),
            is_real: self.is_real,
        }
    }

    pub fn map(&self, f: impl Fn(C64) -> C64, is_real: bool) -> Field {
        let mut values: Vec<C64> = self.values.iter().map(|&v| f(v)).collect();
        if is_real {
            for v in values.iter_mut() {
                v.im = 0.0;
            }
        }
        Field {
            grid: self.grid,
            values,
            is_real,
        }
    }

    fn zip_with(&self, other: &Field, f: impl Fn(C64, C64) -> C64) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::Config("fields live on different grids".into()));
        }
        let is_real = self.is_real && other.is_real;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field::new(self.grid, values, is_real)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a * b)
    }
}

/// Multiply every retained mode by `symbol(k)`; the Nyquist mode is zeroed.
pub fn apply_multiplier(f: &Field, symbol: impl Fn(f64) -> C64) -> Field {
    let grid = *f.grid();
    let mut coeffs = f.spectrum();
    let nyq = grid.nyquist_index();
    for (i, c) in coeffs.iter_mut().enumerate() {
        if i == nyq {
            *c = C64::new(0.0, 0.0);
        } else {
            *c *= symbol(grid.wavenumber(i));
        }
    }
    let mut values = inverse(&coeffs);
    if f.is_real() {
        for v in values.iter_mut() {
            v.im = 0.0;
        }
    }
    Field {
        grid,
        values,
        is_real: f.is_real(),
    }
}

/// `(ik)^order`.
pub(crate) fn derivative_symbol(k: f64, order: u32) -> C64 {
    C64::new(0.0, k).powu(order)
}

/// Spectral derivative of the given order.
pub fn derivative(f: &Field, order: u32) -> Result<Field> {
    if order > MAX_DERIVATIVE_ORDER {
        return Err(Error::UnsupportedOrder(order));
    }
    if order == 0 {
        return Ok(f.clone());
    }
    Ok(apply_multiplier(f, |k| derivative_symbol(k, order)))
}

/// `|∇|^alpha`: multiplies mode `k` by `|k|^alpha`.
pub fn fractional_derivative(f: &Field, alpha: f64) -> Result<Field> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!(
            "fractional order must be finite and >= 0, got {alpha}"
        )));
    }
    if alpha == 0.0 {
        return Ok(f.clone());
    }
    Ok(apply_multiplier(f, |k| C64::new(k.abs().powf(alpha), 0.0)))
}

/// Δx Σ f_j.
pub fn integrate(f: &Field) -> C64 {
    let sum: C64 = f.values().iter().sum();
    sum * f.grid().dx()
}

/// Rectangle rule for a plain sample vector on `grid`.
pub(crate) fn integrate_real(grid: &GridSpec, values: &[f64]) -> f64 {
    grid.dx() * values.iter().sum::<f64>()
}

/// Shift by `delta`: result(x) = f(x - delta).
pub fn translate(f: &Field, delta: f64) -> Field {
    let grid = *f.grid();
    let nyq = grid.nyquist_index();
    let mut coeffs = f.spectrum();
    for (i, c) in coeffs.iter_mut().enumerate() {
        let k = grid.wavenumber(i);
        if i == nyq {
            *c *= (k * delta).cos();
        } else {
            *c *= C64::from_polar(1.0, -k * delta);
        }
    }
    let mut values = inverse(&coeffs);
    if f.is_real() {
        for v in values.iter_mut() {
            v.im = 0.0;
        }
    }
    Field {
        grid,
        values,
        is_real: f.is_real(),
    }
}

/// Evaluate the band-limited interpolant of `f` at arbitrary points.
pub fn interpolate_at(f: &Field, points: &[f64]) -> Vec<C64> {
    let grid = *f.grid();
    let n = grid.num_points();
    let coeffs = f.spectrum();
    let dk = 2.0 * PI / grid.domain_length();
    let half = (n / 2) as i64;
    points
        .iter()
        .map(|&y| {
            let phase = (y - grid.origin()) * dk;
            let step = C64::from_polar(1.0, phase);
            // modes -N/2+1 ..= N/2-1 by recurrence, Nyquist separately
            let mut z = C64::from_polar(1.0, -((half - 1) as f64) * phase);
            let mut acc = C64::new(0.0, 0.0);
            for m in -(half - 1)..half {
                let slot = if m >= 0 {
                    m as usize
                } else {
                    (m + n as i64) as usize
                };
                acc += coeffs[slot] * z;
                z *= step;
            }
            acc + coeffs[n / 2] * (half as f64 * phase).cos()
        })
        .collect()
}

/// Values of the band-limited interpolant of `f` at `start + j L / m`,
/// `j = 0..m`, via a phase-shifted zero-padded inverse transform.
pub fn resample_uniform(f: &Field, start: f64, m: usize) -> Result<Vec<C64>> {
    let grid = *f.grid();
    let n = grid.num_points();
    if m < n {
        return Err(Error::Resolution(format!(
            "resample target of {m} points is coarser than the source grid ({n})"
        )));
    }
    let coeffs = f.spectrum();
    let shift = start - grid.origin();
    let mut fine = vec![C64::new(0.0, 0.0); m];
    for (i, &c) in coeffs.iter().enumerate() {
        if i == n / 2 {
            continue;
        }
        let k = grid.wavenumber(i);
        let slot = match signed_mode(i, n) {
            s if s >= 0 => s as usize,
            s => (s + m as i64) as usize,
        };
        fine[slot] = c * C64::from_polar(1.0, k * shift);
    }
    inverse_in_place(&mut fine);
    Ok(fine)
}

/// Oversampling used for `|u|^(p-1) u`: `(factor, is_exact_rule)`.
pub(crate) fn oversampling(p: f64) -> (usize, bool) {
    if p.fract() == 0.0 {
        (((p + 1.0) / 2.0).ceil() as usize, true)
    } else {
        (4, false)
    }
}

/// `|u|^(p-1) u` for a sample, real or complex.
#[inline]
pub(crate) fn signed_power(u: C64, p: f64) -> C64 {
    let m2 = u.norm_sqr();
    if m2 == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let half = 0.5 * (p - 1.0);
    let factor = if half.fract() == 0.0 && half.abs() < 64.0 {
        m2.powi(half as i32)
    } else {
        m2.powf(half)
    };
    u * factor
}

/// Dealiased `|u|^(p-1) u` acting on normalised coefficients.
pub(crate) fn power_coeffs(coeffs: &[C64], p: f64, is_real: bool) -> Vec<C64> {
    let n = coeffs.len();
    let (factor, exact) = oversampling(p);
    let m = factor * n;
    let mut fine = vec![C64::new(0.0, 0.0); m];
    for (i, &c) in coeffs.iter().enumerate() {
        if i == n / 2 {
            continue;
        }
        let slot = match signed_mode(i, n) {
            s if s >= 0 => s as usize,
            s => (s + m as i64) as usize,
        };
        fine[slot] = c;
    }
    inverse_in_place(&mut fine);
    for v in fine.iter_mut() {
        if is_real {
            v.im = 0.0;
        }
        *v = signed_power(*v, p);
    }
    forward_in_place(&mut fine);
    let cutoff = if exact { n / 2 } else { n / 3 };
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (i, o) in out.iter_mut().enumerate() {
        let s = signed_mode(i, n);
        if i == n / 2 || s.unsigned_abs() as usize >= cutoff {
            continue;
        }
        let slot = if s >= 0 {
            s as usize
        } else {
            (s + m as i64) as usize
        };
        *o = fine[slot];
    }
    out
}

/// Pointwise `|u|^(p-1) u` (equivalently `sign(u)|u|^p` for real fields),
/// evaluated on a zero-padded grid and truncated back.
pub fn nonlinear_power(f: &Field, p: f64) -> Result<Field> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!(
            "nonlinearity exponent must exceed 1, got {p}"
        )));
    }
    let coeffs = power_coeffs(&f.spectrum(), p, f.is_real());
    Field::from_spectrum(*f.grid(), &coeffs, f.is_real())
}
