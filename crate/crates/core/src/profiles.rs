//! Closed-form initial data and the modulated carrier ansatz.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{self, Field, GridSpec, C64};

/// Ground-state tails at the wrap point must sit below this fraction of the peak.
pub const TAIL_TOLERANCE: f64 = 1e-12;

/// Modes weaker than this fraction of the largest one do not count towards the
/// envelope bandwidth.
const BANDWIDTH_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    GroundState,
    Soliton,
    Gaussian,
    EmbeddingAnsatz,
}

/// Declarative description of initial data.
///
/// `width` doubles as the soliton scale `lambda`; `n` is the carrier frequency
/// of the embedding ansatz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub kind: ProfileKind,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub width: f64,
    #[serde(default)]
    pub center: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
}

fn default_p() -> f64 {
    5.0
}

fn one() -> f64 {
    1.0
}

impl ProfileSpec {
    pub fn gaussian(amplitude: f64, width: f64, center: f64) -> Self {
        ProfileSpec {
            kind: ProfileKind::Gaussian,
            p: default_p(),
            amplitude,
            width,
            center,
            n: None,
        }
    }

    pub fn ground_state(p: f64) -> Self {
        ProfileSpec {
            kind: ProfileKind::GroundState,
            p,
            amplitude: 1.0,
            width: 1.0,
            center: 0.0,
            n: None,
        }
    }

    pub fn soliton(p: f64, lambda: f64, center: f64) -> Self {
        ProfileSpec {
            kind: ProfileKind::Soliton,
            p,
            amplitude: 1.0,
            width: lambda,
            center,
            n: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ProfileKind::GroundState | ProfileKind::Soliton => {
                if !(self.p.is_finite() && self.p > 1.0) {
                    return Err(Error::Config(format!(
                        "profile.p must be > 1, got {}",
                        self.p
                    )));
                }
                if self.kind == ProfileKind::Soliton && !(self.width > 0.0) {
                    return Err(Error::Config(format!(
                        "profile.width (soliton scale) must be > 0, got {}",
                        self.width
                    )));
                }
            }
            ProfileKind::Gaussian => {
                if !(self.width.is_finite() && self.width > 0.0) {
                    return Err(Error::Config(format!(
                        "profile.width must be > 0, got {}",
                        self.width
                    )));
                }
            }
            ProfileKind::EmbeddingAnsatz => {
                if !(self.width.is_finite() && self.width > 0.0) {
                    return Err(Error::Config(format!(
                        "profile.width must be > 0, got {}",
                        self.width
                    )));
                }
                match self.n {
                    Some(n) if n.is_finite() && n > 0.0 => {}
                    _ => {
                        return Err(Error::Config(
                            "profile.n must be a positive number for embedding_ansatz".into(),
                        ))
                    }
                }
            }
        }
        if !self.amplitude.is_finite() || !self.center.is_finite() {
            return Err(Error::Config(
                "profile.amplitude and profile.center must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Real initial data on `grid`. The embedding ansatz needs an NLS solution
    /// and is built by the embedding module instead.
    pub fn build(&self, grid: &GridSpec) -> Result<Field> {
        self.validate()?;
        match self.kind {
            ProfileKind::GroundState => {
                let q = ground_state(self.p, grid)?;
                Ok(spectral::translate(&q, self.center))
            }
            ProfileKind::Soliton => {
                soliton(self.p, self.width, grid.midpoint() + self.center, grid)
            }
            ProfileKind::Gaussian => Ok(gaussian(self.amplitude, self.width, self.center, grid)),
            ProfileKind::EmbeddingAnsatz => Err(Error::Config(
                "embedding_ansatz data is built from an NLS solution, not directly".into(),
            )),
        }
    }
}

/// `sech(z)` without overflow.
fn sech(z: f64) -> f64 {
    let e = (-z.abs()).exp();
    2.0 * e / (1.0 + e * e)
}

/// `Q_p(x) = ((p+1) / (2 cosh²((p-1) x / 2)))^(1/(p-1))`.
pub fn ground_state_value(p: f64, x: f64) -> f64 {
    ((p + 1.0) / 2.0).powf(1.0 / (p - 1.0)) * sech(0.5 * (p - 1.0) * x).powf(2.0 / (p - 1.0))
}

/// `Q_p` centred at the grid midpoint.
pub fn ground_state(p: f64, grid: &GridSpec) -> Result<Field> {
    soliton(p, 1.0, grid.midpoint(), grid)
}

/// `lambda^(-2/(p-1)) Q_p((x - c) / lambda)`; travels right at speed `1/lambda²`
/// under focusing gKdV.
pub fn soliton(p: f64, lambda: f64, center: f64, grid: &GridSpec) -> Result<Field> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::Domain(format!("ground state needs p > 1, got {p}")));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!(
            "soliton scale must be > 0, got {lambda}"
        )));
    }
    let half = 0.5 * grid.domain_length() / lambda;
    let tail = sech(0.5 * (p - 1.0) * half).powf(2.0 / (p - 1.0));
    if tail > TAIL_TOLERANCE {
        return Err(Error::Resolution(format!(
            "domain length {} too short: ground-state tail is {tail:.2e} of the peak",
            grid.domain_length()
        )));
    }
    let amp = lambda.powf(-2.0 / (p - 1.0));
    Ok(Field::from_fn_real(*grid, |x| {
        amp * ground_state_value(p, (grid.wrap_about(x, center) - center) / lambda)
    }))
}

pub fn soliton_speed(lambda: f64) -> f64 {
    1.0 / (lambda * lambda)
}

/// `M(Q_p)` by trapezoidal quadrature, refined until successive values agree to 1e-10 relative.
pub fn ground_state_mass(p: f64) -> Result<f64> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::Domain(format!("ground state needs p > 1, got {p}")));
    }
    // Q_p² decays like e^{-2|x|}, so the tail beyond |x| = 40 is negligible.
    let half = 40.0;
    let mut n = 512usize;
    let mut prev = f64::NAN;
    loop {
        let h = 2.0 * half / n as f64;
        let sum: f64 = (0..n)
            .map(|i| {
                let x = -half + i as f64 * h;
                ground_state_value(p, x).powi(2)
            })
            .sum();
        let m = h * sum;
        if (m - prev).abs() <= 1e-10 * m.abs() {
            return Ok(m);
        }
        if n > 1 << 22 {
            return Err(Error::Consistency(format!(
                "ground-state mass quadrature did not stabilise for p = {p}"
            )));
        }
        prev = m;
        n *= 2;
    }
}

/// `A exp(-(x-c)²/w²)`, periodised about `c`.
pub fn gaussian(amplitude: f64, width: f64, center: f64, grid: &GridSpec) -> Field {
    Field::from_fn_real(*grid, |x| {
        let d = grid.wrap_about(x, center) - center;
        amplitude * (-(d / width).powi(2)).exp()
    })
}

/// Complex Gaussian datum for Schrödinger runs.
pub fn gaussian_complex(amplitude: f64, width: f64, center: f64, grid: &GridSpec) -> Field {
    let g = gaussian(amplitude, width, center, grid);
    Field::new(*grid, g.into_values(), false).expect("same grid")
}

/// Constants of the carrier ansatz for frequency `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnsatzScales {
    pub n: f64,
    /// `(8/5)^(1/4) n^(-1/4)`
    pub amplitude: f64,
    /// `3^(1/2) n^(1/2)`: one envelope unit spans this many x units.
    pub dilation: f64,
}

impl AnsatzScales {
    pub fn new(n: f64) -> Self {
        AnsatzScales {
            n,
            amplitude: (8.0 / 5.0_f64).powf(0.25) * n.powf(-0.25),
            dilation: 3.0_f64.sqrt() * n.sqrt(),
        }
    }

    /// Envelope coordinate of the lab point `x` at time `t`.
    pub fn envelope_coord(&self, x: f64, t: f64) -> f64 {
        (x + 3.0 * self.n * self.n * t) / self.dilation
    }
}

/// Largest |k| carried by `f` above the bandwidth threshold.
pub fn bandwidth(f: &Field) -> f64 {
    let c = f.spectrum();
    let peak = c.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
    if peak == 0.0 {
        return 0.0;
    }
    c.iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > BANDWIDTH_THRESHOLD * peak)
        .map(|(i, _)| f.grid().wavenumber(i).abs())
        .fold(0.0, f64::max)
}

/// Carrier resolution check: quintic harmonics `5N + B` must stay below 2/3 of the output Nyquist.
pub fn check_carrier_bound(n: f64, envelope_bandwidth: f64, grid_out: &GridSpec) -> Result<()> {
    let scales = AnsatzScales::new(n);
    let need = 5.0 * n + envelope_bandwidth / scales.dilation;
    let limit = 2.0 / 3.0 * grid_out.nyquist_wavenumber();
    if need > limit {
        return Err(Error::Resolution(format!(
            "carrier bound violated: 5N + B = {need:.4} exceeds 2/3 of the output Nyquist ({limit:.4})"
        )));
    }
    Ok(())
}

/// Samples of `w(x) = f((x + 3N²t) / (√3 N^(1/2)))` on `grid_out`, with `f`
/// extended by zero outside its principal cell.
///
/// When the output spacing maps onto a power-of-two refinement of the envelope
/// grid, a single zero-padded inverse transform supplies every sample.
pub fn dilated_envelope(f: &Field, n: f64, t: f64, grid_out: &GridSpec) -> Result<Vec<C64>> {
    let sc = AnsatzScales::new(n);
    let g = f.grid();
    let dx = grid_out.dx();
    let m_exact = sc.dilation * g.domain_length() / dx;
    let m = m_exact.round();
    let mut out = vec![C64::new(0.0, 0.0); grid_out.num_points()];
    let peak = f.max_abs();
    if peak == 0.0 {
        return Ok(out);
    }
    let mut dropped: f64 = 0.0;
    let m_usize = m as usize;
    if (m_exact - m).abs() <= 1e-9 * m_exact
        && m_usize.is_power_of_two()
        && m_usize >= g.num_points()
    {
        // fine envelope index i sits at x = D o + i dx - 3N²t; output j at o_out + j dx
        let phi = (grid_out.origin() + 3.0 * n * n * t - sc.dilation * g.origin()) / dx;
        let k = phi.floor();
        let frac = phi - k;
        let dy = g.domain_length() / m;
        let fine = spectral::resample_uniform(f, g.origin() + frac * dy, m_usize)?;
        let k = k as i64;
        let p = grid_out.num_points() as i64;
        for (i, v) in fine.iter().enumerate() {
            let j = i as i64 - k;
            if (0..p).contains(&j) {
                out[j as usize] = *v;
            } else {
                dropped = dropped.max(v.norm());
            }
        }
        // an index shift by `k` can only be exact if the fractional offset also matches
        debug_assert!(frac >= 0.0 && frac < 1.0);
    } else {
        let lo = g.origin();
        let hi = lo + g.domain_length();
        let mut idx = Vec::new();
        let mut pts = Vec::new();
        for j in 0..grid_out.num_points() {
            let y = sc.envelope_coord(grid_out.x(j), t);
            if y >= lo && y < hi {
                idx.push(j);
                pts.push(y);
            }
        }
        let vals = spectral::interpolate_at(f, &pts);
        for (j, v) in idx.into_iter().zip(vals) {
            out[j] = v;
        }
        // principal-cell samples that fall outside the output window
        let x_lo = sc.dilation * lo - 3.0 * n * n * t;
        let x_hi = sc.dilation * hi - 3.0 * n * n * t;
        let o_lo = grid_out.origin();
        let o_hi = o_lo + grid_out.domain_length();
        if x_lo < o_lo || x_hi > o_hi {
            for (i, v) in f.values().iter().enumerate() {
                let x = sc.dilation * g.x(i) - 3.0 * n * n * t;
                if x < o_lo || x >= o_hi {
                    dropped = dropped.max(v.norm());
                }
            }
        }
    }
    if dropped > 1e-10 * peak {
        return Err(Error::Resolution(format!(
            "dilated envelope leaves the output window (lost amplitude {:.2e} of peak)",
            dropped / peak
        )));
    }
    Ok(out)
}

/// `u_N(t, x) = (8/5)^(1/4) N^(-1/4) Re[e^{iNx} e^{iN³t} u(t, (x + 3N²t) / (√3 N^(1/2)))]`.
pub fn embedding_ansatz(u_nls: &Field, n: f64, t: f64, grid_out: &GridSpec) -> Result<Field> {
    if u_nls.is_real() {
        return Err(Error::Model(
            "the ansatz envelope must be a complex field".into(),
        ));
    }
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::Domain(format!(
            "carrier frequency must be > 0, got {n}"
        )));
    }
    check_carrier_bound(n, bandwidth(u_nls), grid_out)?;
    let w = dilated_envelope(u_nls, n, t, grid_out)?;
    Ok(modulate(&w, n, t, grid_out))
}

/// `A Re[e^{i(Nx + N³t)} w]` on `grid_out`.
pub(crate) fn modulate(w: &[C64], n: f64, t: f64, grid_out: &GridSpec) -> Field {
    let sc = AnsatzScales::new(n);
    let phase_t = n * n * n * t;
    let vals = w
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let carrier = C64::from_polar(1.0, n * grid_out.x(j) + phase_t);
            C64::new(sc.amplitude * (carrier * v).re, 0.0)
        })
        .collect();
    Field::new(*grid_out, vals, true).expect("length matches grid")
}

/// `M(u) (8/5)^(1/2) N^(-1/2) · √3 N^(1/2) / 2 = √(6/5) M(u)`: the limit of the ansatz mass.
pub fn ansatz_mass_limit(nls_mass: f64) -> f64 {
    (6.0_f64 / 5.0).sqrt() * nls_mass
}

/// Mass `A² w √(π/2)` of [`gaussian`].
pub fn gaussian_mass(amplitude: f64, width: f64) -> f64 {
    amplitude * amplitude * width * (PI / 2.0).sqrt()
}
