use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{self, Field, GridSpec, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gkdv,
    Nls,
    Airy,
    FreeSchrodinger,
}

/// Which way the Schrödinger equation is written.
///
/// `Printed`: `-i u_t + u_xx = mu |u|^(p-1) u`.
/// `Conventional`: `i u_t + u_xx = mu |u|^(p-1) u`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlsSign {
    #[default]
    Printed,
    Conventional,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub nls_sign: NlsSign,
}

fn default_p() -> f64 {
    5.0
}

impl ModelSpec {
    pub fn new(family: Family, p: f64, mu: f64) -> Result<Self> {
        ModelSpec {
            family,
            p,
            mu,
            nls_sign: NlsSign::Printed,
        }
        .validated()
    }

    pub fn gkdv(p: f64, mu: f64) -> Result<Self> {
        Self::new(Family::Gkdv, p, mu)
    }

    pub fn nls(p: f64, mu: f64) -> Result<Self> {
        Self::new(Family::Nls, p, mu)
    }

    pub fn airy() -> Self {
        ModelSpec {
            family: Family::Airy,
            p: 5.0,
            mu: 0.0,
            nls_sign: NlsSign::Printed,
        }
    }

    pub fn free_schrodinger() -> Self {
        ModelSpec {
            family: Family::FreeSchrodinger,
            p: 5.0,
            mu: 0.0,
            nls_sign: NlsSign::Printed,
        }
    }

    pub fn with_nls_sign(mut self, sign: NlsSign) -> Self {
        self.nls_sign = sign;
        self
    }

    /// Check the invariants; linear families get `mu = 0`.
    pub fn validated(mut self) -> Result<Self> {
        if !(self.p.is_finite() && self.p > 1.0) {
            return Err(Error::Config(format!(
                "model.p must be > 1, got {}",
                self.p
            )));
        }
        if ![-1.0, 0.0, 1.0].contains(&self.mu) {
            return Err(Error::Config(format!(
                "model.mu must be one of -1, 0, 1, got {}",
                self.mu
            )));
        }
        if self.is_linear() {
            self.mu = 0.0;
        }
        Ok(self)
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.family, Family::Airy | Family::FreeSchrodinger)
    }

    /// gKdV and Airy evolve real fields.
    pub fn is_real(&self) -> bool {
        matches!(self.family, Family::Gkdv | Family::Airy)
    }

    pub fn is_kdv_type(&self) -> bool {
        self.is_real()
    }

    /// Symbol of the linear part: `d/dt c_k = linear_symbol(k) c_k + ...`.
    pub fn linear_symbol(&self, k: f64) -> C64 {
        match self.family {
            // u_t = -u_xxx
            Family::Gkdv | Family::Airy => C64::new(0.0, k * k * k),
            Family::Nls | Family::FreeSchrodinger => match self.nls_sign {
                // u_t = -i u_xx + i mu f
                NlsSign::Printed => C64::new(0.0, k * k),
                // u_t = i u_xx - i mu f
                NlsSign::Conventional => C64::new(0.0, -k * k),
            },
        }
    }

    pub(crate) fn check_field(&self, f: &Field) -> Result<()> {
        if f.is_real() != self.is_real() {
            return Err(Error::Model(format!(
                "{:?} requires a {} field",
                self.family,
                if self.is_real() { "real" } else { "complex" }
            )));
        }
        Ok(())
    }

    /// Nonlinear part of the time derivative, on normalised coefficients.
    pub(crate) fn nonlinear_coeffs(&self, grid: &GridSpec, coeffs: &[C64]) -> Vec<C64> {
        let n = coeffs.len();
        if self.mu == 0.0 {
            return vec![C64::new(0.0, 0.0); n];
        }
        let mut out = spectral::power_coeffs(coeffs, self.p, self.is_real());
        let factor = match (self.family, self.nls_sign) {
            (Family::Nls, NlsSign::Printed) => C64::new(0.0, self.mu),
            (Family::Nls, NlsSign::Conventional) => C64::new(0.0, -self.mu),
            _ => C64::new(self.mu, 0.0),
        };
        for (i, c) in out.iter_mut().enumerate() {
            *c *= factor;
            if self.is_kdv_type() {
                *c *= C64::new(0.0, grid.wavenumber(i));
            }
        }
        out[n / 2] = C64::new(0.0, 0.0);
        out
    }

    /// Largest nonlinear frequency for data of sup-norm `amp` on `grid`.
    pub fn nonlinear_frequency(&self, amp: f64, grid: &GridSpec) -> f64 {
        if self.mu == 0.0 {
            return 0.0;
        }
        let base = self.mu.abs() * self.p * amp.powf(self.p - 1.0);
        if self.is_kdv_type() {
            base * grid.max_wavenumber()
        } else {
            base
        }
    }

    /// Group speed of the fastest resolved waves of `f`; used for wrap-time estimates.
    pub fn max_group_speed(&self, xi: f64) -> f64 {
        if self.is_kdv_type() {
            3.0 * xi * xi
        } else {
            2.0 * xi.abs()
        }
    }
}

/// Nonlinear part of the evolution as a field.
///
/// gKdV: `mu d/dx(|u|^(p-1) u)`; NLS: the `mu` term of `u_t`; linear families: zero.
pub fn rhs_nonlinear(state: &Field, model: &ModelSpec) -> Result<Field> {
    model.check_field(state)?;
    let coeffs = model.nonlinear_coeffs(state.grid(), &state.spectrum());
    Field::from_spectrum(*state.grid(), &coeffs, state.is_real())
}

/// Full time derivative `u_t` (linear plus nonlinear part).
pub fn full_rhs(state: &Field, model: &ModelSpec) -> Result<Field> {
    model.check_field(state)?;
    let grid = *state.grid();
    let mut coeffs = model.nonlinear_coeffs(&grid, &state.spectrum());
    let lin = state.spectrum();
    for (i, c) in coeffs.iter_mut().enumerate() {
        if i != grid.nyquist_index() {
            *c += model.linear_symbol(grid.wavenumber(i)) * lin[i];
        }
    }
    Field::from_spectrum(grid, &coeffs, state.is_real())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn validation() {
        assert!(ModelSpec::gkdv(0.5, 1.0).is_err());
        assert!(ModelSpec::gkdv(3.0, 2.0).is_err());
        let airy = ModelSpec {
            family: Family::Airy,
            p: 3.0,
            mu: 1.0,
            nls_sign: NlsSign::Printed,
        }
        .validated()
        .unwrap();
        assert_eq!(airy.mu, 0.0);
    }

    #[test]
    fn zero_state_has_zero_rhs() {
        let g = GridSpec::centered(32, 10.0).unwrap();
        for m in [ModelSpec::gkdv(5.0, 1.0).unwrap(), ModelSpec::airy()] {
            assert_eq!(
                rhs_nonlinear(&Field::zeros(g, true), &m).unwrap().max_abs(),
                0.0
            );
        }
        for m in [
            ModelSpec::nls(5.0, -1.0).unwrap(),
            ModelSpec::free_schrodinger(),
        ] {
            assert_eq!(
                rhs_nonlinear(&Field::zeros(g, false), &m)
                    .unwrap()
                    .max_abs(),
                0.0
            );
        }
    }

    #[test]
    fn realness_mismatch_is_rejected() {
        let g = GridSpec::centered(32, 10.0).unwrap();
        let m = ModelSpec::gkdv(3.0, 1.0).unwrap();
        assert!(matches!(
            rhs_nonlinear(&Field::zeros(g, false), &m),
            Err(Error::Model(_))
        ));
    }

    #[test]
    fn gkdv_constant_state() {
        let g = GridSpec::centered(32, 10.0).unwrap();
        let m = ModelSpec::gkdv(3.0, 1.0).unwrap();
        let f = Field::from_fn_real(g, |_| 1.7);
        assert!(rhs_nonlinear(&f, &m).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn gkdv_cubic_of_cosine() {
        // d/dx cos³(kx) = -(3k/4) sin(kx) - (3k/4) sin(3kx)
        let l = 2.0 * PI;
        let g = GridSpec::new(64, l, 0.0).unwrap();
        let k = 4.0;
        let m = ModelSpec::gkdv(3.0, 1.0).unwrap();
        let f = Field::from_fn_real(g, |x| (k * x).cos());
        let r = rhs_nonlinear(&f, &m).unwrap();
        for (i, v) in r.values().iter().enumerate() {
            let x = g.x(i);
            let exact = -0.75 * k * (k * x).sin() - 0.75 * k * (3.0 * k * x).sin();
            assert!((v.re - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn nls_full_rhs_on_plane_wave() {
        // u = a e^{ikx}: printed form gives u_t = i(mu a^4 + k^2) u
        let l = 2.0 * PI;
        let g = GridSpec::new(32, l, 0.0).unwrap();
        let (a, k) = (0.7, 3.0);
        let f = Field::from_fn_complex(g, |x| C64::from_polar(a, k * x));
        let m = ModelSpec::nls(5.0, 1.0).unwrap();
        let r = full_rhs(&f, &m).unwrap();
        for (v, u) in r.values().iter().zip(f.values()) {
            let expect = C64::new(0.0, a.powi(4) + k * k) * u;
            assert!((v - expect).norm() < 1e-12);
        }
        let mc = m.with_nls_sign(NlsSign::Conventional);
        let rc = full_rhs(&f, &mc).unwrap();
        for (v, u) in rc.values().iter().zip(f.values()) {
            let expect = C64::new(0.0, -(a.powi(4) + k * k)) * u;
            assert!((v - expect).norm() < 1e-12);
        }
    }
}
