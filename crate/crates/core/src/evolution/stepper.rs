//! Exponential integrators for `v' = L v + N(v, t)` in Fourier space.
//!
//! The diagonal linear part is integrated exactly. ETDRK4 is the Cox–Matthews
//! scheme; the φ-functions use a Taylor series below `PHI_SERIES_RADIUS` to
//! avoid the cancellation in `(e^z - 1 - z - ...)/z^k` near `z = 0`. IFRK4 is
//! classical RK4 in the interaction picture.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::C64;

/// Below this |z| the φ-functions are summed as power series.
pub const PHI_SERIES_RADIUS: f64 = 1.0;
const PHI_SERIES_TERMS: usize = 24;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Etdrk4,
    Ifrk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_safety")]
    pub substep_safety: f64,
}

fn default_safety() -> f64 {
    3.0
}

impl StepperConfig {
    pub fn new(dt: f64) -> Self {
        StepperConfig {
            dt,
            scheme: Scheme::Etdrk4,
            substep_safety: default_safety(),
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!(
                "stepper.dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.substep_safety.is_finite() && self.substep_safety > 0.0) {
            return Err(Error::Config(format!(
                "stepper.substep_safety must be positive, got {}",
                self.substep_safety
            )));
        }
        Ok(())
    }

    /// Number of substeps and their length covering `interval`.
    pub fn substeps(&self, interval: f64) -> (usize, f64) {
        let n = ((interval.abs() / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        (n, interval / n as f64)
    }
}

/// `[φ1(z), φ2(z), φ3(z)]` with `φ_k(z) = Σ_n z^n / (n+k)!`.
pub fn phi_functions(z: C64) -> [C64; 3] {
    if z.norm() < PHI_SERIES_RADIUS {
        let mut out = [C64::new(0.0, 0.0); 3];
        for (k, o) in out.iter_mut().enumerate() {
            let mut term = C64::new(1.0, 0.0);
            for j in 1..=(k + 1) {
                term /= j as f64;
            }
            let mut sum = term;
            for n in 1..PHI_SERIES_TERMS {
                term = term * z / (n + k + 1) as f64;
                sum += term;
            }
            *o = sum;
        }
        out
    } else {
        let ez = z.exp();
        let p1 = (ez - 1.0) / z;
        let p2 = (ez - 1.0 - z) / (z * z);
        let p3 = (ez - 1.0 - z - 0.5 * z * z) / (z * z * z);
        [p1, p2, p3]
    }
}

/// Per-mode coefficients for a fixed step `h`.
pub(crate) struct Integrator {
    scheme: Scheme,
    h: f64,
    e: Vec<C64>,
    e2: Vec<C64>,
    q: Vec<C64>,
    f1: Vec<C64>,
    f2: Vec<C64>,
    f3: Vec<C64>,
}

impl Integrator {
    pub(crate) fn new(symbol: &[C64], h: f64, scheme: Scheme) -> Self {
        let n = symbol.len();
        let mut it = Integrator {
            scheme,
            h,
            e: Vec::with_capacity(n),
            e2: Vec::with_capacity(n),
            q: Vec::new(),
            f1: Vec::new(),
            f2: Vec::new(),
            f3: Vec::new(),
        };
        for &l in symbol {
            let z = l * h;
            it.e.push(z.exp());
            it.e2.push((0.5 * z).exp());
            if scheme == Scheme::Etdrk4 {
                let [a1, _, _] = phi_functions(0.5 * z);
                let [p1, p2, p3] = phi_functions(z);
                it.q.push(0.5 * h * a1);
                it.f1.push(h * (p1 - 3.0 * p2 + 4.0 * p3));
                it.f2.push(h * (p2 - 2.0 * p3));
                it.f3.push(h * (-p2 + 4.0 * p3));
            }
        }
        it
    }

    /// Advance `v` from `t` to `t + h`.
    pub(crate) fn step<F>(&self, v: &mut [C64], t: f64, nonlin: &mut F) -> Result<()>
    where
        F: FnMut(&[C64], f64) -> Result<Vec<C64>>,
    {
        let h = self.h;
        let n = v.len();
        match self.scheme {
            Scheme::Etdrk4 => {
                let nv = nonlin(v, t)?;
                let a: Vec<C64> = (0..n)
                    .map(|i| self.e2[i] * v[i] + self.q[i] * nv[i])
                    .collect();
                let na = nonlin(&a, t + 0.5 * h)?;
                let b: Vec<C64> = (0..n)
                    .map(|i| self.e2[i] * v[i] + self.q[i] * na[i])
                    .collect();
                let nb = nonlin(&b, t + 0.5 * h)?;
                let c: Vec<C64> = (0..n)
                    .map(|i| self.e2[i] * a[i] + self.q[i] * (2.0 * nb[i] - nv[i]))
                    .collect();
                let nc = nonlin(&c, t + h)?;
                for i in 0..n {
                    v[i] = self.e[i] * v[i]
                        + self.f1[i] * nv[i]
                        + 2.0 * self.f2[i] * (na[i] + nb[i])
                        + self.f3[i] * nc[i];
                }
            }
            Scheme::Ifrk4 => {
                let k1 = nonlin(v, t)?;
                let a: Vec<C64> = (0..n)
                    .map(|i| self.e2[i] * (v[i] + 0.5 * h * k1[i]))
                    .collect();
                let k2 = nonlin(&a, t + 0.5 * h)?;
                let b: Vec<C64> = (0..n)
                    .map(|i| self.e2[i] * v[i] + 0.5 * h * k2[i])
                    .collect();
                let k3 = nonlin(&b, t + 0.5 * h)?;
                let c: Vec<C64> = (0..n)
                    .map(|i| self.e[i] * v[i] + h * self.e2[i] * k3[i])
                    .collect();
                let k4 = nonlin(&c, t + h)?;
                for i in 0..n {
                    v[i] = self.e[i] * v[i]
                        + h / 6.0
                            * (self.e[i] * k1[i] + 2.0 * self.e2[i] * (k2[i] + k3[i]) + k4[i]);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi_closed(z: C64) -> [C64; 3] {
        let ez = z.exp();
        [
            (ez - 1.0) / z,
            (ez - 1.0 - z) / (z * z),
            (ez - 1.0 - z - 0.5 * z * z) / (z * z * z),
        ]
    }

    #[test]
    fn phi_limits_at_zero() {
        let [a, b, c] = phi_functions(C64::new(0.0, 0.0));
        assert!((a - 1.0).norm() < 1e-16);
        assert!((b - 0.5).norm() < 1e-16);
        assert!((c - 1.0 / 6.0).norm() < 1e-16);
    }

    #[test]
    fn series_and_closed_form_agree_at_threshold() {
        for z in [
            C64::new(0.0, 0.999),
            C64::new(0.0, -1.0),
            C64::new(-0.7, 0.7),
        ] {
            let s = phi_functions(z);
            let c = phi_closed(z);
            for k in 0..3 {
                assert!((s[k] - c[k]).norm() < 1e-13, "{z} {k}");
            }
        }
    }

    #[test]
    fn substeps_cover_interval() {
        let s = StepperConfig::new(0.03);
        let (n, h) = s.substeps(0.1);
        assert_eq!(n, 4);
        assert!((h - 0.025).abs() < 1e-15);
        let (n, h) = s.substeps(-0.06);
        assert_eq!(n, 2);
        assert!((h + 0.03).abs() < 1e-15);
    }

    #[test]
    fn scalar_linear_forcing_is_exact() {
        // v' = i w v + 1 has v(h) = φ1(i w h) h for v(0) = 0; ETDRK4 is exact for constant forcing.
        for scheme in [Scheme::Etdrk4] {
            let w = 37.0;
            let h = 0.1;
            let it = Integrator::new(&[C64::new(0.0, w)], h, scheme);
            let mut v = vec![C64::new(0.0, 0.0)];
            it.step(&mut v, 0.0, &mut |_, _| Ok(vec![C64::new(1.0, 0.0)]))
                .unwrap();
            let exact = (C64::new(0.0, w * h).exp() - 1.0) / C64::new(0.0, w);
            assert!((v[0] - exact).norm() < 1e-14);
        }
    }

    #[test]
    fn fourth_order_on_scalar_ode() {
        // v' = i v + v^2 - style nonlinearity: compare with tiny step reference
        let sym = [C64::new(0.0, 2.0)];
        let run = |h: f64, scheme: Scheme| {
            let it = Integrator::new(&sym, h, scheme);
            let mut v = vec![C64::new(0.3, 0.1)];
            let n = (1.0 / h).round() as usize;
            for s in 0..n {
                it.step(&mut v, s as f64 * h, &mut |x, _| {
                    Ok(vec![-x[0] * x[0] * x[0]])
                })
                .unwrap();
            }
            v[0]
        };
        for scheme in [Scheme::Etdrk4, Scheme::Ifrk4] {
            let r = run(1e-4, scheme);
            let e1 = (run(0.1, scheme) - r).norm();
            let e2 = (run(0.05, scheme) - r).norm();
            let ratio = e1 / e2;
            assert!(ratio > 12.0 && ratio < 20.0, "{scheme:?}: {ratio}");
        }
    }
}
