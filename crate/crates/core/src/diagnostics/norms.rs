use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::spectral::{fractional_derivative, Field};

/// Which integral is taken last.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outer {
    Time,
    Space,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    LqtLrx,
    LrxLqt,
}

#[derive(Clone, Debug, Serialize)]
pub struct NormReport {
    pub norm_kind: NormKind,
    /// Time exponent.
    pub q: f64,
    /// Space exponent.
    pub r: f64,
    pub frac_order: f64,
    pub value: f64,
    /// Same norm from every other time sample and every other grid point.
    pub coarse_value: f64,
    pub num_times: usize,
    pub num_points: usize,
    pub sample_dt: f64,
}

/// Trapezoid in time (or max), rectangle sum in space (or max).
struct Acc {
    stride: usize,
    per_x: Vec<f64>,
    first_x: Vec<f64>,
    last_x: Vec<f64>,
    sum: f64,
    first: f64,
    last: f64,
    count: usize,
}

impl Acc {
    fn new(stride: usize) -> Self {
        Acc {
            stride,
            per_x: Vec::new(),
            first_x: Vec::new(),
            last_x: Vec::new(),
            sum: 0.0,
            first: 0.0,
            last: 0.0,
            count: 0,
        }
    }
}

fn pow_or_max(v: f64, e: f64) -> f64 {
    if e.is_infinite() {
        v
    } else {
        v.powf(e)
    }
}

fn root(v: f64, e: f64) -> f64 {
    if e.is_infinite() {
        v
    } else {
        v.powf(1.0 / e)
    }
}

/// Streaming mixed-norm evaluation over uniformly spaced samples.
pub struct MixedNormAccumulator {
    outer: Outer,
    q: f64,
    r: f64,
    alpha: f64,
    sample_dt: f64,
    fine: Acc,
    coarse: Acc,
    seen: usize,
    dx: f64,
    num_points: usize,
}

impl MixedNormAccumulator {
    pub fn new(outer: Outer, q: f64, r: f64, frac_order: f64, sample_dt: f64) -> Result<Self> {
        for (name, v) in [("q", q), ("r", r)] {
            if !(v >= 1.0) {
                return Err(Error::Domain(format!(
                    "norm exponent {name} must lie in [1, inf], got {v}"
                )));
            }
        }
        if !(frac_order >= 0.0) {
            return Err(Error::Domain(format!(
                "fractional order must be >= 0, got {frac_order}"
            )));
        }
        Ok(MixedNormAccumulator {
            outer,
            q,
            r,
            alpha: frac_order,
            sample_dt,
            fine: Acc::new(1),
            coarse: Acc::new(2),
            seen: 0,
            dx: 0.0,
            num_points: 0,
        })
    }

    pub fn push(&mut self, f: &Field) -> Result<()> {
        let data = if self.alpha > 0.0 {
            fractional_derivative(f, self.alpha)?
        } else {
            f.clone()
        };
        let abs: Vec<f64> = data.values().iter().map(|v| v.norm()).collect();
        if self.seen == 0 {
            self.dx = f.grid().dx();
            self.num_points = abs.len();
        } else if abs.len() != self.num_points {
            return Err(Error::Config(
                "mixed norm samples use different grids".into(),
            ));
        }
        let idx = self.seen;
        self.seen += 1;
        let (outer, q, r, dx) = (self.outer, self.q, self.r, self.dx);
        Self::feed(&mut self.fine, &abs, outer, q, r, dx);
        if idx % 2 == 0 {
            Self::feed(&mut self.coarse, &abs, outer, q, r, dx);
        }
        Ok(())
    }

    fn feed(acc: &mut Acc, abs: &[f64], outer: Outer, q: f64, r: f64, dx: f64) {
        let s = acc.stride;
        match outer {
            Outer::Time => {
                let inner = if r.is_infinite() {
                    abs.iter().step_by(s).cloned().fold(0.0, f64::max)
                } else {
                    (s as f64 * dx * abs.iter().step_by(s).map(|v| v.powf(r)).sum::<f64>())
                        .powf(1.0 / r)
                };
                let c = pow_or_max(inner, q);
                if q.is_infinite() {
                    acc.sum = acc.sum.max(c);
                } else {
                    acc.sum += c;
                }
                if acc.count == 0 {
                    acc.first = c;
                }
                acc.last = c;
            }
            Outer::Space => {
                let vals: Vec<f64> = abs.iter().step_by(s).map(|v| pow_or_max(*v, q)).collect();
                if acc.count == 0 {
                    acc.per_x = vec![0.0; vals.len()];
                    acc.first_x = vals.clone();
                }
                for (a, v) in acc.per_x.iter_mut().zip(&vals) {
                    if q.is_infinite() {
                        *a = a.max(*v);
                    } else {
                        *a += v;
                    }
                }
                acc.last_x = vals;
            }
        }
        acc.count += 1;
    }

    fn value(&self, acc: &Acc, step: f64) -> f64 {
        let (q, r) = (self.q, self.r);
        match self.outer {
            Outer::Time => {
                if q.is_infinite() {
                    return acc.sum;
                }
                if acc.count < 2 {
                    return 0.0;
                }
                root(step * (acc.sum - 0.5 * (acc.first + acc.last)), q)
            }
            Outer::Space => {
                let inner: Vec<f64> = if q.is_infinite() {
                    acc.per_x.clone()
                } else if acc.count < 2 {
                    vec![0.0; acc.per_x.len()]
                } else {
                    acc.per_x
                        .iter()
                        .zip(&acc.first_x)
                        .zip(&acc.last_x)
                        .map(|((s, f), l)| root((step * (s - 0.5 * (f + l))).max(0.0), q))
                        .collect()
                };
                if r.is_infinite() {
                    inner.into_iter().fold(0.0, f64::max)
                } else {
                    let dx = acc.stride as f64 * self.dx;
                    (dx * inner.iter().map(|v| v.powf(r)).sum::<f64>()).powf(1.0 / r)
                }
            }
        }
    }

    pub fn finish(&self) -> NormReport {
        NormReport {
            norm_kind: match self.outer {
                Outer::Time => NormKind::LqtLrx,
                Outer::Space => NormKind::LrxLqt,
            },
            q: self.q,
            r: self.r,
            frac_order: self.alpha,
            value: self.value(&self.fine, self.sample_dt),
            coarse_value: self.value(&self.coarse, 2.0 * self.sample_dt),
            num_times: self.seen,
            num_points: self.num_points,
            sample_dt: self.sample_dt,
        }
    }
}

/// `‖|∇|^frac_order u‖` in `L^q_t L^r_x` (outer time) or `L^r_x L^q_t` (outer space).
pub fn mixed_norm(
    traj: &Trajectory,
    outer: Outer,
    q: f64,
    r: f64,
    frac_order: f64,
) -> Result<NormReport> {
    let mut acc = MixedNormAccumulator::new(outer, q, r, frac_order, traj.sample_dt)?;
    for f in traj.fields() {
        acc.push(f)?;
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::ModelSpec;
    use crate::spectral::GridSpec;

    fn constant_traj(c: f64, n_t: usize, dt: f64) -> Trajectory {
        let g = GridSpec::centered(64, 5.0).unwrap();
        let f = Field::from_fn_real(g, |_| c);
        let snaps = (0..n_t).map(|i| (i as f64 * dt, f.clone())).collect();
        Trajectory::new(ModelSpec::airy(), snaps, dt).unwrap()
    }

    #[test]
    fn constant_field_l6() {
        let (c, t) = (0.7, 2.0);
        let traj = constant_traj(c, 21, 0.1);
        let exact = (t * 5.0 * c.powi(6)).powf(1.0 / 6.0);
        for outer in [Outer::Time, Outer::Space] {
            let rep = mixed_norm(&traj, outer, 6.0, 6.0, 0.0).unwrap();
            assert!((rep.value - exact).abs() < 1e-12 * exact);
            assert!((rep.coarse_value - exact).abs() < 1e-12 * exact);
        }
    }

    #[test]
    fn infinite_exponents_take_maxima() {
        let traj = constant_traj(0.3, 5, 0.1);
        let rep = mixed_norm(&traj, Outer::Space, f64::INFINITY, f64::INFINITY, 0.0).unwrap();
        assert!((rep.value - 0.3).abs() < 1e-15);
        assert!(mixed_norm(&traj, Outer::Time, 0.5, 2.0, 0.0).is_err());
    }
}
