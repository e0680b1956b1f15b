use std::f64::consts::PI;

use serde::Serialize;

use super::{density_fields, energy_scale, KVariant};
use crate::error::{Error, Result};
use crate::evolution::{ModelSpec, Trajectory};
use crate::spectral::{self, Field, GridSpec};

/// Relative size below which the energy is treated as zero.
pub const ENERGY_UNDEFINED_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CentreRecord {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    #[serde(rename = "xM")]
    pub x_m: f64,
    /// NaN when the energy vanishes.
    #[serde(rename = "xE")]
    pub x_e: f64,
    #[serde(rename = "vM")]
    pub v_m: f64,
    #[serde(rename = "vE")]
    pub v_e: f64,
    pub gap: f64,
    pub tail_mass: f64,
}

/// Mass-weighted circular mean of a non-negative density on the torus.
pub fn circular_mean(grid: &GridSpec, weights: &[f64]) -> f64 {
    let l = grid.domain_length();
    let (mut s, mut c) = (0.0, 0.0);
    for (i, w) in weights.iter().enumerate() {
        let th = 2.0 * PI * (grid.x(i) - grid.origin()) / l;
        s += w * th.sin();
        c += w * th.cos();
    }
    if s == 0.0 && c == 0.0 {
        return grid.midpoint();
    }
    let th = s.atan2(c).rem_euclid(2.0 * PI);
    grid.origin() + th * l / (2.0 * PI)
}

/// Fraction of `rho` outside the central half of the chart centred at `centre`.
pub fn tail_mass(grid: &GridSpec, rho: &[f64], centre: f64) -> f64 {
    let total: f64 = rho.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let quarter = 0.25 * grid.domain_length();
    let outside: f64 = rho
        .iter()
        .enumerate()
        .filter(|(i, _)| (grid.wrap_about(grid.x(*i), centre) - centre).abs() > quarter)
        .map(|(_, r)| r)
        .sum();
    outside / total
}

fn real_values(f: &Field) -> Vec<f64> {
    f.real_values()
}

/// Centres of mass and energy with their velocities from the current integrals.
///
/// Coordinates are measured in the chart centred on the circular mean of `rho`
/// and unwrapped across snapshots, so a pulse crossing the seam keeps a
/// continuous track.
pub fn centres(traj: &Trajectory, variant: KVariant) -> Result<Vec<CentreRecord>> {
    let model = traj.model;
    if !model.is_kdv_type() {
        return Err(Error::Model(
            "centres are defined for gKdV-type runs".into(),
        ));
    }
    let grid = *traj.grid();
    let l = grid.domain_length();
    let mut out: Vec<CentreRecord> = Vec::with_capacity(traj.len());
    for (t, f) in &traj.snapshots {
        let mut rec = centre_record(*t, f, &model, variant)?;
        if let Some(prev) = out.last() {
            let shift = ((prev.x_m - rec.x_m) / l).round() * l;
            rec.x_m += shift;
            rec.x_e += shift;
        }
        out.push(rec);
    }
    Ok(out)
}

pub(crate) fn centre_record(
    t: f64,
    f: &Field,
    model: &ModelSpec,
    variant: KVariant,
) -> Result<CentreRecord> {
    let grid = *f.grid();
    let d = density_fields(f, model, variant)?;
    let rho = real_values(&d.rho);
    let e = real_values(&d.e);
    let mass = spectral::integrate_real(&grid, &rho);
    let energy = spectral::integrate_real(&grid, &e);
    let int_j = spectral::integrate(&d.j).re;
    let int_k = spectral::integrate(&d.k).re;
    let centre = circular_mean(&grid, &rho);
    let chart: Vec<f64> = (0..grid.num_points())
        .map(|i| grid.wrap_about(grid.x(i), centre))
        .collect();
    let moment =
        |w: &[f64]| -> f64 { grid.dx() * w.iter().zip(&chart).map(|(a, x)| a * x).sum::<f64>() };
    let x_m = if mass > 0.0 {
        moment(&rho) / mass
    } else {
        f64::NAN
    };
    let defined =
        energy.abs() > ENERGY_UNDEFINED_TOL * energy_scale(f, model)?.max(f64::MIN_POSITIVE);
    let (x_e, v_e) = if defined {
        (moment(&e) / energy, -int_k / energy)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(CentreRecord {
        t,
        mass,
        energy,
        x_m,
        x_e,
        v_m: if mass > 0.0 { -int_j / mass } else { f64::NAN },
        v_e,
        gap: mass * int_k - energy * int_j,
        tail_mass: tail_mass(&grid, &rho, centre),
    })
}

/// `|d xM/dt - vM|` at interior samples, with the derivative from five-point
/// centred differences of the recorded centres.
pub fn velocity_mismatch(records: &[CentreRecord], sample_dt: f64) -> Vec<(f64, f64)> {
    if records.len() < 5 {
        return Vec::new();
    }
    (2..records.len() - 2)
        .map(|i| {
            let x = |m: usize| records[m].x_m;
            let d = (-x(i + 2) + 8.0 * x(i + 1) - 8.0 * x(i - 1) + x(i - 2)) / (12.0 * sample_dt);
            (records[i].t, (d - records[i].v_m).abs())
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct DispersionReport {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `(T, sup over [0, T])` per window.
    pub window_sups: Vec<(f64, f64)>,
    /// Least-squares slope of `log sup` against `log T`; `None` with fewer than two windows.
    pub exponent: Option<f64>,
    pub max_tail_mass: f64,
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// `∫ |x - x(t)| (rho + e) dx` per snapshot and its running suprema over `[0, T]`.
///
/// Distances are taken on the torus. `x_of_t` defaults to the centre of mass.
pub fn dispersion_functional(
    traj: &Trajectory,
    x_of_t: Option<&dyn Fn(f64) -> f64>,
    windows: &[f64],
) -> Result<DispersionReport> {
    let t_last = traj.snapshots.last().map(|s| s.0).unwrap_or(0.0);
    let t_first = traj.snapshots[0].0;
    for &w in windows {
        if !(w > 0.0) || w > t_last - t_first + 1e-9 * traj.sample_dt {
            return Err(Error::Validity(format!(
                "dispersion window {w} is outside the sampled interval [{t_first}, {t_last}]"
            )));
        }
    }
    let model = traj.model;
    let grid = *traj.grid();
    let mut times = Vec::with_capacity(traj.len());
    let mut values = Vec::with_capacity(traj.len());
    let mut max_tail: f64 = 0.0;
    let records = if x_of_t.is_none() {
        Some(centres(traj, KVariant::Corrected)?)
    } else {
        None
    };
    for (idx, (t, f)) in traj.snapshots.iter().enumerate() {
        let d = density_fields(f, &model, KVariant::Corrected)?;
        let centre = match (&records, x_of_t) {
            (Some(r), _) => r[idx].x_m,
            (None, Some(g)) => g(*t),
            (None, None) => unreachable!(),
        };
        let rho = d.rho.real_values();
        max_tail = max_tail.max(tail_mass(&grid, &rho, circular_mean(&grid, &rho)));
        let v: f64 = grid.dx()
            * rho
                .iter()
                .zip(d.e.values())
                .enumerate()
                .map(|(i, (r, e))| (grid.wrap_about(grid.x(i), centre) - centre).abs() * (r + e.re))
                .sum::<f64>();
        times.push(*t);
        values.push(v);
    }
    let window_sups: Vec<(f64, f64)> = windows
        .iter()
        .map(|&w| {
            let sup = times
                .iter()
                .zip(&values)
                .filter(|(t, _)| **t - t_first <= w + 1e-9 * traj.sample_dt)
                .map(|(_, v)| *v)
                .fold(f64::NEG_INFINITY, f64::max);
            (w, sup)
        })
        .collect();
    let lx: Vec<f64> = window_sups.iter().map(|(w, _)| w.ln()).collect();
    let ly: Vec<f64> = window_sups.iter().map(|(_, s)| s.ln()).collect();
    Ok(DispersionReport {
        times,
        values,
        exponent: fit_slope(&lx, &ly),
        window_sups,
        max_tail_mass: max_tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::energy;
    use crate::evolution::{evolve, StepperConfig};
    use crate::profiles::{gaussian, ground_state};

    #[test]
    fn circular_mean_finds_offset_bump() {
        let g = GridSpec::new(256, 20.0, 0.0).unwrap();
        let f = gaussian(1.0, 0.7, 19.0, &g);
        let rho: Vec<f64> = f.real_values().iter().map(|u| u * u).collect();
        assert!((circular_mean(&g, &rho) - 19.0).abs() < 1e-8);
        assert!(tail_mass(&g, &rho, 19.0) < 1e-15);
    }

    #[test]
    fn soliton_centre_moves_right_at_unit_speed() {
        let g = GridSpec::centered(1024, 60.0).unwrap();
        let q = ground_state(3.0, &g).unwrap();
        let m = ModelSpec::gkdv(3.0, -1.0).unwrap();
        let traj = evolve(&q, &m, &StepperConfig::new(2e-3), 1.0, 0.1).unwrap();
        let recs = centres(&traj, KVariant::Corrected).unwrap();
        for r in &recs {
            assert!((r.x_m - recs[0].x_m - r.t).abs() < 1e-6);
            assert!((r.v_m - 1.0).abs() < 1e-6);
        }
        for (_, d) in velocity_mismatch(&recs, 0.1) {
            assert!(d < 1e-4);
        }
    }

    #[test]
    fn cubic_defocusing_centre_velocity() {
        let g = GridSpec::centered(512, 40.0).unwrap();
        let f = gaussian(0.9, 1.2, 0.0, &g);
        let m = ModelSpec::gkdv(3.0, 1.0).unwrap();
        let r = centre_record(0.0, &f, &m, KVariant::Corrected).unwrap();
        let e = energy(&f, &m).unwrap();
        assert!((r.v_m + 6.0 * e / r.mass).abs() < 1e-10 * r.v_m.abs());
        assert!(r.v_m < 0.0 && r.v_e < 0.0);
    }

    #[test]
    fn zero_energy_centre_is_undefined() {
        let g = GridSpec::centered(1024, 80.0).unwrap();
        let q = ground_state(5.0, &g).unwrap();
        let m = ModelSpec::gkdv(5.0, -1.0).unwrap();
        let r = centre_record(0.0, &q, &m, KVariant::Corrected).unwrap();
        assert!(r.x_e.is_nan() && r.v_e.is_nan());
        assert!(r.x_m.abs() < 1e-12);
    }

    #[test]
    fn dispersion_of_static_data_is_first_moment() {
        let g = GridSpec::centered(4096, 40.0).unwrap();
        let (a, w, p) = (0.6_f64, 1.5_f64, 5.0_f64);
        let f = gaussian(a, w, 0.0, &g);
        let m = ModelSpec::gkdv(p, 1.0).unwrap();
        let traj = Trajectory::new(m, vec![(0.0, f.clone()), (0.5, f.clone())], 0.5).unwrap();
        let rep = dispersion_functional(&traj, None, &[0.5]).unwrap();
        // closed-form Gaussian moments of |x| (u² + ½u_x² + u^(p+1)/(p+1))
        let exact =
            a * a * w * w / 2.0 + a * a / 2.0 + a.powf(p + 1.0) * w * w / ((p + 1.0) * (p + 1.0));
        assert!((rep.values[0] - exact).abs() < 1e-4 * exact);
        // the kink of |x| at a grid point undershoots by the Euler-Maclaurin term h²/6 g(0)
        let g0 = a * a + a.powf(p + 1.0) / (p + 1.0);
        let predicted = exact - g.dx().powi(2) / 6.0 * g0;
        assert!((rep.values[0] - predicted).abs() < 1e-9 * exact);
        assert!(dispersion_functional(&traj, None, &[2.0]).is_err());
    }

    #[test]
    fn fit_slope_of_power_law() {
        let xs: Vec<f64> = [1.0_f64, 2.0, 4.0].iter().map(|x| x.ln()).collect();
        let ys: Vec<f64> = [1.0_f64, 2.0, 4.0]
            .iter()
            .map(|x| (3.0 * x.powf(0.7)).ln())
            .collect();
        assert!((fit_slope(&xs, &ys).unwrap() - 0.7).abs() < 1e-12);
    }
}
