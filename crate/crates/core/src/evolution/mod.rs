//! Time integration of gKdV, NLS and their linear limits.

mod model;
mod stepper;

pub use model::{full_rhs, rhs_nonlinear, Family, ModelSpec, NlsSign};
pub use stepper::{phi_functions, Scheme, StepperConfig, PHI_SERIES_RADIUS};

pub(crate) use stepper::Integrator;

use crate::error::{Error, Result};
use crate::spectral::{self, Field, GridSpec, C64};

/// Amplitude growth factor treated as blow-up.
pub const BLOWUP_FACTOR: f64 = 1e6;

/// Spectral power fraction below which modes count as empty when estimating
/// the fastest radiation.
const WRAP_POWER_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub model: ModelSpec,
    pub snapshots: Vec<(f64, Field)>,
    pub sample_dt: f64,
    /// Estimated time at which the fastest radiation first crosses the boundary.
    pub first_wrap_time: Option<f64>,
}

impl Trajectory {
    pub fn new(model: ModelSpec, snapshots: Vec<(f64, Field)>, sample_dt: f64) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::InsufficientData(
                "trajectory has no snapshots".into(),
            ));
        }
        if !(sample_dt > 0.0) {
            return Err(Error::Config(format!(
                "sample_dt must be positive, got {sample_dt}"
            )));
        }
        let grid = *snapshots[0].1.grid();
        let t0 = snapshots[0].0;
        for (i, (t, f)) in snapshots.iter().enumerate() {
            if *f.grid() != grid {
                return Err(Error::Config(
                    "trajectory snapshots use different grids".into(),
                ));
            }
            let expect = t0 + i as f64 * sample_dt;
            if (t - expect).abs() > 1e-12 * expect.abs().max(sample_dt) * 10.0 {
                return Err(Error::Config(format!(
                    "snapshot {i} at t = {t} is not on the uniform sample grid"
                )));
            }
        }
        Ok(Trajectory {
            model,
            snapshots,
            sample_dt,
            first_wrap_time: None,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        self.snapshots[0].1.grid()
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|(t, _)| *t).collect()
    }

    pub fn fields(&self) -> impl Iterator<Item = &Field> {
        self.snapshots.iter().map(|(_, f)| f)
    }

    pub fn last(&self) -> &Field {
        &self.snapshots[self.snapshots.len() - 1].1
    }
}

/// Estimate when radiation leaving the bulk of `f` first reaches the torus boundary.
pub fn estimate_first_wrap_time(f: &Field, model: &ModelSpec) -> Option<f64> {
    let grid = f.grid();
    let coeffs = f.spectrum();
    let total: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    if total == 0.0 {
        return None;
    }
    let xi_max = coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm_sqr() > WRAP_POWER_THRESHOLD * total)
        .map(|(i, _)| grid.wavenumber(i).abs())
        .fold(0.0, f64::max);
    let speed = model.max_group_speed(xi_max);
    (speed > 0.0).then(|| 0.5 * grid.domain_length() / speed)
}

fn symbol(model: &ModelSpec, grid: &GridSpec) -> Vec<C64> {
    let nyq = grid.nyquist_index();
    (0..grid.num_points())
        .map(|i| {
            if i == nyq {
                C64::new(0.0, 0.0)
            } else {
                model.linear_symbol(grid.wavenumber(i))
            }
        })
        .collect()
}

fn check_stability(
    initial: &Field,
    model: &ModelSpec,
    stepper: &StepperConfig,
    h: f64,
) -> Result<()> {
    let freq = model.nonlinear_frequency(initial.max_abs(), initial.grid());
    if h.abs() * freq > stepper.substep_safety {
        return Err(Error::Config(format!(
            "stepper.dt too large: dt * nonlinear frequency = {:.3} exceeds substep_safety {}",
            h.abs() * freq,
            stepper.substep_safety
        )));
    }
    Ok(())
}

fn blowup_check(coeffs: &[C64], grid: &GridSpec, limit: f64, t_valid: f64) -> Result<Field> {
    let field = Field::new(*grid, spectral::inverse(coeffs), false)?;
    if !field.is_finite() {
        return Err(Error::BlowUp {
            last_valid_time: t_valid,
            reason: "non-finite values".into(),
        });
    }
    let amp = field.max_abs();
    if amp > limit {
        return Err(Error::BlowUp {
            last_valid_time: t_valid,
            reason: format!("max |u| = {amp:.3e} exceeds guard {limit:.3e}"),
        });
    }
    Ok(field)
}

fn to_field(coeffs: &[C64], grid: &GridSpec, is_real: bool) -> Result<Field> {
    Field::from_spectrum(*grid, coeffs, is_real)
}

/// Evolve and hand each sample `(t, u(t))` to `observer` without storing the trajectory.
pub fn evolve_with<F>(
    initial: &Field,
    model: &ModelSpec,
    stepper: &StepperConfig,
    t_final: f64,
    sample_dt: f64,
    mut observer: F,
) -> Result<()>
where
    F: FnMut(f64, &Field) -> Result<()>,
{
    stepper.validate()?;
    model.check_field(initial)?;
    let n_samples = sample_count(t_final, sample_dt)?;
    let grid = *initial.grid();
    let (n_sub, h) = stepper.substeps(sample_dt);
    check_stability(initial, model, stepper, h)?;

    let integrator = Integrator::new(&symbol(model, &grid), h, stepper.scheme);
    let mut v = initial.spectrum();
    v[grid.nyquist_index()] = C64::new(0.0, 0.0);
    let limit = BLOWUP_FACTOR * initial.max_abs().max(f64::MIN_POSITIVE);
    let mut nonlin = |c: &[C64], _t: f64| Ok(model.nonlinear_coeffs(&grid, c));

    observer(0.0, &to_field(&v, &grid, model.is_real())?)?;
    let mut t_valid = 0.0;
    for s in 1..=n_samples {
        for sub in 0..n_sub {
            let t = (s - 1) as f64 * sample_dt + sub as f64 * h;
            integrator.step(&mut v, t, &mut nonlin)?;
            if v.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
                return Err(Error::BlowUp {
                    last_valid_time: t_valid,
                    reason: "non-finite spectral coefficients".into(),
                });
            }
        }
        let t = s as f64 * sample_dt;
        blowup_check(&v, &grid, limit, t_valid)?;
        t_valid = t;
        observer(t, &to_field(&v, &grid, model.is_real())?)?;
    }
    Ok(())
}

fn sample_count(t_final: f64, sample_dt: f64) -> Result<usize> {
    if !(sample_dt.is_finite() && sample_dt > 0.0) {
        return Err(Error::Config(format!(
            "sample_dt must be positive, got {sample_dt}"
        )));
    }
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(Error::Config(format!(
            "t_final must be >= 0, got {t_final}"
        )));
    }
    let n = (t_final / sample_dt).round();
    if (n * sample_dt - t_final).abs() > 1e-9 * t_final.max(sample_dt) {
        return Err(Error::Config(format!(
            "t_final = {t_final} is not a multiple of sample_dt = {sample_dt}"
        )));
    }
    Ok(n as usize)
}

/// Snapshots at `t = 0, sample_dt, ..., t_final`.
pub fn evolve(
    initial: &Field,
    model: &ModelSpec,
    stepper: &StepperConfig,
    t_final: f64,
    sample_dt: f64,
) -> Result<Trajectory> {
    let mut snaps = Vec::new();
    evolve_with(initial, model, stepper, t_final, sample_dt, |t, f| {
        snaps.push((t, f.clone()));
        Ok(())
    })?;
    let mut traj = Trajectory::new(*model, snaps, sample_dt)?;
    traj.first_wrap_time = estimate_first_wrap_time(initial, model);
    Ok(traj)
}

/// State after `duration` (which may be negative).
pub fn advance(
    initial: &Field,
    model: &ModelSpec,
    stepper: &StepperConfig,
    duration: f64,
) -> Result<Field> {
    stepper.validate()?;
    model.check_field(initial)?;
    if duration == 0.0 {
        return Ok(initial.clone());
    }
    let grid = *initial.grid();
    let (n_sub, h) = stepper.substeps(duration);
    check_stability(initial, model, stepper, h)?;
    let integrator = Integrator::new(&symbol(model, &grid), h, stepper.scheme);
    let mut v = initial.spectrum();
    v[grid.nyquist_index()] = C64::new(0.0, 0.0);
    let mut nonlin = |c: &[C64], _t: f64| Ok(model.nonlinear_coeffs(&grid, c));
    for s in 0..n_sub {
        integrator.step(&mut v, s as f64 * h, &mut nonlin)?;
    }
    let limit = BLOWUP_FACTOR * initial.max_abs().max(f64::MIN_POSITIVE);
    blowup_check(&v, &grid, limit, 0.0)?;
    to_field(&v, &grid, model.is_real())
}

/// Solve `e_t + e_xxx = forcing(t)` with `e(0) = 0`.
///
/// The forcing is evaluated at the integrator's stage times; repeated stage
/// times reuse the previous evaluation.
pub fn evolve_forced_airy_with<S, O>(
    grid: &GridSpec,
    mut forcing: S,
    stepper: &StepperConfig,
    t_final: f64,
    sample_dt: f64,
    mut observer: O,
) -> Result<()>
where
    S: FnMut(f64) -> Result<Field>,
    O: FnMut(f64, &Field) -> Result<()>,
{
    stepper.validate()?;
    let n_samples = sample_count(t_final, sample_dt)?;
    let model = ModelSpec::airy();
    let (n_sub, h) = stepper.substeps(sample_dt);
    let integrator = Integrator::new(&symbol(&model, grid), h, stepper.scheme);
    let nyq = grid.nyquist_index();
    let mut cache: Vec<(f64, Vec<C64>)> = Vec::with_capacity(2);
    let mut source = |_: &[C64], t: f64| -> Result<Vec<C64>> {
        if let Some((_, c)) = cache.iter().find(|(s, _)| *s == t) {
            return Ok(c.clone());
        }
        let f = forcing(t)?;
        if f.grid() != grid {
            return Err(Error::Config("forcing lives on a different grid".into()));
        }
        let mut c = f.spectrum();
        c[nyq] = C64::new(0.0, 0.0);
        if cache.len() == 2 {
            cache.remove(0);
        }
        cache.push((t, c.clone()));
        Ok(c)
    };
    let mut v = vec![C64::new(0.0, 0.0); grid.num_points()];
    observer(0.0, &Field::zeros(*grid, true))?;
    for s in 1..=n_samples {
        for sub in 0..n_sub {
            let t = (s - 1) as f64 * sample_dt + sub as f64 * h;
            integrator.step(&mut v, t, &mut source)?;
        }
        let t = s as f64 * sample_dt;
        let f = to_field(&v, grid, true)?;
        if !f.is_finite() {
            return Err(Error::BlowUp {
                last_valid_time: t - sample_dt,
                reason: "non-finite values in forced Airy solve".into(),
            });
        }
        observer(t, &f)?;
    }
    Ok(())
}

pub fn evolve_forced_airy<S>(
    grid: &GridSpec,
    forcing: S,
    stepper: &StepperConfig,
    t_final: f64,
    sample_dt: f64,
) -> Result<Trajectory>
where
    S: FnMut(f64) -> Result<Field>,
{
    let mut snaps = Vec::new();
    evolve_forced_airy_with(grid, forcing, stepper, t_final, sample_dt, |t, f| {
        snaps.push((t, f.clone()));
        Ok(())
    })?;
    Trajectory::new(ModelSpec::airy(), snaps, sample_dt)
}

/// `u -> lambda^(-2/(p-1)) u(t / lambda^3, x / lambda)`.
///
/// The rescaled samples sit exactly on the dilated grid, so no interpolation is needed.
pub fn apply_scaling_symmetry(traj: &Trajectory, lambda: f64) -> Result<Trajectory> {
    if traj.model.family != Family::Gkdv {
        return Err(Error::Model(
            "scaling symmetry is implemented for gKdV only".into(),
        ));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!(
            "scaling parameter must be > 0, got {lambda}"
        )));
    }
    let g = traj.grid();
    let grid = GridSpec::new(
        g.num_points(),
        lambda * g.domain_length(),
        lambda * g.origin(),
    )
    .map_err(|e| Error::Resolution(format!("rescaled grid not representable: {e}")))?;
    let amp = lambda.powf(-2.0 / (traj.model.p - 1.0));
    let t3 = lambda.powi(3);
    let snapshots = traj
        .snapshots
        .iter()
        .map(|(t, f)| {
            let vals = f.values().iter().map(|v| v * amp).collect();
            Ok((t * t3, Field::new(grid, vals, f.is_real())?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Trajectory::new(traj.model, snapshots, traj.sample_dt * t3)?;
    out.first_wrap_time = traj.first_wrap_time.map(|w| w * t3);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian(grid: GridSpec, a: f64, w: f64) -> Field {
        Field::from_fn_real(grid, |x| a * (-(x / w).powi(2)).exp())
    }

    #[test]
    fn airy_plane_wave() {
        let l = 2.0 * PI;
        let g = GridSpec::new(32, l, 0.0).unwrap();
        let k = 3.0;
        let u0 = Field::from_fn_real(g, |x| (k * x).cos());
        let traj = evolve(&u0, &ModelSpec::airy(), &StepperConfig::new(0.01), 1.0, 0.5).unwrap();
        for (t, f) in &traj.snapshots {
            for (i, v) in f.values().iter().enumerate() {
                let exact = (k * g.x(i) + k.powi(3) * t).cos();
                assert!((v.re - exact).abs() < 1e-9);
            }
        }
        assert_eq!(traj.len(), 3);
    }

    #[test]
    fn free_schrodinger_plane_wave_printed_sign() {
        // u_t = -i u_xx: e^{ikx} -> e^{ikx + i k^2 t}
        let g = GridSpec::new(32, 2.0 * PI, 0.0).unwrap();
        let k = 2.0;
        let u0 = Field::from_fn_complex(g, |x| C64::from_polar(1.0, k * x));
        let u = advance(
            &u0,
            &ModelSpec::free_schrodinger(),
            &StepperConfig::new(0.01),
            0.7,
        )
        .unwrap();
        for (i, v) in u.values().iter().enumerate() {
            let exact = C64::from_polar(1.0, k * g.x(i) + k * k * 0.7);
            assert!((v - exact).norm() < 1e-10);
        }
    }

    #[test]
    fn time_reversal_airy_and_gkdv() {
        let g = GridSpec::centered(256, 40.0).unwrap();
        let u0 = gaussian(g, 0.8, 2.0);
        let airy = ModelSpec::airy();
        let s = StepperConfig::new(0.01);
        let back = advance(&advance(&u0, &airy, &s, 0.5).unwrap(), &airy, &s, -0.5).unwrap();
        assert!(back.sub(&u0).unwrap().l2_norm() / u0.l2_norm() < 1e-12);
        let m = ModelSpec::gkdv(3.0, 1.0).unwrap();
        let s = StepperConfig::new(2e-3);
        let back = advance(&advance(&u0, &m, &s, 0.5).unwrap(), &m, &s, -0.5).unwrap();
        assert!(back.sub(&u0).unwrap().l2_norm() / u0.l2_norm() < 1e-8);
    }

    #[test]
    fn stability_precondition() {
        let g = GridSpec::centered(256, 40.0).unwrap();
        let u0 = gaussian(g, 2.0, 1.0);
        let m = ModelSpec::gkdv(5.0, 1.0).unwrap();
        let r = evolve(&u0, &m, &StepperConfig::new(0.1), 0.1, 0.1);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn blow_up_is_reported() {
        // Far too large a step with the guard disabled: the nonlinear stages explode.
        let g = GridSpec::centered(64, 20.0).unwrap();
        let u0 = gaussian(g, 3.0, 1.0);
        let m = ModelSpec::nls(5.0, -1.0).unwrap();
        let c = Field::new(g, u0.values().to_vec(), false).unwrap();
        let mut s = StepperConfig::new(0.2);
        s.substep_safety = 1e9;
        let r = evolve(&c, &m, &s, 2.0, 0.2);
        assert!(matches!(r, Err(Error::BlowUp { .. })), "{r:?}");
    }

    #[test]
    fn sample_times_must_divide() {
        let g = GridSpec::centered(32, 10.0).unwrap();
        let r = evolve(
            &gaussian(g, 0.1, 1.0),
            &ModelSpec::airy(),
            &StepperConfig::new(0.01),
            1.0,
            0.3,
        );
        assert!(r.is_err());
    }

    fn forced_run(grid: &GridSpec, f: impl Fn(f64) -> Field, t: f64) -> Field {
        let traj = evolve_forced_airy(grid, |s| Ok(f(s)), &StepperConfig::new(0.01), t, t).unwrap();
        traj.last().clone()
    }

    #[test]
    fn forced_airy_zero_source() {
        let g = GridSpec::centered(64, 20.0).unwrap();
        let e = forced_run(&g, |_| Field::zeros(g, true), 0.5);
        assert_eq!(e.max_abs(), 0.0);
    }

    #[test]
    fn forced_airy_static_source_matches_mode_formula() {
        let g = GridSpec::centered(128, 20.0).unwrap();
        let src = gaussian(g, 1.0, 1.5);
        let t = 0.8;
        let e = forced_run(&g, |_| src.clone(), t);
        // per-mode oracle: (e^{i k^3 t} - 1) / (i k^3) * g_k, limit t at k = 0
        let gk = src.spectrum();
        let oracle: Vec<C64> = (0..128)
            .map(|i| {
                let k = g.wavenumber(i);
                if i == 64 {
                    return C64::new(0.0, 0.0);
                }
                let w = k.powi(3);
                let factor = if w == 0.0 {
                    C64::new(t, 0.0)
                } else {
                    (C64::new(0.0, w * t).exp() - 1.0) / C64::new(0.0, w)
                };
                factor * gk[i]
            })
            .collect();
        let ef = Field::from_spectrum(g, &oracle, true).unwrap();
        let err = e.sub(&ef).unwrap().l2_norm() / ef.l2_norm();
        assert!(err < 1e-8, "err = {err}");
    }

    #[test]
    fn forced_airy_oscillating_source_matches_scalar_ode() {
        // e_k' = i w e_k + g cos(Ω t): e_k(t) = g ∫ e^{i w (t-s)} cos(Ω s) ds
        let l = 2.0 * PI;
        let g = GridSpec::new(32, l, 0.0).unwrap();
        let (k, om, t) = (2.0, 5.0, 1.0);
        let e = forced_run(
            &g,
            |s| Field::from_fn_real(g, |x| (k * x).cos() * (om * s).cos()),
            t,
        );
        let w = k.powi(3);
        let i = C64::new(0.0, 1.0);
        // ∫0^t e^{iw(t-s)} (e^{iΩs}+e^{-iΩs})/2 ds
        let part =
            |o: f64| (C64::new(0.0, o * t).exp() - C64::new(0.0, w * t).exp()) / (i * (o - w));
        let ek = 0.5 * (part(om) + part(-om));
        // mode +k carries 1/2 of cos(kx); -k mode is conjugate-symmetric with w -> -w
        for (j, v) in e.values().iter().enumerate() {
            let x = g.x(j);
            let exact = (ek * C64::from_polar(0.5, k * x)).re * 2.0;
            assert!((v.re - exact).abs() < 1e-8, "{} vs {}", v.re, exact);
        }
    }

    #[test]
    fn scaling_identity_and_mass() {
        let g = GridSpec::centered(128, 30.0).unwrap();
        let u0 = gaussian(g, 0.5, 1.0);
        let m = ModelSpec::gkdv(5.0, 1.0).unwrap();
        let traj = evolve(&u0, &m, &StepperConfig::new(0.01), 0.1, 0.05).unwrap();
        let same = apply_scaling_symmetry(&traj, 1.0).unwrap();
        for ((t1, a), (t2, b)) in traj.snapshots.iter().zip(&same.snapshots) {
            assert_eq!(t1, t2);
            assert_eq!(a, b);
        }
        let scaled = apply_scaling_symmetry(&traj, 2.5).unwrap();
        for ((_, a), (_, b)) in traj.snapshots.iter().zip(&scaled.snapshots) {
            assert!((a.l2_norm_sq() - b.l2_norm_sq()).abs() < 1e-10 * a.l2_norm_sq());
        }
    }

    #[test]
    fn scaled_trajectory_is_a_solution() {
        // evolving the rescaled datum reproduces the rescaled final state
        let g = GridSpec::centered(256, 40.0).unwrap();
        let u0 = gaussian(g, 0.6, 2.0);
        let m = ModelSpec::gkdv(3.0, 1.0).unwrap();
        let traj = evolve(&u0, &m, &StepperConfig::new(1e-3), 0.2, 0.2).unwrap();
        let lam = 1.5;
        let scaled = apply_scaling_symmetry(&traj, lam).unwrap();
        let t_end = scaled.snapshots[1].0;
        let direct = advance(&scaled.snapshots[0].1, &m, &StepperConfig::new(1e-3), t_end).unwrap();
        let err = direct.sub(&scaled.snapshots[1].1).unwrap().l2_norm() / direct.l2_norm();
        assert!(err < 1e-9, "err = {err}");
    }
}
