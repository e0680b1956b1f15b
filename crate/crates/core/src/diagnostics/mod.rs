//! Conserved and monitored quantities: mass, energy, local densities and
//! currents, centres, dispersion functionals and mixed space-time norms.

mod centres;
mod norms;

pub(crate) use centres::centre_record;
pub use centres::{
    centres, circular_mean, dispersion_functional, fit_slope, tail_mass, velocity_mismatch,
    CentreRecord, DispersionReport,
};
pub use norms::{mixed_norm, MixedNormAccumulator, NormKind, NormReport, Outer};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{ModelSpec, Trajectory};
use crate::spectral::{self, derivative, Field, C64};

/// Which energy current to use.
///
/// `Corrected` carries `2 mu p |u|^(p-1) u_x²` as its middle term, which is what
/// the pointwise energy law requires. `PaperLiteral` keeps the coefficient `2 mu`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KVariant {
    #[default]
    Corrected,
    PaperLiteral,
}

impl std::str::FromStr for KVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corrected" => Ok(KVariant::Corrected),
            "paper-literal" | "paper_literal" => Ok(KVariant::PaperLiteral),
            other => Err(Error::Config(format!(
                "unknown k variant '{other}' (expected corrected or paper-literal)"
            ))),
        }
    }
}

/// ∫|u|².
pub fn mass(f: &Field) -> f64 {
    f.l2_norm_sq()
}

fn abs_pow(v: C64, e: f64) -> f64 {
    let m2 = v.norm_sqr();
    if m2 == 0.0 {
        0.0
    } else {
        m2.powf(0.5 * e)
    }
}

fn energy_density_values(f: &Field, model: &ModelSpec) -> Result<Vec<f64>> {
    let ux = derivative(f, 1)?;
    let p = model.p;
    let c = model.mu / (p + 1.0);
    Ok(f.values()
        .iter()
        .zip(ux.values())
        .map(|(u, d)| 0.5 * d.norm_sqr() + c * abs_pow(*u, p + 1.0))
        .collect())
}

/// `∫ ½|u_x|² + mu/(p+1) |u|^(p+1)`.
pub fn energy(f: &Field, model: &ModelSpec) -> Result<f64> {
    model_check(f, model)?;
    Ok(spectral::integrate_real(
        f.grid(),
        &energy_density_values(f, model)?,
    ))
}

/// `∫ ½|u_x|² + |mu|/(p+1) |u|^(p+1)`: the scale against which a vanishing energy is judged.
pub fn energy_scale(f: &Field, model: &ModelSpec) -> Result<f64> {
    let ux = derivative(f, 1)?;
    let c = model.mu.abs() / (model.p + 1.0);
    let vals: Vec<f64> = f
        .values()
        .iter()
        .zip(ux.values())
        .map(|(u, d)| 0.5 * d.norm_sqr() + c * abs_pow(*u, model.p + 1.0))
        .collect();
    Ok(spectral::integrate_real(f.grid(), &vals))
}

fn model_check(f: &Field, model: &ModelSpec) -> Result<()> {
    if f.is_real() != model.is_real() {
        return Err(Error::Model(format!(
            "field realness does not match the {:?} model",
            model.family
        )));
    }
    Ok(())
}

/// Local densities and currents of a real field.
#[derive(Clone, Debug)]
pub struct DensityFields {
    pub rho: Field,
    pub j: Field,
    pub e: Field,
    pub k: Field,
    pub k_variant: KVariant,
}

/// `rho = u²`, `j = 3u_x² + 2 mu p/(p+1) |u|^(p+1)`, `e = ½u_x² + mu/(p+1) |u|^(p+1)`,
/// `k = (3/2) u_xx² + 2 mu c |u|^(p-1) u_x² + (mu²/2) |u|^(2p)` with `c = p`
/// (corrected) or `c = 1` (paper literal).
pub fn density_fields(f: &Field, model: &ModelSpec, variant: KVariant) -> Result<DensityFields> {
    if !f.is_real() {
        return Err(Error::Model(
            "densities are defined for real (gKdV) fields".into(),
        ));
    }
    let ux = derivative(f, 1)?;
    let uxx = derivative(f, 2)?;
    let (p, mu) = (model.p, model.mu);
    let cross = match variant {
        KVariant::Corrected => 2.0 * mu * p,
        KVariant::PaperLiteral => 2.0 * mu,
    };
    let n = f.grid().num_points();
    let (mut rho, mut j, mut e, mut k) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for i in 0..n {
        let u = f.values()[i].re;
        let d = ux.values()[i].re;
        let dd = uxx.values()[i].re;
        let a = u.abs();
        let ap1 = if a == 0.0 { 0.0 } else { a.powf(p + 1.0) };
        let apm1 = if a == 0.0 { 0.0 } else { a.powf(p - 1.0) };
        let a2p = if a == 0.0 { 0.0 } else { a.powf(2.0 * p) };
        rho.push(u * u);
        j.push(3.0 * d * d + 2.0 * mu * p / (p + 1.0) * ap1);
        e.push(0.5 * d * d + mu / (p + 1.0) * ap1);
        k.push(1.5 * dd * dd + cross * apm1 * d * d + 0.5 * mu * mu * a2p);
    }
    let g = *f.grid();
    Ok(DensityFields {
        rho: Field::from_real(g, rho)?,
        j: Field::from_real(g, j)?,
        e: Field::from_real(g, e)?,
        k: Field::from_real(g, k)?,
        k_variant: variant,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConservationLaw {
    MassLaw,
    EnergyLaw,
}

/// `‖∂_t d + ∂_xxx d - ∂_x c‖_{L²}` at interior sample times, for the density/current
/// pair `(rho, j)` or `(e, k)`.
///
/// `∂_t` is the five-point centred difference of the sampled densities, so the
/// check is independent of the solver's right-hand side.
pub fn conservation_residual(
    traj: &Trajectory,
    law: ConservationLaw,
    variant: KVariant,
) -> Result<Vec<(f64, f64)>> {
    if traj.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "conservation residual needs at least 5 snapshots, got {}",
            traj.len()
        )));
    }
    let h = traj.sample_dt;
    let pairs = traj
        .fields()
        .map(|f| {
            let d = density_fields(f, &traj.model, variant)?;
            Ok(match law {
                ConservationLaw::MassLaw => (d.rho, d.j),
                ConservationLaw::EnergyLaw => (d.e, d.k),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = *traj.grid();
    let mut out = Vec::with_capacity(traj.len() - 4);
    for i in 2..traj.len() - 2 {
        let dens = |m: usize| &pairs[m].0;
        let dxxx = derivative(&pairs[i].0, 3)?;
        let cx = derivative(&pairs[i].1, 1)?;
        let vals: Vec<f64> = (0..grid.num_points())
            .map(|x| {
                let dt = (-dens(i + 2).values()[x].re + 8.0 * dens(i + 1).values()[x].re
                    - 8.0 * dens(i - 1).values()[x].re
                    + dens(i - 2).values()[x].re)
                    / (12.0 * h);
                let r = dt + dxxx.values()[x].re - cx.values()[x].re;
                r * r
            })
            .collect();
        out.push((
            traj.snapshots[i].0,
            spectral::integrate_real(&grid, &vals).sqrt(),
        ));
    }
    Ok(out)
}
