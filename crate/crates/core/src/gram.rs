//! Gram-matrix algebra behind the centre-of-mass/centre-of-energy ordering.
//!
//! For a real field `u` with mass `M` the five quantities satisfy
//! `a²M = ∫u_xx²`, `b²M = ∫|u|^(2p)`, `aqM = ∫u_x²`, `brM = ∫|u|^(p+1)` and
//! `absM = p∫|u|^(p-1) u_x²`. Then `q, r, s` are the pairwise inner products of
//! the unit vectors along `u`, `-u_xx` and `|u|^(p-1)u`.

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{centre_record, KVariant};
use crate::error::{Error, Result};
use crate::evolution::{Family, Trajectory};
use crate::spectral::{derivative, integrate_real, signed_power, Field, C64};

/// Slack for PSD eigenvalues and the determinant condition.
pub const PSD_TOL: f64 = 1e-10;
/// How far the Gram matrix of the normalised vectors may drift from `q, r, s`.
pub const CONSISTENCY_TOL: f64 = 1e-10;
/// A scanned point counts as a violation below this value.
pub const VIOLATION_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GramStats {
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub mass: f64,
    pub p: f64,
    /// Largest gap between `q, r, s` and the directly computed inner products.
    pub consistency: f64,
}

impl GramStats {
    /// `1 - q² - r² - s² + 2qrs`.
    pub fn det(&self) -> f64 {
        gram_det(self.q, self.r, self.s)
    }
}

pub fn gram_det(q: f64, r: f64, s: f64) -> f64 {
    1.0 - q * q - r * r - s * s + 2.0 * q * r * s
}

/// Reads `(a, b, q, r, s)` off a real field by quadrature.
pub fn extract_gram(f: &Field, p: f64) -> Result<GramStats> {
    if !f.is_real() {
        return Err(Error::Model("Gram quantities need a real field".into()));
    }
    if !(p > 1.0) {
        return Err(Error::Domain(format!("p must exceed 1, got {p}")));
    }
    let grid = *f.grid();
    let u = f.real_values();
    let ux = derivative(f, 1)?.real_values();
    let uxx = derivative(f, 2)?.real_values();
    let w: Vec<f64> = u
        .iter()
        .map(|&v| signed_power(C64::new(v, 0.0), p).re)
        .collect();
    let int = |vals: Vec<f64>| integrate_real(&grid, &vals);
    let zip2 = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).collect::<Vec<_>>();

    let mass = int(zip2(&u, &u));
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::Degenerate("Gram quantities of a zero field".into()));
    }
    let i_xx = int(zip2(&uxx, &uxx));
    let i_2p = int(zip2(&w, &w));
    let i_x = int(zip2(&ux, &ux));
    let i_p1 = int(zip2(&u, &w));
    let i_c = p * int(u
        .iter()
        .zip(&ux)
        .map(|(v, d)| {
            let a = v.abs();
            if a == 0.0 {
                0.0
            } else {
                a.powf(p - 1.0) * d * d
            }
        })
        .collect());
    for (name, v) in [
        ("∫u_xx²", i_xx),
        ("∫|u|^(2p)", i_2p),
        ("∫u_x²", i_x),
        ("∫|u|^(p+1)", i_p1),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Degenerate(format!("{name} = {v} is not positive")));
        }
    }
    let a = (i_xx / mass).sqrt();
    let b = (i_2p / mass).sqrt();
    let q = i_x / (a * mass);
    let r = i_p1 / (b * mass);
    let s = i_c / (a * b * mass);

    // Gram matrix of u/√M, -u_xx/(a√M), w/(b√M), computed without integrating by parts.
    let g_q = -int(zip2(&u, &uxx)) / (a * mass);
    let g_r = int(zip2(&u, &w)) / (b * mass);
    let g_s = -int(zip2(&uxx, &w)) / (a * b * mass);
    let consistency = (g_q - q).abs().max((g_r - r).abs()).max((g_s - s).abs());
    if !(consistency <= CONSISTENCY_TOL) {
        return Err(Error::Resolution(format!(
            "Gram matrix disagrees with (q, r, s) by {consistency:.3e}; the field is under-resolved"
        )));
    }
    Ok(GramStats {
        a,
        b,
        q,
        r,
        s,
        mass,
        p,
        consistency,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PsdCheck {
    /// Ascending.
    pub eigenvalues: [f64; 3],
    pub det: f64,
    pub verdict: bool,
}

/// Eigenvalues of `[[1,q,r],[q,1,s],[r,s,1]]`.
pub fn gram_psd_check(g: &GramStats) -> PsdCheck {
    let eigenvalues = gram_eigenvalues(g.q, g.r, g.s);
    PsdCheck {
        eigenvalues,
        det: g.det(),
        verdict: eigenvalues[0] >= -PSD_TOL,
    }
}

/// Eigenvalues of the unit-diagonal symmetric matrix, ascending.
///
/// With `B = M - I` the characteristic polynomial is `λ³ - c λ - 2qrs`,
/// `c = q² + r² + s²`, solved by the trigonometric formula.
pub fn gram_eigenvalues(q: f64, r: f64, s: f64) -> [f64; 3] {
    let c = q * q + r * r + s * s;
    if c == 0.0 {
        return [1.0; 3];
    }
    let m = (c / 3.0).sqrt();
    let arg = (q * r * s / (m * m * m)).clamp(-1.0, 1.0);
    let phi = arg.acos() / 3.0;
    let tau = 2.0 * std::f64::consts::PI / 3.0;
    let mut ev = [0.0; 3];
    for (k, e) in ev.iter_mut().enumerate() {
        *e = 1.0 + 2.0 * m * (phi - tau * k as f64).cos();
    }
    ev.sort_by(f64::total_cmp);
    ev
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AlgReport {
    /// `(3/2)a² + 2abs + (1/2)b²`.
    pub lhs: f64,
    /// `((1/2)aq + br/(p+1)) (3aq + 2p br/(p+1))`.
    pub rhs: f64,
    /// Reduced quadratic form `(3/2)a²(1-q²) + ab(2s - (p+3)qr/(p+1)) + (1/2)b²(1-r²)`.
    pub expand_value: f64,
    pub strict: bool,
}

pub fn alg_inequality(g: &GramStats, p: f64) -> AlgReport {
    let (a, b, q, r, s) = (g.a, g.b, g.q, g.r, g.s);
    let lhs = 1.5 * a * a + 2.0 * a * b * s + 0.5 * b * b;
    let rhs = (0.5 * a * q + b * r / (p + 1.0)) * (3.0 * a * q + 2.0 * p * b * r / (p + 1.0));
    let (ca, cb, cc) = expand_coeffs(q, r, s, p);
    AlgReport {
        lhs,
        rhs,
        expand_value: ca * a * a + cb * a * b + cc * b * b,
        strict: lhs > rhs,
    }
}

/// Coefficients of `a², ab, b²` in the reduced form.
pub fn expand_coeffs(q: f64, r: f64, s: f64, p: f64) -> (f64, f64, f64) {
    (
        1.5 * (1.0 - q * q),
        2.0 * s - (p + 3.0) / (p + 1.0) * q * r,
        0.5 * (1.0 - r * r),
    )
}

/// Minimum of `A a² + B ab + C b²` over unit vectors with `a, b ≥ 0`.
pub fn ray_minimum(ca: f64, cb: f64, cc: f64) -> f64 {
    if cb < 0.0 {
        let mid = 0.5 * (ca + cc);
        let half = 0.5 * (ca - cc);
        mid - (half * half + 0.25 * cb * cb).sqrt()
    } else {
        ca.min(cc)
    }
}

/// Whether `A a² + B ab + C b²` goes negative for some `a, b > 0`, read off
/// from the quadratic formula: with `A, C ≥ 0` this needs `B < -2√(AC)`.
pub fn discriminant_negative(ca: f64, cb: f64, cc: f64) -> bool {
    cb + 2.0 * (ca.max(0.0) * cc.max(0.0)).sqrt() < -VIOLATION_TOL
}

#[derive(Clone, Debug, Serialize)]
pub struct RegionScanReport {
    pub p: f64,
    pub grid_resolution: f64,
    pub points_tested: u64,
    pub min_expand_value: f64,
    /// `(q, r, s, minimum of the reduced form over the ray)`.
    pub violations: Vec<(f64, f64, f64, f64)>,
    /// Points where the ray minimisation and the discriminant test disagree.
    pub disagreements: u64,
}

/// Exhaustive scan of `q, r ∈ (0, 1]`, `s ∈ [0, 1]` on a lattice of spacing
/// `resolution`, keeping points with `det ≥ -1e-10`.
pub fn region_scan(p: f64, resolution: f64) -> Result<RegionScanReport> {
    if !(resolution > 0.0 && resolution <= 0.1) {
        return Err(Error::Domain(format!(
            "resolution must lie in (0, 0.1], got {resolution}"
        )));
    }
    if !(p > 1.0) {
        return Err(Error::Domain(format!("p must exceed 1, got {p}")));
    }
    let n = (1.0 / resolution).round() as usize;
    let h = 1.0 / n as f64;
    struct Row {
        tested: u64,
        min: f64,
        violations: Vec<(f64, f64, f64, f64)>,
        disagreements: u64,
    }
    let rows: Vec<Row> = (1..=n)
        .into_par_iter()
        .map(|i| {
            let q = i as f64 * h;
            let mut row = Row {
                tested: 0,
                min: f64::INFINITY,
                violations: Vec::new(),
                disagreements: 0,
            };
            for j in 1..=n {
                let r = j as f64 * h;
                for k in 0..=n {
                    let s = k as f64 * h;
                    if gram_det(q, r, s) < -PSD_TOL {
                        continue;
                    }
                    row.tested += 1;
                    let (ca, cb, cc) = expand_coeffs(q, r, s, p);
                    let v = ray_minimum(ca, cb, cc);
                    row.min = row.min.min(v);
                    let ray_neg = v < -VIOLATION_TOL;
                    if ray_neg {
                        row.violations.push((q, r, s, v));
                    }
                    if ray_neg != discriminant_negative(ca, cb, cc) {
                        row.disagreements += 1;
                    }
                }
            }
            row
        })
        .collect();
    let mut rep = RegionScanReport {
        p,
        grid_resolution: h,
        points_tested: 0,
        min_expand_value: f64::INFINITY,
        violations: Vec::new(),
        disagreements: 0,
    };
    for row in rows {
        rep.points_tested += row.tested;
        rep.min_expand_value = rep.min_expand_value.min(row.min);
        rep.violations.extend(row.violations);
        rep.disagreements += row.disagreements;
    }
    Ok(rep)
}

#[derive(Clone, Debug, Serialize)]
pub struct GapSample {
    pub t: f64,
    /// `M∫k - E∫j`.
    pub gap: f64,
    /// `gap / (M E)`.
    pub normalized: f64,
    /// `vM - vE` from the centre velocities.
    pub velocity_difference: f64,
    /// `M² (lhs - rhs)` from the Gram quantities; `None` for the literal k variant
    /// or when the Gram quantities fail their consistency check.
    pub gram_gap: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapSeries {
    pub k_variant: KVariant,
    pub samples: Vec<GapSample>,
    pub min_gap: f64,
    pub min_normalized: f64,
    /// `gap > 0` at every sample.
    pub verdict: bool,
}

/// Sign of `∂ₜxM − ∂ₜxE` along a defocusing trajectory.
pub fn monotonicity_gap_series(traj: &Trajectory, variant: KVariant) -> Result<GapSeries> {
    let model = traj.model;
    if model.family != Family::Gkdv || model.mu != 1.0 {
        return Err(Error::Model(
            "the gap series needs a defocusing gKdV run (mu = +1)".into(),
        ));
    }
    if model.p < 3f64.sqrt() {
        return Err(Error::Domain(format!(
            "the gap series needs p ≥ √3, got {}",
            model.p
        )));
    }
    let mut samples = Vec::with_capacity(traj.len());
    for (t, f) in &traj.snapshots {
        let rec = centre_record(*t, f, &model, variant)?;
        if !(rec.mass > 0.0) {
            return Err(Error::Degenerate(format!("zero field at t = {t}")));
        }
        if !(rec.energy > 0.0) {
            return Err(Error::Consistency(format!(
                "energy {} is not positive at t = {t} for defocusing data",
                rec.energy
            )));
        }
        let gram_gap = match variant {
            KVariant::Corrected => match extract_gram(f, model.p) {
                Ok(g) => {
                    let alg = alg_inequality(&g, model.p);
                    Some(g.mass * g.mass * (alg.lhs - alg.rhs))
                }
                // Even p: |u|^(p-1) u has a kink at sign changes and the by-parts
                // identities converge only algebraically. The gap itself is unaffected.
                Err(Error::Resolution(_)) => None,
                Err(e) => return Err(e),
            },
            KVariant::PaperLiteral => None,
        };
        samples.push(GapSample {
            t: *t,
            gap: rec.gap,
            normalized: rec.gap / (rec.mass * rec.energy),
            velocity_difference: rec.v_m - rec.v_e,
            gram_gap,
        });
    }
    let min_gap = samples.iter().map(|s| s.gap).fold(f64::INFINITY, f64::min);
    let min_normalized = samples
        .iter()
        .map(|s| s.normalized)
        .fold(f64::INFINITY, f64::min);
    Ok(GapSeries {
        k_variant: variant,
        verdict: min_gap > 0.0,
        min_gap,
        min_normalized,
        samples,
    })
}
