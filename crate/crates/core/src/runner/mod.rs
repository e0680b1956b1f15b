//! Experiment orchestration: config in, artifacts on disk.

mod config;
mod plot;

pub use config::{
    parse_config, DiagnoseSection, Experiment, GramScanSection, NormsSection, RunConfig,
    KNOWN_FLAGS,
};
pub use plot::{available_series, emit_plot_data};

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diagnostics::{
    centres, conservation_residual, dispersion_functional, energy, mass, ConservationLaw,
    MixedNormAccumulator,
};
use crate::embedding::run_embedding;
use crate::error::{Error, Result};
use crate::evolution::{evolve, evolve_with, ModelSpec, StepperConfig, Trajectory};
use crate::gram::{
    alg_inequality, extract_gram, gram_psd_check, monotonicity_gap_series, region_scan,
};
use crate::io::write_trajectory;
use crate::profiles::gaussian;
use crate::spectral::{Field, GridSpec};

pub const DIAGNOSTICS_COLUMNS: [&str; 11] = [
    "t",
    "mass",
    "energy",
    "xM",
    "xE",
    "vM",
    "vE",
    "gap",
    "tail_mass",
    "mass_law_residual",
    "energy_law_residual",
];

/// Shortest decimal that parses back to the same double.
fn num(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    experiment: Experiment,
    seed: u64,
    config: &'a RunConfig,
    outputs: &'a [String],
}

#[derive(Serialize)]
struct ErrorRecord {
    kind: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    last_valid_time: Option<f64>,
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::BlowUp { .. } => 2,
        Error::Config(_)
        | Error::Domain(_)
        | Error::Model(_)
        | Error::Resolution(_)
        | Error::UnsupportedOrder(_) => 1,
        _ => 3,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::BlowUp { .. } => "blow_up",
        e if exit_code(e) == 1 => "validation",
        _ => "runtime",
    }
}

/// Writes `error.json` describing `err` into `out_dir`.
pub fn write_error_record(out_dir: &Path, err: &Error) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let rec = ErrorRecord {
        kind: error_kind(err),
        message: err.to_string(),
        last_valid_time: match err {
            Error::BlowUp {
                last_valid_time, ..
            } => Some(*last_valid_time),
            _ => None,
        },
    };
    fs::write(
        out_dir.join("error.json"),
        serde_json::to_string_pretty(&rec)?,
    )?;
    Ok(())
}

/// Runs the experiment, writes `manifest.json` and returns the output file names.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<String>> {
    let mut cfg = cfg.clone();
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut outputs = match cfg.experiment {
        Experiment::Simulate => simulate(&cfg, out_dir, false)?,
        Experiment::Diagnose => simulate(&cfg, out_dir, true)?,
        Experiment::Embed => embed(&cfg, out_dir)?,
        Experiment::GramScan => gram_scan(&cfg, out_dir)?,
        Experiment::Norms => norms(&cfg, out_dir)?,
    };
    outputs.push("manifest.json".into());
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        experiment: cfg.experiment,
        seed: cfg.seed,
        config: &cfg,
        outputs: &outputs,
    };
    fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&m)?,
    )?;
    Ok(outputs)
}

/// Like [`run`], but records failures in `error.json` and returns the exit code.
pub fn execute(cfg: &RunConfig, out_dir: &Path) -> i32 {
    match run(cfg, out_dir) {
        Ok(_) => 0,
        Err(e) => {
            let _ = write_error_record(out_dir, &e);
            exit_code(&e)
        }
    }
}

/// Reads a run config from TOML, or from the `config` entry of a run manifest.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let c = v
            .get("config")
            .ok_or_else(|| Error::Config(format!("{}: no `config` entry", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_value(c.clone())?;
        cfg.validate()?;
        return Ok(cfg);
    }
    parse_config(&text)
}

fn initial_field(cfg: &RunConfig) -> Result<Field> {
    let f = cfg.profile.build(&cfg.grid)?;
    if cfg.model.is_real() {
        Ok(f)
    } else {
        Field::new(cfg.grid, f.into_values(), false)
    }
}

fn write_csv<S: AsRef<str>>(path: &Path, header: &[&str], rows: &[Vec<S>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|s| s.as_ref()))?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of `diagnostics.csv`; centre columns are NaN for Schrödinger runs and
/// law residuals are NaN where the five-point stencil does not reach.
pub fn diagnostics_rows(traj: &Trajectory, cfg: &RunConfig) -> Result<Vec<Vec<String>>> {
    let model = traj.model;
    let nan = f64::NAN;
    let mut rows: Vec<[f64; 11]> = Vec::with_capacity(traj.len());
    if model.is_kdv_type() {
        for r in centres(traj, cfg.k_variant)? {
            rows.push([
                r.t,
                r.mass,
                r.energy,
                r.x_m,
                r.x_e,
                r.v_m,
                r.v_e,
                r.gap,
                r.tail_mass,
                nan,
                nan,
            ]);
        }
        if traj.len() >= 5 {
            let ml = conservation_residual(traj, ConservationLaw::MassLaw, cfg.k_variant)?;
            let el = conservation_residual(traj, ConservationLaw::EnergyLaw, cfg.k_variant)?;
            for (i, ((_, m), (_, e))) in ml.iter().zip(&el).enumerate() {
                rows[i + 2][9] = *m;
                rows[i + 2][10] = *e;
            }
        }
    } else {
        for (t, f) in &traj.snapshots {
            rows.push([
                *t,
                mass(f),
                energy(f, &model)?,
                nan,
                nan,
                nan,
                nan,
                nan,
                nan,
                nan,
                nan,
            ]);
        }
    }
    Ok(rows
        .iter()
        .map(|r| r.iter().map(|v| num(*v)).collect())
        .collect())
}

fn simulate(cfg: &RunConfig, out: &Path, diagnose: bool) -> Result<Vec<String>> {
    let u0 = initial_field(cfg)?;
    let traj = evolve(&u0, &cfg.model, &cfg.stepper, cfg.t_final, cfg.sample_dt)?;
    let mut outputs = Vec::new();
    if cfg.flag("write_trajectory", !diagnose) {
        write_trajectory(&out.join("trajectory"), &traj, &cfg.stepper)?;
        outputs.push("trajectory/manifest.json".into());
    }
    write_csv(
        &out.join("diagnostics.csv"),
        &DIAGNOSTICS_COLUMNS,
        &diagnostics_rows(&traj, cfg)?,
    )?;
    outputs.push("diagnostics.csv".into());
    if !diagnose {
        return Ok(outputs);
    }
    let m = cfg.model;
    if !cfg.diagnose.windows.is_empty() && m.is_kdv_type() {
        let rep = dispersion_functional(&traj, None, &cfg.diagnose.windows)?;
        let rows: Vec<Vec<String>> = rep
            .window_sups
            .iter()
            .map(|(t, s)| vec![num(*t), num(*s)])
            .collect();
        write_csv(&out.join("dispersion.csv"), &["T", "sup"], &rows)?;
        let rows: Vec<Vec<String>> = rep
            .times
            .iter()
            .zip(&rep.values)
            .map(|(t, v)| vec![num(*t), num(*v)])
            .collect();
        write_csv(&out.join("dispersion_series.csv"), &["t", "value"], &rows)?;
        outputs.push("dispersion.csv".into());
        outputs.push("dispersion_series.csv".into());
    }
    if m.family == crate::evolution::Family::Gkdv && m.mu == 1.0 && m.p >= 3f64.sqrt() {
        let gs = monotonicity_gap_series(&traj, cfg.k_variant)?;
        let rows: Vec<Vec<String>> = gs
            .samples
            .iter()
            .map(|s| {
                vec![
                    num(s.t),
                    num(s.gap),
                    num(s.normalized),
                    num(s.velocity_difference),
                    num(s.gram_gap.unwrap_or(f64::NAN)),
                ]
            })
            .collect();
        write_csv(
            &out.join("gap.csv"),
            &["t", "gap", "normalized", "velocity_difference", "gram_gap"],
            &rows,
        )?;
        outputs.push("gap.csv".into());
    }
    if cfg.flag("gram_stats", true) && m.is_real() && m.family == crate::evolution::Family::Gkdv {
        let mut rows = Vec::with_capacity(traj.len());
        for (t, f) in &traj.snapshots {
            let g = extract_gram(f, m.p).map_err(|e| match e {
                Error::Resolution(msg) => Error::Resolution(format!(
                    "gram.csv at t = {t}: {msg} (flags.gram_stats = false skips it)"
                )),
                e => e,
            })?;
            let psd = gram_psd_check(&g);
            let alg = alg_inequality(&g, m.p);
            rows.push(vec![
                num(*t),
                num(g.a),
                num(g.b),
                num(g.q),
                num(g.r),
                num(g.s),
                num(psd.det),
                num(psd.eigenvalues[0]),
                psd.verdict.to_string(),
                num(alg.expand_value),
                alg.strict.to_string(),
            ]);
        }
        write_csv(
            &out.join("gram.csv"),
            &[
                "t",
                "a",
                "b",
                "q",
                "r",
                "s",
                "det",
                "min_eigenvalue",
                "psd",
                "expand_value",
                "strict",
            ],
            &rows,
        )?;
        outputs.push("gram.csv".into());
    }
    Ok(outputs)
}

fn embed(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let ecfg = cfg.embed.as_ref().expect("validated");
    let rep = run_embedding(ecfg)?;
    fs::write(
        out.join("embedding_report.json"),
        serde_json::to_string_pretty(&rep)?,
    )?;
    let mut outputs = vec!["embedding_report.json".to_string()];
    for r in &rep.records {
        let name = format!("embedding_N{}.csv", num(r.n));
        let rows: Vec<Vec<String>> = r
            .series
            .iter()
            .map(|s| {
                vec![
                    num(s.t),
                    num(s.err_l2),
                    num(s.band1),
                    num(s.band3),
                    num(s.band5),
                ]
            })
            .collect();
        write_csv(
            &out.join(&name),
            &["t", "err_L2", "band1", "band3", "band5"],
            &rows,
        )?;
        outputs.push(name);
    }
    Ok(outputs)
}

fn gram_scan(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let mut rows = Vec::new();
    let mut viol = Vec::new();
    for &p in &cfg.gram_scan.p_list {
        let rep = region_scan(p, cfg.gram_scan.resolution)?;
        rows.push(vec![
            num(p),
            num(rep.grid_resolution),
            rep.points_tested.to_string(),
            num(rep.min_expand_value),
            rep.violations.len().to_string(),
        ]);
        for (q, r, s, v) in &rep.violations {
            viol.push(vec![num(p), num(*q), num(*r), num(*s), num(*v)]);
        }
    }
    write_csv(
        &out.join("gram_scan.csv"),
        &[
            "p",
            "resolution",
            "points_tested",
            "min_expand_value",
            "n_violations",
        ],
        &rows,
    )?;
    write_csv(
        &out.join("gram_violations.csv"),
        &["p", "q", "r", "s", "expand_value"],
        &viol,
    )?;
    Ok(vec!["gram_scan.csv".into(), "gram_violations.csv".into()])
}

/// One ensemble member's datum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Member {
    pub amplitude: f64,
    pub width: f64,
    pub center: f64,
}

/// Draws the ensemble from ChaCha8 seeded with `seed`, in the order amplitude, width, center.
pub fn draw_ensemble(s: &NormsSection, seed: u64) -> Vec<Member> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |r: [f64; 2]| {
        if r[0] == r[1] {
            r[0]
        } else {
            rng.random_range(r[0]..r[1])
        }
    };
    (0..s.members)
        .map(|_| {
            let amplitude = draw(s.amplitude_range);
            let width = draw(s.width_range);
            let center = draw(s.center_range);
            Member {
                amplitude,
                width,
                center,
            }
        })
        .collect()
}

/// Mixed norm of one member's evolution, streamed; returns `(mass, value, coarse_value)`.
pub fn member_norm(
    m: &Member,
    model: &ModelSpec,
    grid: &GridSpec,
    stepper: &StepperConfig,
    t_final: f64,
    sample_dt: f64,
    s: &NormsSection,
) -> Result<(f64, f64, f64)> {
    let mut u0 = gaussian(m.amplitude, m.width, m.center, grid);
    if !model.is_real() {
        u0 = Field::new(*grid, u0.into_values(), false)?;
    }
    let mut acc = MixedNormAccumulator::new(s.outer, s.q_time, s.r_space, s.frac_order, sample_dt)?;
    evolve_with(&u0, model, stepper, t_final, sample_dt, |_, f| acc.push(f))?;
    let rep = acc.finish();
    Ok((mass(&u0), rep.value, rep.coarse_value))
}

fn norms(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let s = &cfg.norms;
    let members = draw_ensemble(s, cfg.seed);
    let mut rows = Vec::with_capacity(members.len());
    for (i, m) in members.iter().enumerate() {
        let (ms, v, c) = member_norm(
            m,
            &cfg.model,
            &cfg.grid,
            &cfg.stepper,
            cfg.t_final,
            cfg.sample_dt,
            s,
        )?;
        let refined = if s.refine {
            let g2 = GridSpec::new(
                2 * cfg.grid.num_points(),
                cfg.grid.domain_length(),
                cfg.grid.origin(),
            )?;
            let mut st = cfg.stepper;
            st.dt *= 0.5;
            let (m2, v2, _) =
                member_norm(m, &cfg.model, &g2, &st, cfg.t_final, 0.5 * cfg.sample_dt, s)?;
            v2 / m2.sqrt()
        } else {
            f64::NAN
        };
        rows.push(vec![
            i.to_string(),
            num(m.amplitude),
            num(m.width),
            num(m.center),
            num(ms),
            num(v),
            num(c),
            num(v / ms.sqrt()),
            num(refined),
        ]);
    }
    write_csv(
        &out.join("norms.csv"),
        &[
            "member",
            "amplitude",
            "width",
            "center",
            "mass",
            "norm",
            "coarse_norm",
            "ratio",
            "refined_ratio",
        ],
        &rows,
    )?;
    Ok(vec!["norms.csv".into()])
}

/// Default output directory for a config: `out_dir` if set, else `runs/<experiment>`.
pub fn default_out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.clone().unwrap_or_else(|| {
        let name = serde_json::to_value(cfg.experiment)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_else(|| "run".into());
        PathBuf::from("runs").join(name)
    })
}
