//! Snapshot and trajectory files.
//!
//! A snapshot is a JSON sidecar plus a raw little-endian array of `(re, im)`
//! float64 pairs. Values round-trip bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{ModelSpec, StepperConfig, Trajectory};
use crate::spectral::{Field, GridSpec, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub num_points: usize,
    pub domain_length: f64,
    pub origin: f64,
    pub time: f64,
    pub is_real: bool,
    pub model: ModelSpec,
    /// Binary file name, relative to the sidecar.
    pub data: String,
}

/// Writes `<stem>.json` and `<stem>.bin`; returns the sidecar path.
pub fn write_snapshot(
    dir: &Path,
    stem: &str,
    f: &Field,
    time: f64,
    model: &ModelSpec,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let g = f.grid();
    let bin = format!("{stem}.bin");
    let mut bytes = Vec::with_capacity(16 * g.num_points());
    for v in f.values() {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    fs::write(dir.join(&bin), bytes)?;
    let meta = SnapshotMeta {
        num_points: g.num_points(),
        domain_length: g.domain_length(),
        origin: g.origin(),
        time,
        is_real: f.is_real(),
        model: *model,
        data: bin,
    };
    let path = dir.join(format!("{stem}.json"));
    fs::write(&path, serde_json::to_string_pretty(&meta)?)?;
    Ok(path)
}

pub fn read_snapshot(sidecar: &Path) -> Result<(Field, SnapshotMeta)> {
    let meta: SnapshotMeta = serde_json::from_str(&fs::read_to_string(sidecar)?)?;
    let dir = sidecar.parent().unwrap_or(Path::new("."));
    let bytes = fs::read(dir.join(&meta.data))?;
    if bytes.len() != 16 * meta.num_points {
        return Err(Error::Config(format!(
            "{}: expected {} bytes, found {}",
            meta.data,
            16 * meta.num_points,
            bytes.len()
        )));
    }
    let vals = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            C64::new(re, im)
        })
        .collect();
    let grid = GridSpec::new(meta.num_points, meta.domain_length, meta.origin)?;
    Ok((Field::new(grid, vals, meta.is_real)?, meta))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub model: ModelSpec,
    pub grid: GridSpec,
    pub stepper: StepperConfig,
    pub sample_dt: f64,
    pub times: Vec<f64>,
    pub snapshots: Vec<String>,
}

/// One snapshot per sample plus `manifest.json`.
pub fn write_trajectory(dir: &Path, traj: &Trajectory, stepper: &StepperConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut names = Vec::with_capacity(traj.len());
    for (i, (t, f)) in traj.snapshots.iter().enumerate() {
        let stem = format!("snap_{i:05}");
        write_snapshot(dir, &stem, f, *t, &traj.model)?;
        names.push(format!("{stem}.json"));
    }
    let m = TrajectoryManifest {
        model: traj.model,
        grid: *traj.grid(),
        stepper: *stepper,
        sample_dt: traj.sample_dt,
        times: traj.times(),
        snapshots: names,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&m)?)?;
    Ok(())
}

pub fn read_trajectory(dir: &Path) -> Result<(Trajectory, TrajectoryManifest)> {
    let m: TrajectoryManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let mut snaps = Vec::with_capacity(m.snapshots.len());
    for name in &m.snapshots {
        let (f, meta) = read_snapshot(&dir.join(name))?;
        snaps.push((meta.time, f));
    }
    Ok((Trajectory::new(m.model, snaps, m.sample_dt)?, m))
}
