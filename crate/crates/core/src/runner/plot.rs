use std::fs;
use std::path::{Path, PathBuf};

use crate::diagnostics::fit_slope;
use crate::error::{Error, Result};

/// `(series, source file, x column, y column)`.
const SERIES: [(&str, &str, &str, &str); 8] = [
    ("mass", "diagnostics.csv", "t", "mass"),
    ("energy", "diagnostics.csv", "t", "energy"),
    ("centres_gap", "diagnostics.csv", "t", "gap"),
    ("gap", "gap.csv", "t", "gap"),
    ("dispersion", "dispersion.csv", "T", "sup"),
    ("gram_scan", "gram_scan.csv", "p", "min_expand_value"),
    ("norms", "norms.csv", "member", "ratio"),
    (
        "embedding_error",
        "embedding_report.json",
        "N",
        "sup_error_L2",
    ),
];

/// Series whose source file exists in `run_dir`.
pub fn available_series(run_dir: &Path) -> Vec<&'static str> {
    SERIES
        .iter()
        .filter(|(_, file, _, _)| run_dir.join(file).exists())
        .map(|(name, ..)| *name)
        .collect()
}

fn csv_columns(path: &Path, x: &str, y: &str) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    let h = r.headers()?.clone();
    let col = |name: &str| {
        h.iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Config(format!("{}: no column {name}", path.display())))
    };
    let (ix, iy) = (col(x)?, col(y)?);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::Config(format!("{}: bad number {:?}", path.display(), &rec[i])))
        };
        out.push((parse(ix)?, parse(iy)?));
    }
    Ok(out)
}

fn embedding_points(path: &Path) -> Result<Vec<(f64, f64)>> {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    let recs = v["records"]
        .as_array()
        .ok_or_else(|| Error::Config(format!("{}: no records", path.display())))?;
    let mut pts: Vec<(f64, f64)> = recs
        .iter()
        .filter_map(|r| Some((r["n"].as_f64()?, r["sup_error_l2"].as_f64()?)))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pts)
}

/// Writes `plot_<series>.dat`: whitespace-separated columns under one `#` header line.
pub fn emit_plot_data(run_dir: &Path, series: &str) -> Result<PathBuf> {
    let Some(&(name, file, x, y)) = SERIES.iter().find(|s| s.0 == series) else {
        return Err(Error::Config(format!(
            "unknown series '{series}'; available: {}",
            available_series(run_dir).join(", ")
        )));
    };
    let src = run_dir.join(file);
    if !src.exists() {
        return Err(Error::Config(format!(
            "series '{series}' needs {file}, which this run did not write; available: {}",
            available_series(run_dir).join(", ")
        )));
    }
    let pts = if file.ends_with(".json") {
        embedding_points(&src)?
    } else {
        csv_columns(&src, x, y)?
    };
    let mut header = format!("# {x} {y}");
    if name == "dispersion" {
        let logs: Vec<(f64, f64)> = pts
            .iter()
            .filter(|p| p.0 > 0.0 && p.1 > 0.0)
            .map(|p| (p.0.ln(), p.1.ln()))
            .collect();
        let (lx, ly): (Vec<f64>, Vec<f64>) = logs.into_iter().unzip();
        match fit_slope(&lx, &ly) {
            Some(c) => header.push_str(&format!("  fitted_exponent={c:?}")),
            None => header.push_str("  fitted_exponent=undefined"),
        }
    }
    let mut text = header;
    text.push('\n');
    for (a, b) in &pts {
        text.push_str(&format!("{a:?} {b:?}\n"));
    }
    let path = run_dir.join(format!("plot_{name}.dat"));
    fs::write(&path, text)?;
    Ok(path)
}
