use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{KVariant, Outer};
use crate::embedding::EmbeddingConfig;
use crate::error::{Error, Result};
use crate::evolution::{ModelSpec, StepperConfig};
use crate::profiles::{ProfileKind, ProfileSpec};
use crate::spectral::GridSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    #[serde(alias = "SIMULATE")]
    Simulate,
    #[serde(alias = "DIAGNOSE")]
    Diagnose,
    #[serde(alias = "EMBED")]
    Embed,
    #[serde(alias = "GRAM_SCAN")]
    GramScan,
    #[serde(alias = "NORMS")]
    Norms,
}

/// Flag names accepted in `[flags]`.
pub const KNOWN_FLAGS: [&str; 2] = ["write_trajectory", "gram_stats"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseSection {
    /// Horizons for the dispersion functional sup; empty skips it.
    #[serde(default)]
    pub windows: Vec<f64>,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        DiagnoseSection {
            windows: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramScanSection {
    #[serde(default = "default_p_list")]
    pub p_list: Vec<f64>,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
}

fn default_p_list() -> Vec<f64> {
    vec![3f64.sqrt(), 2.0, 5.0]
}
fn default_resolution() -> f64 {
    0.01
}

impl Default for GramScanSection {
    fn default() -> Self {
        GramScanSection {
            p_list: default_p_list(),
            resolution: default_resolution(),
        }
    }
}

/// Seeded Gaussian ensemble for mixed space-time norms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormsSection {
    #[serde(default = "default_members")]
    pub members: usize,
    #[serde(default = "default_amplitude_range")]
    pub amplitude_range: [f64; 2],
    #[serde(default = "default_width_range")]
    pub width_range: [f64; 2],
    #[serde(default = "default_center_range")]
    pub center_range: [f64; 2],
    /// Exponent of the time integral.
    #[serde(default = "default_q_time")]
    pub q_time: f64,
    /// Exponent of the space integral.
    #[serde(default = "default_r_space")]
    pub r_space: f64,
    #[serde(default)]
    pub frac_order: f64,
    #[serde(default = "default_outer")]
    pub outer: Outer,
    /// Repeat every member with twice the points and half the sample spacing.
    #[serde(default)]
    pub refine: bool,
}

fn default_members() -> usize {
    20
}
fn default_amplitude_range() -> [f64; 2] {
    [0.5, 1.0]
}
fn default_width_range() -> [f64; 2] {
    [0.75, 1.25]
}
fn default_center_range() -> [f64; 2] {
    [-1.0, 1.0]
}
fn default_q_time() -> f64 {
    10.0
}
fn default_r_space() -> f64 {
    5.0
}
fn default_outer() -> Outer {
    Outer::Space
}

impl Default for NormsSection {
    fn default() -> Self {
        NormsSection {
            members: default_members(),
            amplitude_range: default_amplitude_range(),
            width_range: default_width_range(),
            center_range: default_center_range(),
            q_time: default_q_time(),
            r_space: default_r_space(),
            frac_order: 0.0,
            outer: default_outer(),
            refine: false,
        }
    }
}

fn default_model() -> ModelSpec {
    ModelSpec::gkdv(5.0, 1.0).expect("static model")
}
fn default_profile() -> ProfileSpec {
    ProfileSpec::gaussian(1.0, 1.0, 0.0)
}
fn default_grid() -> GridSpec {
    GridSpec::centered(1024, 80.0).expect("static grid")
}
fn default_stepper() -> StepperConfig {
    StepperConfig::new(1e-3)
}
fn default_t_final() -> f64 {
    1.0
}
fn default_sample_dt() -> f64 {
    0.05
}

/// Everything one run needs. Every field has a default except `experiment`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub k_variant: KVariant,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_model")]
    pub model: ModelSpec,
    #[serde(default = "default_profile")]
    pub profile: ProfileSpec,
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    #[serde(default = "default_stepper")]
    pub stepper: StepperConfig,
    #[serde(default)]
    pub flags: BTreeMap<String, bool>,
    #[serde(default)]
    pub diagnose: DiagnoseSection,
    #[serde(default)]
    pub gram_scan: GramScanSection,
    #[serde(default)]
    pub norms: NormsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embed: Option<EmbeddingConfig>,
}

impl RunConfig {
    pub fn flag(&self, name: &str, default: bool) -> bool {
        self.flags.get(name).copied().unwrap_or(default)
    }

    /// Checks every invariant, naming the offending field.
    pub fn validate(&mut self) -> Result<()> {
        self.model = self.model.validated()?;
        self.stepper.validate()?;
        let unknown: Vec<&String> = self
            .flags
            .keys()
            .filter(|k| !KNOWN_FLAGS.contains(&k.as_str()))
            .collect();
        if !unknown.is_empty() {
            return Err(Error::Config(format!(
                "flags: unknown flag(s) {unknown:?}; known flags are {KNOWN_FLAGS:?}"
            )));
        }
        match self.experiment {
            Experiment::Simulate | Experiment::Diagnose | Experiment::Norms => {
                for (name, v) in [("t_final", self.t_final), ("sample_dt", self.sample_dt)] {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(Error::Config(format!("{name} must be positive, got {v}")));
                    }
                }
                let n = (self.t_final / self.sample_dt).round();
                if (n * self.sample_dt - self.t_final).abs() > 1e-9 * self.t_final {
                    return Err(Error::Config(format!(
                        "t_final = {} is not a multiple of sample_dt = {}",
                        self.t_final, self.sample_dt
                    )));
                }
            }
            _ => {}
        }
        match self.experiment {
            Experiment::Simulate | Experiment::Diagnose => {
                self.profile.validate()?;
                if self.profile.kind == ProfileKind::EmbeddingAnsatz {
                    return Err(Error::Config(
                        "profile.kind: embedding_ansatz data comes from the embed experiment"
                            .into(),
                    ));
                }
                if matches!(
                    self.profile.kind,
                    ProfileKind::GroundState | ProfileKind::Soliton
                ) && self.profile.p != self.model.p
                {
                    return Err(Error::Config(format!(
                        "profile.p = {} differs from model.p = {}",
                        self.profile.p, self.model.p
                    )));
                }
                for (i, &w) in self.diagnose.windows.iter().enumerate() {
                    if !(w > 0.0 && w <= self.t_final * (1.0 + 1e-12)) {
                        return Err(Error::Config(format!(
                            "diagnose.windows[{i}] = {w} must lie in (0, t_final]"
                        )));
                    }
                }
            }
            Experiment::Embed => {
                let e = self.embed.as_ref().ok_or_else(|| {
                    Error::Config("embed: the embed experiment needs an [embed] section".into())
                })?;
                e.validate()
                    .map_err(|err| Error::Config(format!("embed: {err}")))?;
            }
            Experiment::GramScan => {
                if self.gram_scan.p_list.is_empty() {
                    return Err(Error::Config("gram_scan.p_list is empty".into()));
                }
                for (i, &p) in self.gram_scan.p_list.iter().enumerate() {
                    if !(p.is_finite() && p > 1.0) {
                        return Err(Error::Config(format!(
                            "gram_scan.p_list[{i}] must be > 1, got {p}"
                        )));
                    }
                }
                let h = self.gram_scan.resolution;
                if !(h > 0.0 && h <= 0.1) {
                    return Err(Error::Config(format!(
                        "gram_scan.resolution must lie in (0, 0.1], got {h}"
                    )));
                }
            }
            Experiment::Norms => {
                let s = &self.norms;
                if s.members == 0 {
                    return Err(Error::Config("norms.members must be at least 1".into()));
                }
                for (name, r) in [
                    ("amplitude_range", s.amplitude_range),
                    ("width_range", s.width_range),
                    ("center_range", s.center_range),
                ] {
                    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
                        return Err(Error::Config(format!(
                            "norms.{name} must be an ordered pair, got {r:?}"
                        )));
                    }
                }
                if !(s.width_range[0] > 0.0) {
                    return Err(Error::Config("norms.width_range must be positive".into()));
                }
                for (name, v) in [("q_time", s.q_time), ("r_space", s.r_space)] {
                    if !(v >= 1.0) {
                        return Err(Error::Config(format!("norms.{name} must be >= 1, got {v}")));
                    }
                }
                if !(s.frac_order >= 0.0) {
                    return Err(Error::Config(format!(
                        "norms.frac_order must be >= 0, got {}",
                        s.frac_order
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialise config: {e}")))
    }
}

/// Keys present in `given` but absent from `resolved`, as dotted paths.
fn unknown_keys(given: &toml::Table, resolved: &toml::Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in given {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match (v, resolved.get(k)) {
            (_, None) => out.push(path),
            (toml::Value::Table(a), Some(toml::Value::Table(b))) => unknown_keys(a, b, &path, out),
            _ => {}
        }
    }
}

/// Parses, applies defaults, rejects unknown keys and validates.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let given: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(format!("config syntax: {e}")))?;
    let mut cfg: RunConfig = toml::Value::Table(given.clone())
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("config: {e}")))?;
    let resolved = toml::Table::try_from(&cfg)
        .map_err(|e| Error::Config(format!("cannot serialise config: {e}")))?;
    let mut unknown = Vec::new();
    unknown_keys(&given, &resolved, "", &mut unknown);
    if !unknown.is_empty() {
        return Err(Error::Config(format!(
            "unknown config keys: {}",
            unknown.join(", ")
        )));
    }
    cfg.validate()?;
    Ok(cfg)
}
