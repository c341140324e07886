//! Run configuration: a JSON document with optional preset expansion.
//!
//! A preset supplies the reference link and an equally spaced PAM geometry;
//! every explicit field in the document (and every command-line flag)
//! overrides it. Without a preset, the link and constellation must be given
//! in full.

use std::fmt;
use std::path::{Path, PathBuf};

use imdd_core::{Constellation, LinkParams, McConfig, ThresholdRule};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Largest number of OMA points a grid may expand to.
pub const MAX_GRID_POINTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Pam4,
    Pam6,
    Pam8,
}

impl Preset {
    pub fn order(self) -> usize {
        match self {
            Preset::Pam4 => 4,
            Preset::Pam6 => 6,
            Preset::Pam8 => 8,
        }
    }

    pub fn link(self) -> LinkParams {
        LinkParams::reference_for_order(self.order()).expect("preset orders have reference links")
    }

    pub fn constellation(self) -> Constellation {
        Constellation::equally_spaced(self.order()).expect("preset orders are valid")
    }
}

/// RIN level in dB/Hz, or `"off"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RinSetting {
    Db(f64),
    Named(String),
}

impl RinSetting {
    fn resolve(&self) -> Result<f64, String> {
        match self {
            RinSetting::Db(v) => Ok(*v),
            RinSetting::Named(s) if s == "off" => Ok(f64::NEG_INFINITY),
            RinSetting::Named(s) => Err(format!("expected a number or \"off\", got {s:?}")),
        }
    }

    fn from_db(v: f64) -> Self {
        if v.is_finite() {
            RinSetting::Db(v)
        } else {
            RinSetting::Named("off".into())
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rin_db_hz: Option<RinSetting>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub er_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_db_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub responsivity_a_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal_asd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_hz: Option<f64>,
}

impl LinkOverrides {
    fn full(p: &LinkParams) -> Self {
        Self {
            rin_db_hz: Some(RinSetting::from_db(p.rin_db_hz)),
            er_db: Some(p.er_db),
            length_km: Some(p.length_km),
            alpha_db_km: Some(p.alpha_db_km),
            responsivity_a_w: Some(p.responsivity_a_w),
            thermal_asd: Some(p.thermal_asd),
            bandwidth_hz: Some(p.bandwidth_hz),
        }
    }

    fn apply(&self, base: Option<LinkParams>) -> Result<LinkParams, CliError> {
        let need = |field: &str, v: Option<f64>, b: Option<f64>| {
            v.or(b)
                .ok_or_else(|| CliError::config(format!("link.{field}"), "required when no preset is given"))
        };
        let rin = match &self.rin_db_hz {
            Some(r) => Some(r.resolve().map_err(|e| CliError::config("link.rin_db_hz", e))?),
            None => None,
        };
        let p = LinkParams {
            rin_db_hz: need("rin_db_hz", rin, base.map(|b| b.rin_db_hz))?,
            er_db: need("er_db", self.er_db, base.map(|b| b.er_db))?,
            length_km: need("length_km", self.length_km, base.map(|b| b.length_km))?,
            alpha_db_km: need("alpha_db_km", self.alpha_db_km, base.map(|b| b.alpha_db_km))?,
            responsivity_a_w: need(
                "responsivity_a_w",
                self.responsivity_a_w,
                base.map(|b| b.responsivity_a_w),
            )?,
            thermal_asd: need("thermal_asd", self.thermal_asd, base.map(|b| b.thermal_asd))?,
            bandwidth_hz: need("bandwidth_hz", self.bandwidth_hz, base.map(|b| b.bandwidth_hz))?,
        };
        p.validate().map_err(|e| match e {
            imdd_core::Error::InvalidLink { field, reason } => CliError::config(format!("link.{field}"), reason),
            other => CliError::config("link", other.to_string()),
        })?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmaGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl OmaGrid {
    /// Grid points `start + k step` up to and including `stop`.
    pub fn expand(&self) -> Result<Vec<f64>, CliError> {
        let field = |f: &str| format!("oma_grid_dbm.{f}");
        for (name, v) in [("start", self.start), ("stop", self.stop), ("step", self.step)] {
            if !v.is_finite() {
                return Err(CliError::config(field(name), format!("must be finite, got {v}")));
            }
        }
        if self.step <= 0.0 {
            return Err(CliError::config(
                field("step"),
                format!("must be > 0, got {}", self.step),
            ));
        }
        if self.stop < self.start {
            return Err(CliError::config(
                field("stop"),
                format!("must be >= start ({})", self.start),
            ));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        if n > MAX_GRID_POINTS {
            return Err(CliError::config(
                field("step"),
                format!("grid expands to {n} points (max {MAX_GRID_POINTS})"),
            ));
        }
        Ok((0..n).map(|k| self.start + k as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enabled: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_errors: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_symbols: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizeMode {
    Gs,
    PsSer,
    PsMi,
}

impl fmt::Display for OptimizeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizeMode::Gs => "gs",
            OptimizeMode::PsSer => "ps-ser",
            OptimizeMode::PsMi => "ps-mi",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<OptimizeMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
}

impl OptimizeSection {
    fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constellation: Option<PathBuf>,
}

/// The configuration document as written by the user.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub link: LinkOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constellation: Option<Constellation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oma_grid_dbm: Option<OmaGrid>,
    /// Operating point for `thresholds` and `optimize`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oma_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<Vec<ThresholdRule>>,
    #[serde(default)]
    pub mc: McOverrides,
    #[serde(default, skip_serializing_if = "OptimizeSection::is_empty")]
    pub optimize: OptimizeSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Outputs>,
}

pub const DEFAULT_RULES: [ThresholdRule; 2] = [ThresholdRule::OptimalExact, ThresholdRule::UniformApprox];

impl RunConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let at = format!("{origin}:{}:{}", inner.line(), inner.column());
            let field = if path == "." { at } else { format!("{at}: {path}") };
            let msg = inner.to_string();
            let msg = msg
                .rsplit_once(" at line ")
                .map_or(msg.as_str(), |(m, _)| m)
                .to_string();
            CliError::config(field, msg)
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(path.display().to_string(), format!("cannot read: {e}")))?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// Expands the preset and checks every field.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let link = self.link.apply(self.preset.map(Preset::link))?;
        let constellation = match (&self.constellation, self.preset) {
            (Some(c), _) => c.clone(),
            (None, Some(p)) => p.constellation(),
            (None, None) => return Err(CliError::config("constellation", "required when no preset is given")),
        };
        let grid = self.oma_grid_dbm.map(|g| g.expand()).transpose()?;
        if let Some(oma) = self.oma_dbm {
            if !oma.is_finite() {
                return Err(CliError::config("oma_dbm", format!("must be finite, got {oma}")));
            }
        }
        let defaults = McConfig::default();
        let mc = McConfig {
            seed: self.mc.seed.unwrap_or(defaults.seed),
            min_errors: self.mc.min_errors.unwrap_or(defaults.min_errors),
            max_symbols: self.mc.max_symbols.unwrap_or(defaults.max_symbols),
            batch: self.mc.batch.unwrap_or(defaults.batch),
        };
        mc.validate().map_err(|e| match e {
            imdd_core::Error::InvalidMcConfig { field, reason } => CliError::config(format!("mc.{field}"), reason),
            other => CliError::config("mc", other.to_string()),
        })?;
        if let Some(h) = self.optimize.h_min {
            if !(h > 0.0 && h.is_finite()) {
                return Err(CliError::config("optimize.h_min", format!("must be > 0, got {h}")));
            }
        }
        if self.optimize.restarts == Some(0) {
            return Err(CliError::config("optimize.restarts", "must be >= 1"));
        }
        Ok(Resolved {
            link,
            constellation,
            grid: self.oma_grid_dbm,
            grid_points: grid,
            oma_dbm: self.oma_dbm,
            rules: self.rules.clone().unwrap_or_else(|| DEFAULT_RULES.to_vec()),
            mc,
            mc_enabled: self.mc.enabled.unwrap_or(true),
            optimize: self.optimize,
            outputs: self.outputs.clone().unwrap_or_default(),
        })
    }
}

/// Fully expanded configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub link: LinkParams,
    pub constellation: Constellation,
    pub grid: Option<OmaGrid>,
    pub grid_points: Option<Vec<f64>>,
    pub oma_dbm: Option<f64>,
    pub rules: Vec<ThresholdRule>,
    pub mc: McConfig,
    pub mc_enabled: bool,
    pub optimize: OptimizeSection,
    pub outputs: Outputs,
}

impl Resolved {
    /// Self-contained document reproducing this run (output paths excluded).
    pub fn echo(&self) -> RunConfig {
        RunConfig {
            preset: None,
            link: LinkOverrides::full(&self.link),
            constellation: Some(self.constellation.clone()),
            oma_grid_dbm: self.grid,
            oma_dbm: self.oma_dbm,
            rules: Some(self.rules.clone()),
            mc: McOverrides {
                enabled: Some(self.mc_enabled),
                seed: Some(self.mc.seed),
                min_errors: Some(self.mc.min_errors),
                max_symbols: Some(self.mc.max_symbols),
                batch: Some(self.mc.batch),
            },
            optimize: self.optimize,
            outputs: None,
        }
    }

    pub fn require_grid(&self) -> Result<&[f64], CliError> {
        self.grid_points
            .as_deref()
            .ok_or_else(|| CliError::config("oma_grid_dbm", "required (or --oma-start/--oma-stop/--oma-step)"))
    }

    pub fn require_oma(&self) -> Result<f64, CliError> {
        self.oma_dbm
            .ok_or_else(|| CliError::config("oma_dbm", "required (or --oma)"))
    }
}
