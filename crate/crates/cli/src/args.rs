use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use imdd_core::ThresholdRule;

use crate::config::{OmaGrid, OptimizeMode, Preset, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "imdd",
    version,
    about = "SER, MAP thresholds and shaping for IM-DD links with laser RIN"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic and Monte Carlo SER plus mutual information over an OMA grid.
    Sweep(SweepArgs),
    /// All four threshold variants at one operating point.
    Thresholds(ThresholdsArgs),
    /// Geometric or probabilistic shaping at one operating point.
    Optimize(OptimizeArgs),
}

#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Comma-separated threshold rules: optimal, uniform-exact, approx, awgn.
    #[arg(long)]
    pub rules: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub min_errors: Option<u64>,
    #[arg(long)]
    pub max_symbols: Option<u64>,
    /// Switch laser RIN off.
    #[arg(long)]
    pub rin_off: bool,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub oma_start: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub oma_stop: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub oma_step: Option<f64>,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    /// Analytic columns only.
    #[arg(long)]
    pub no_mc: bool,
}

#[derive(Debug, Default, Args)]
pub struct ThresholdsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Operating point in dBm.
    #[arg(long, allow_hyphen_values = true)]
    pub oma: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub mode: Option<OptimizeMode>,
    #[arg(long, allow_hyphen_values = true)]
    pub oma: Option<f64>,
    /// Entropy floor in bits (required for ps-ser).
    #[arg(long)]
    pub h_min: Option<f64>,
    /// Where to write the optimized constellation document.
    #[arg(long)]
    pub out_constellation: Option<PathBuf>,
}

pub fn parse_rules(list: &str) -> Result<Vec<ThresholdRule>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e: String| CliError::config("--rules", e)))
        .collect()
}

impl CommonArgs {
    /// Loads `--config` (or an empty document) and applies the flags on top.
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_path(path)?,
            None => RunConfig::default(),
        };
        if let Some(p) = self.preset {
            cfg.preset = Some(p);
        }
        if let Some(r) = &self.rules {
            cfg.rules = Some(parse_rules(r)?);
        }
        if let Some(s) = self.seed {
            cfg.mc.seed = Some(s);
        }
        if let Some(n) = self.min_errors {
            cfg.mc.min_errors = Some(n);
        }
        if let Some(n) = self.max_symbols {
            cfg.mc.max_symbols = Some(n);
            // keep small caps usable without also passing a batch size
            if cfg.mc.batch.is_none() {
                cfg.mc.batch = Some(n.min(imdd_core::McConfig::default().batch));
            }
        }
        if self.rin_off {
            cfg.link.rin_db_hz = Some(crate::config::RinSetting::Named("off".into()));
        }
        if let Some(p) = &self.out_json {
            cfg.outputs.get_or_insert_with(Default::default).json = Some(p.clone());
        }
        Ok(cfg)
    }
}

impl SweepArgs {
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = self.common.load()?;
        if self.oma_start.is_some() || self.oma_stop.is_some() || self.oma_step.is_some() {
            let base = cfg.oma_grid_dbm;
            let pick = |flag: Option<f64>, from: Option<f64>, name: &str| {
                flag.or(from)
                    .ok_or_else(|| CliError::config(format!("--oma-{name}"), "required to build the grid"))
            };
            cfg.oma_grid_dbm = Some(OmaGrid {
                start: pick(self.oma_start, base.map(|g| g.start), "start")?,
                stop: pick(self.oma_stop, base.map(|g| g.stop), "stop")?,
                step: pick(self.oma_step, base.map(|g| g.step), "step")?,
            });
        }
        if let Some(p) = &self.out_csv {
            cfg.outputs.get_or_insert_with(Default::default).csv = Some(p.clone());
        }
        if self.no_mc {
            cfg.mc.enabled = Some(false);
        }
        Ok(cfg)
    }
}

impl ThresholdsArgs {
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = self.common.load()?;
        if self.oma.is_some() {
            cfg.oma_dbm = self.oma;
        }
        Ok(cfg)
    }
}

impl OptimizeArgs {
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = self.common.load()?;
        if self.oma.is_some() {
            cfg.oma_dbm = self.oma;
        }
        if self.mode.is_some() {
            cfg.optimize.mode = self.mode;
        }
        if self.h_min.is_some() {
            cfg.optimize.h_min = self.h_min;
        }
        if let Some(p) = &self.out_constellation {
            cfg.outputs.get_or_insert_with(Default::default).constellation = Some(p.clone());
        }
        Ok(cfg)
    }
}
