//! The run configuration: every flag mirrored into one validated record.
//!
//! Precedence is command-line flag, then `--config` file, then default. The
//! file uses the same JSON schema as [`RunConfig`]; missing keys fall back to
//! defaults.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use lesion_change::change::{ChangeParams, RuleRegistry, DEFAULT_MARGIN, DEFAULT_MIN_VOXELS, DEFAULT_Q, DEFAULT_RULE};
use lesion_change::eval::DEFAULT_GRID_SPACING;
use lesion_change::phantom::PhantomConfig;
use lesion_change::Connectivity;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rule: String,
    pub q: f64,
    pub margin: f64,
    pub min_voxels: usize,
    pub connectivity: Connectivity,
    pub grid_spacing: f64,
    /// Worker threads; `None` uses one per core.
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    /// Sweep specifications such as `q=0.01,0.05`.
    pub sweep: Vec<String>,
    pub phantom: PhantomConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            rule: DEFAULT_RULE.into(),
            q: DEFAULT_Q,
            margin: DEFAULT_MARGIN,
            min_voxels: DEFAULT_MIN_VOXELS,
            connectivity: Connectivity::default(),
            grid_spacing: DEFAULT_GRID_SPACING,
            jobs: None,
            out: None,
            sweep: Vec::new(),
            phantom: PhantomConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
    }

    pub fn change_params(&self) -> ChangeParams {
        ChangeParams {
            rule: self.rule.clone(),
            q: self.q,
            margin: self.margin,
            min_voxels: self.min_voxels,
            connectivity: self.connectivity,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.change_params().validate(&RuleRegistry::builtin())?;
        if !(self.grid_spacing.is_finite() && self.grid_spacing > 0.0) {
            return Err(CliError::validation(format!(
                "--grid-spacing {} must be positive",
                self.grid_spacing
            )));
        }
        if self.jobs == Some(0) {
            return Err(CliError::validation("--jobs must be at least 1"));
        }
        Ok(())
    }

    pub fn out_dir(&self) -> Result<&Path, CliError> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::validation("--out is required"))
    }
}

/// Flags shared by every subcommand. Unset flags defer to the config file.
#[derive(Debug, Clone, Default, Args)]
#[command(next_help_heading = "Run options")]
pub struct CommonArgs {
    /// JSON run configuration; flags given on the command line take precedence
    #[arg(long, value_name = "FILE", global = true)]
    pub config: Option<PathBuf>,

    /// Change rule: confidence | margin | naive [default: confidence]
    #[arg(long, global = true)]
    pub rule: Option<String>,

    /// Flip-probability threshold; a voxel is confident when flip < q [default: 0.05]
    #[arg(long, global = true)]
    pub q: Option<f64>,

    /// Score margin; lesion when p > 0.5 + m, non-lesion when p < 0.5 - m [default: 0.45]
    #[arg(long, global = true)]
    pub margin: Option<f64>,

    /// Components smaller than this many voxels are removed [default: 12]
    #[arg(long, global = true)]
    pub min_voxels: Option<usize>,

    /// Voxel connectivity: 6 | 18 | 26 [default: 26]
    #[arg(long, global = true)]
    pub connectivity: Option<Connectivity>,

    /// Isotropic spacing of the common grid, in mm [default: 1]
    #[arg(long, global = true)]
    pub grid_spacing: Option<f64>,

    /// Worker threads [default: one per core]
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Output directory
    #[arg(long, value_name = "DIR", global = true)]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    /// Loads the config file (if any) and overlays the flags that were given.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.rule {
            cfg.rule = v.clone();
        }
        if let Some(v) = self.q {
            cfg.q = v;
        }
        if let Some(v) = self.margin {
            cfg.margin = v;
        }
        if let Some(v) = self.min_voxels {
            cfg.min_voxels = v;
        }
        if let Some(v) = self.connectivity {
            cfg.connectivity = v;
        }
        if let Some(v) = self.grid_spacing {
            cfg.grid_spacing = v;
        }
        if self.jobs.is_some() {
            cfg.jobs = self.jobs;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        Ok(cfg)
    }
}
