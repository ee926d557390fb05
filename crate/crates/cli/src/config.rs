//! Shared flags and the optional TOML file that supplies their defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;

use pansharp_core::{DegradeConfig, DistortionForm, QMode};

pub const DEFAULT_RATIO: usize = 4;

/// Flags accepted by every subcommand. Unset flags fall back to `--config`,
/// then to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct SharedArgs {
    /// PAN/MS resolution ratio [default: 4]
    #[arg(long, global = true)]
    pub ratio: Option<usize>,
    /// Gaussian blur sigma for degradation [default: ratio / 2]
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Q aggregation: global, windowed, windowed:N or windowed:N/S [default: windowed:32]
    #[arg(long, global = true, value_parser = parse_q_mode)]
    pub q_mode: Option<QMode>,
    /// Worker threads for per-patch work [default: all cores]
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Base random seed [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file with defaults for the flags above
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

fn parse_q_mode(s: &str) -> Result<QMode, String> {
    s.parse().map_err(|e: pansharp_core::Error| e.to_string())
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub ratio: Option<usize>,
    pub sigma: Option<f64>,
    pub q_mode: Option<QMode>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub distortion_form: Option<DistortionForm>,
    pub ridge: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Effective settings after merging flags, config file and defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub ratio: usize,
    ratio_explicit: bool,
    pub sigma: Option<f64>,
    pub q_mode: QMode,
    pub jobs: Option<usize>,
    pub seed: u64,
    pub distortion_form: DistortionForm,
    pub ridge: f64,
}

impl Settings {
    pub fn resolve(args: &SharedArgs) -> Result<Self> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        Ok(Self::merge(args, &file))
    }

    pub fn merge(args: &SharedArgs, file: &FileConfig) -> Self {
        let ratio = args.ratio.or(file.ratio);
        Self {
            ratio: ratio.unwrap_or(DEFAULT_RATIO),
            ratio_explicit: ratio.is_some(),
            sigma: args.sigma.or(file.sigma),
            q_mode: args.q_mode.or(file.q_mode).unwrap_or_default(),
            jobs: args.jobs.or(file.jobs),
            seed: args.seed.or(file.seed).unwrap_or(0),
            distortion_form: file.distortion_form.unwrap_or_default(),
            ridge: file.ridge.unwrap_or(0.0),
        }
    }

    /// The ratio for data whose sensor declares `declared`; an explicit
    /// `--ratio` must agree with it.
    pub fn ratio_for(&self, declared: usize) -> Result<usize> {
        if self.ratio_explicit && self.ratio != declared {
            bail!("--ratio {} contradicts the manifest sensor ratio {declared}", self.ratio);
        }
        Ok(declared)
    }

    pub fn degrade_config(&self, ratio: usize) -> Result<DegradeConfig> {
        let mut cfg = DegradeConfig::for_ratio(ratio);
        if let Some(s) = self.sigma {
            cfg = cfg.with_sigma(s);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = self.jobs {
            if j == 0 {
                bail!("--jobs must be at least 1");
            }
            b = b.num_threads(j);
        }
        Ok(b.build()?)
    }
}
