use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use netprint_core::anomaly::{
    DetectorConfig, DeviationScale, DEFAULT_CAPACITY, DEFAULT_MIN_HISTORY, DEFAULT_MULTIPLIER,
};
use netprint_core::pipeline::{ComponentCount, ReplayConfig};
use netprint_core::reduction::DEFAULT_K;
use serde::Deserialize;

pub const DEFAULT_T: usize = 2048;

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct SharedFlags {
    /// TOML file with pipeline settings
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Window length (power of two)
    #[arg(long = "t", global = true)]
    pub t: Option<usize>,
    /// Principal components to keep
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Choose k by retained energy fraction instead of --k
    #[arg(long, global = true)]
    pub energy_target: Option<f64>,
    /// Alarm when the indicator exceeds this many deviation scales
    #[arg(long, global = true)]
    pub sigma_mult: Option<f64>,
    /// Baseline history length in windows
    #[arg(long, global = true)]
    pub capacity: Option<usize>,
    /// History needed before alarms can fire
    #[arg(long, global = true)]
    pub min_history: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Baseline spread measure: rms or norm-spread
    #[arg(long, global = true)]
    pub deviation_scale: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    t: Option<usize>,
    k: Option<usize>,
    energy_target: Option<f64>,
    sigma_multiplier: Option<f64>,
    baseline_capacity: Option<usize>,
    min_history: Option<usize>,
    seed: Option<u64>,
    deviation_scale: Option<String>,
    geodb: Option<PathBuf>,
    model: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub t: usize,
    pub k: usize,
    pub energy_target: Option<f64>,
    pub sigma_multiplier: f64,
    pub baseline_capacity: usize,
    pub min_history: usize,
    pub seed: Option<u64>,
    pub deviation_scale: DeviationScale,
    pub geodb: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn resolve(flags: &SharedFlags) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => load_file(path)?,
            None => FileConfig::default(),
        };
        let scale = flags.deviation_scale.clone().or(file.deviation_scale);
        let config = PipelineConfig {
            t: flags.t.or(file.t).unwrap_or(DEFAULT_T),
            k: flags.k.or(file.k).unwrap_or(DEFAULT_K),
            energy_target: flags.energy_target.or(file.energy_target),
            sigma_multiplier: flags
                .sigma_mult
                .or(file.sigma_multiplier)
                .unwrap_or(DEFAULT_MULTIPLIER),
            baseline_capacity: flags
                .capacity
                .or(file.baseline_capacity)
                .unwrap_or(DEFAULT_CAPACITY),
            min_history: flags
                .min_history
                .or(file.min_history)
                .unwrap_or(DEFAULT_MIN_HISTORY),
            seed: flags.seed.or(file.seed),
            deviation_scale: match scale {
                Some(s) => s.parse()?,
                None => DeviationScale::default(),
            },
            geodb: file.geodb,
            model: file.model,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if !self.t.is_power_of_two() {
            bail!("--t must be a power of two, got {}", self.t);
        }
        if let Some(e) = self.energy_target {
            if !(e > 0.0 && e <= 1.0) {
                bail!("--energy-target must lie in (0, 1], got {e}");
            }
        }
        if self.baseline_capacity == 0 {
            bail!("--capacity must be positive");
        }
        if !(self.sigma_multiplier.is_finite() && self.sigma_multiplier >= 0.0) {
            bail!("--sigma-mult must be finite and non-negative");
        }
        Ok(())
    }

    pub fn components(&self) -> ComponentCount {
        match self.energy_target {
            Some(target) => ComponentCount::Energy(target),
            None => ComponentCount::Fixed(self.k),
        }
    }

    pub fn replay(&self) -> ReplayConfig {
        ReplayConfig {
            capacity: self.baseline_capacity,
            scale: self.deviation_scale,
            detector: DetectorConfig {
                multiplier: self.sigma_multiplier,
                min_history: self.min_history,
            },
        }
    }
}

fn load_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}
