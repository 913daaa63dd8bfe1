//! Experiment files for the `pipeline` command.
//!
//! Relative paths are resolved against the experiment file's directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use crate::args::Mode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Network configuration file.
    pub network: PathBuf,
    /// Trained weight checkpoint.
    pub weights: PathBuf,
    /// Labelled dataset directories.
    pub train: PathBuf,
    pub test: PathBuf,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Overrides the command-line seed when present.
    pub seed: Option<u64>,
    /// Overrides the command-line output directory when present.
    pub out_dir: Option<PathBuf>,
    /// Seconds per presentation; defaults to each stream's span.
    pub duration: Option<f64>,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    /// Hardware constants for the power estimate.
    pub hw: Option<PathBuf>,
    #[serde(default)]
    pub svm: SvmSection,
    #[serde(default)]
    pub conv: ConvSection,
}

fn default_mode() -> Mode {
    Mode::Global
}

fn default_burn_in() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSection {
    pub epochs: usize,
    pub reg: f64,
}

impl Default for SvmSection {
    fn default() -> Self {
        SvmSection { epochs: 50, reg: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvSection {
    pub patch_w: usize,
    pub patch_h: usize,
    pub stride: usize,
    pub scales: Vec<usize>,
}

impl Default for ConvSection {
    fn default() -> Self {
        ConvSection {
            patch_w: 8,
            patch_h: 8,
            stride: 4,
            scales: vec![1, 2, 4],
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, base: &Path) -> anyhow::Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).context("malformed experiment file")?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.network);
        resolve(&mut cfg.weights);
        resolve(&mut cfg.train);
        resolve(&mut cfg.test);
        if let Some(p) = cfg.hw.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.out_dir.as_mut() {
            resolve(p);
        }
        if cfg.duration.is_some_and(|d| !(d > 0.0)) || !(cfg.burn_in >= 0.0) {
            bail!("duration must be > 0 and burn_in >= 0");
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Every referenced input must exist.
    pub fn check_inputs(&self) -> anyhow::Result<()> {
        for (what, p) in [("network config", &self.network), ("weights checkpoint", &self.weights)] {
            if !p.is_file() {
                bail!("{what} {} not found", p.display());
            }
        }
        for (what, p) in [("train dataset", &self.train), ("test dataset", &self.test)] {
            if !p.is_dir() {
                bail!("{what} {} not found", p.display());
            }
        }
        if let Some(hw) = &self.hw {
            if !hw.is_file() {
                bail!("hardware file {} not found", hw.display());
            }
        }
        Ok(())
    }
}
