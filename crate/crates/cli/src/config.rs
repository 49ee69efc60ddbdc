//! JSON run configuration. Values given on the command line win over the
//! config file, which wins over built-in defaults. Relative paths in a
//! config file are resolved against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use percep::distance::Weighting;
use percep::eval::Protocol;
use percep::stimuli::{linear_grid, StimulusGrid, ViewingGeometry};
use serde::Deserialize;

use crate::CliError;

/// `start:stop:step` sweep specification.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("expected start:stop:step, {e}"))?;
        match parts[..] {
            [start, stop, step] => Ok(GridSpec { start, stop, step }),
            _ => Err(format!("expected start:stop:step, got '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SubsetMode {
    Full,
    High,
    Low,
    PeWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Perceptual,
    L2,
    Ssim,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Perceptual => "perceptual",
            MetricKind::L2 => "l2",
            MetricKind::Ssim => "ssim",
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub threads: Option<usize>,
    pub model: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub tap: Option<String>,
    pub ppd: Option<f64>,
    pub contrast: Option<f64>,
    pub frequencies: Option<GridSpec>,
    pub orientations: Option<GridSpec>,
    pub scores: Option<PathBuf>,
    pub subset: Option<PathBuf>,
    pub mode: Option<SubsetMode>,
    pub percent: Option<f64>,
    pub weighting: Option<Weighting>,
    pub metric: Option<MetricKind>,
    pub protocol: Option<Protocol>,
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.model,
            &mut cfg.weights,
            &mut cfg.scores,
            &mut cfg.subset,
            &mut cfg.manifest,
            &mut cfg.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Picks the command-line value, then the config value.
pub fn pick<T: Clone>(cli: &Option<T>, cfg: &Option<T>) -> Option<T> {
    cli.clone().or_else(|| cfg.clone())
}

pub fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing required option --{flag}")))
}

/// Stimulus overrides merged from flags and config.
#[derive(Debug, Clone, Default)]
pub struct GridOverrides {
    pub ppd: Option<f64>,
    pub contrast: Option<f64>,
    pub frequencies: Option<GridSpec>,
    pub orientations: Option<GridSpec>,
}

impl GridOverrides {
    pub fn build(&self, channels: usize, height: usize, width: usize) -> Result<StimulusGrid, CliError> {
        let mut grid = StimulusGrid::with_size(channels, height, width);
        if let Some(ppd) = self.ppd {
            grid.geometry = ViewingGeometry::new(ppd)?;
        }
        if let Some(c) = self.contrast {
            grid.contrast = c;
        }
        if let Some(g) = self.frequencies {
            grid.frequencies = linear_grid(g.start, g.stop, g.step)?;
        }
        if let Some(g) = self.orientations {
            grid.orientations = linear_grid(g.start, g.stop, g.step)?;
        }
        grid.validate()?;
        Ok(grid)
    }
}
