//! Parameter resolution: command-line flags override the optional JSON
//! config file, which overrides the built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use pmc_core::{Modality, SegmentOptions, TrainParams};
use serde::Deserialize;

use crate::CliError;

/// Shared parameter flags. Defaults: tau 5, gamma 0.1, c 10, 3x3 coarse
/// grid, span length 8..=60 steps, quiescence threshold 0.15.
#[derive(Args)]
pub struct ParamArgs {
    /// Translation gap for motion expansion, in pixels.
    #[arg(long)]
    tau: Option<usize>,
    /// Downsizing scale for grid pooling, in (0,1].
    #[arg(long)]
    gamma: Option<f64>,
    /// Number of principal components per gesture.
    #[arg(long)]
    components: Option<usize>,
    /// Video modality: rgb-gray or depth.
    #[arg(long)]
    modality: Option<Modality>,
    /// JSON config file; flags take precedence over its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Coarse grid rows for segmentation.
    #[arg(long)]
    coarse_rows: Option<usize>,
    /// Coarse grid columns for segmentation.
    #[arg(long)]
    coarse_cols: Option<usize>,
    /// Minimum span length in steps.
    #[arg(long)]
    l_min: Option<usize>,
    /// Maximum span length in steps.
    #[arg(long)]
    l_max: Option<usize>,
    /// Quiescence threshold as a fraction of the median step energy.
    #[arg(long)]
    theta_q: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    tau: Option<usize>,
    gamma: Option<f64>,
    components: Option<usize>,
    modality: Option<Modality>,
    coarse_rows: Option<usize>,
    coarse_cols: Option<usize>,
    l_min: Option<usize>,
    l_max: Option<usize>,
    theta_q: Option<f64>,
}

/// Fully resolved configuration.
pub struct Config {
    pub params: TrainParams,
    pub modality: Modality,
    pub segment: SegmentOptions,
}

impl ParamArgs {
    pub fn resolve(&self) -> Result<Config, CliError> {
        let file = match &self.config {
            None => ConfigFile::default(),
            Some(path) => load_config_file(path)?,
        };
        let defaults = TrainParams::default();
        let seg_defaults = SegmentOptions::default();
        let params = TrainParams {
            tau: self.tau.or(file.tau).unwrap_or(defaults.tau),
            gamma: self.gamma.or(file.gamma).unwrap_or(defaults.gamma),
            c: self.components.or(file.components).unwrap_or(defaults.c),
        };
        if !(params.gamma > 0.0 && params.gamma <= 1.0) {
            return Err(CliError::Usage(anyhow::anyhow!(
                "gamma {} outside (0,1]",
                params.gamma
            )));
        }
        if params.c == 0 {
            return Err(CliError::Usage(anyhow::anyhow!("components must be at least 1")));
        }
        let segment = SegmentOptions {
            coarse_rows: self.coarse_rows.or(file.coarse_rows).unwrap_or(seg_defaults.coarse_rows),
            coarse_cols: self.coarse_cols.or(file.coarse_cols).unwrap_or(seg_defaults.coarse_cols),
            l_min: self.l_min.or(file.l_min).unwrap_or(seg_defaults.l_min),
            l_max: self.l_max.or(file.l_max).unwrap_or(seg_defaults.l_max),
            theta_q: self.theta_q.or(file.theta_q).unwrap_or(seg_defaults.theta_q),
        };
        Ok(Config {
            params,
            modality: self.modality.or(file.modality).unwrap_or(Modality::RgbGray),
            segment,
        })
    }
}

fn load_config_file(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))
        .map_err(CliError::Usage)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))
        .map_err(CliError::Usage)
}
