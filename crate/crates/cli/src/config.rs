//! Run configuration: one JSON file per run, with a few flag overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use tomoseg_core::data::GenParams;
use tomoseg_core::models::{Mode, ModelConfig};
use tomoseg_core::training::{Schedule, TrainOptions};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Ablation mode: one of rnn, c2d, c3d, c2d+rnn, c3d+rnn.
    pub mode: String,
    /// Output directory for checkpoints, logs, predictions and reports.
    pub out: PathBuf,
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Dataset directory (written by `generate`, read by the others).
    pub dir: PathBuf,
    #[serde(default = "default_sequences")]
    pub sequences: usize,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_side")]
    pub height: usize,
    #[serde(default = "default_side")]
    pub width: usize,
    #[serde(default)]
    pub gen: GenSection,
}

fn default_sequences() -> usize {
    4
}
fn default_depth() -> usize {
    64
}
fn default_side() -> usize {
    64
}

/// Generator knobs; anything unset falls back to the generator defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub air_level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bed_level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relief: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waviness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub air_brightness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bed_brightness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speckle: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// "desk" (default) or "reference".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_len: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shared_channels: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch_channels: Option<[usize; 6]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carry_across_slices: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub conv_epochs: usize,
    #[serde(default = "default_epochs")]
    pub rnn_epochs: usize,
    #[serde(default = "default_ratio")]
    pub split_ratio: f64,
}

fn default_batch() -> usize {
    128
}
fn default_epochs() -> usize {
    20
}
fn default_ratio() -> f64 {
    0.6
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            batch_size: default_batch(),
            conv_epochs: default_epochs(),
            rnn_epochs: default_epochs(),
            split_ratio: default_ratio(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        cfg.mode()?;
        if !(cfg.train.split_ratio > 0.0 && cfg.train.split_ratio < 1.0) {
            bail!("train.split_ratio must lie in (0, 1)");
        }
        Ok(cfg)
    }

    pub fn mode(&self) -> Result<Mode> {
        self.mode
            .parse()
            .with_context(|| format!("unknown mode {:?}", self.mode))
    }

    /// Generator parameters for the i-th sequence of this run.
    pub fn gen_params(&self, index: usize) -> GenParams {
        let d = &self.data;
        let g = &self.data.gen;
        let base = GenParams::default();
        GenParams {
            depth: d.depth,
            height: d.height,
            width: d.width,
            air_level: g.air_level.unwrap_or(base.air_level),
            bed_level: g.bed_level.unwrap_or(base.bed_level),
            relief: g.relief.unwrap_or(base.relief),
            waviness: g.waviness.unwrap_or(base.waviness),
            air_brightness: g.air_brightness.unwrap_or(base.air_brightness),
            bed_brightness: g.bed_brightness.unwrap_or(base.bed_brightness),
            band_sigma: g.band_sigma.unwrap_or(base.band_sigma),
            noise_sigma: g.noise_sigma.unwrap_or(base.noise_sigma),
            speckle: g.speckle.unwrap_or(base.speckle),
            seed: self.seed.wrapping_mul(1_000_003).wrapping_add(index as u64),
        }
    }

    /// Model architecture for a given mode.
    pub fn model_config(&self, mode: Mode) -> Result<ModelConfig> {
        let preset = self.model.preset.as_deref().unwrap_or("desk");
        let mut cfg = match preset {
            "desk" => ModelConfig::desk(mode),
            "reference" => ModelConfig::new(mode),
            other => bail!("unknown model preset {other:?} (expected desk or reference)"),
        };
        cfg.height = self.data.height;
        cfg.width = self.data.width;
        if let Some(l) = self.model.window_len {
            cfg.window_len = l;
        }
        if let Some(c) = self.model.shared_channels {
            cfg.shared_channels = c;
        }
        if let Some(c) = self.model.branch_channels {
            cfg.branch_channels = c;
        }
        if let Some(h) = self.model.hidden {
            cfg.hidden = h;
        }
        if let Some(c) = self.model.carry_across_slices {
            cfg.carry_across_slices = c;
        }
        if mode.is_2d() {
            cfg = cfg.to_2d();
        }
        Ok(cfg)
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            batch_size: self.train.batch_size,
            conv_epochs: self.train.conv_epochs,
            rnn_epochs: self.train.rnn_epochs,
            conv_schedule: Schedule::c3d(),
            rnn_schedule: Schedule::rnn(),
            shuffle_seed: self.seed,
        }
    }

    /// JSON echo embedded in reports.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}
