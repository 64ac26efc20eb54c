//! Plain-text `key = value` experiment files.
//!
//! Blank lines and `#` comments are ignored. Every key is optional and
//! falls back to the default listed in [`KEYS`]; unknown keys are errors.

use std::fmt::Write as _;
use std::path::PathBuf;

use crossnet_core::data::{SynthTask, SyntheticSpec};
use crossnet_core::losses::LossTerms;
use crossnet_core::train::TrainConfig;

use crate::error::{AppError, Result};

/// Training configuration plus the data source it runs on.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    /// Dataset root with `trainA/` and `trainB/`; empty when synthetic.
    pub data_dir: PathBuf,
    /// Synthetic task used when `data_dir` is empty.
    pub synth_task: Option<SynthTask>,
    pub synth_count: usize,
    /// Images per domain translated for FID in ablation runs; 0 = all.
    pub fid_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train: TrainConfig::default(),
            data_dir: PathBuf::new(),
            synth_task: None,
            synth_count: 64,
            fid_samples: 256,
        }
    }
}

/// Every accepted key with its documentation.
pub const KEYS: &[(&str, &str)] = &[
    ("data_dir", "dataset root containing trainA/ and trainB/ (default: empty)"),
    ("synth_task", "invert | stripes | segmentation | none; used when data_dir is empty (default: none)"),
    ("synth_count", "images per domain for synthetic data (default: 64)"),
    ("fid_samples", "held-out images per domain for ablation FID, 0 = whole set (default: 256)"),
    ("epochs", "training epochs (default: 200)"),
    ("steps_per_epoch", "optimizer steps per epoch, 0 = one pass over the larger domain (default: 0)"),
    ("batch_size", "images per domain per step (default: 1)"),
    ("image_side", "square side after crop and resize (default: 256)"),
    ("seed", "seed for initialization, sampling and history buffers (default: 0)"),
    ("terms", "enabled loss terms, e.g. gan+id+zid, full or none (default: full)"),
    ("w_gan", "adversarial weight (default: 1)"),
    ("w_id", "plain identity weight (default: 3)"),
    ("w_ctc", "cross-translation consistency weight (default: 3)"),
    ("w_zid", "latent cross-identity weight (default: 6)"),
    ("w_zcyc", "latent cycle weight (default: 6)"),
    ("lr", "Adam learning rate (default: 0.0002)"),
    ("beta1", "Adam beta1 (default: 0.5)"),
    ("beta2", "Adam beta2 (default: 0.999)"),
    ("adam_eps", "Adam epsilon (default: 1e-8)"),
    ("history_capacity", "fake-image history size per domain (default: 50)"),
    ("checkpoint_every", "epochs between intermediate checkpoints, 0 = final only (default: 0)"),
    ("base_width", "first generator convolution width (default: 64)"),
    ("latent_channels", "latent channels C_z (default: 256)"),
    ("n_res_blocks", "residual blocks per encoder and translator (default: 9)"),
    ("disc_width", "first discriminator convolution width (default: 64)"),
    ("disc_layers", "stride-2 discriminator convolutions (default: 3)"),
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| AppError::Config(format!("`{key}`: cannot parse `{value}`")))
}

impl ExperimentConfig {
    /// Small preset for quick synthetic experiments.
    pub fn smoke() -> Self {
        ExperimentConfig {
            train: TrainConfig::smoke(),
            synth_task: Some(SynthTask::Invert),
            ..Self::default()
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "data_dir" => self.data_dir = PathBuf::from(value),
            "synth_task" => {
                self.synth_task = match value {
                    "none" | "" => None,
                    other => Some(SynthTask::parse(other)?),
                }
            }
            "synth_count" => self.synth_count = parse_num(key, value)?,
            "fid_samples" => self.fid_samples = parse_num(key, value)?,
            "epochs" => t.epochs = parse_num(key, value)?,
            "steps_per_epoch" => t.steps_per_epoch = parse_num(key, value)?,
            "batch_size" => t.batch_size = parse_num(key, value)?,
            "image_side" => t.image_side = parse_num(key, value)?,
            "seed" => t.seed = parse_num(key, value)?,
            "terms" => t.terms = LossTerms::parse(value)?,
            "w_gan" => t.weights.gan = parse_num(key, value)?,
            "w_id" => t.weights.id = parse_num(key, value)?,
            "w_ctc" => t.weights.ctc = parse_num(key, value)?,
            "w_zid" => t.weights.zid = parse_num(key, value)?,
            "w_zcyc" => t.weights.zcyc = parse_num(key, value)?,
            "lr" => t.adam.lr = parse_num(key, value)?,
            "beta1" => t.adam.beta1 = parse_num(key, value)?,
            "beta2" => t.adam.beta2 = parse_num(key, value)?,
            "adam_eps" => t.adam.eps = parse_num(key, value)?,
            "history_capacity" => t.history_capacity = parse_num(key, value)?,
            "checkpoint_every" => t.checkpoint_every = parse_num(key, value)?,
            "base_width" => t.net.base_width = parse_num(key, value)?,
            "latent_channels" => t.net.latent_channels = parse_num(key, value)?,
            "n_res_blocks" => t.net.n_res_blocks = parse_num(key, value)?,
            "disc_width" => t.net.disc_width = parse_num(key, value)?,
            "disc_layers" => t.net.disc_layers = parse_num(key, value)?,
            other => return Err(AppError::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a `key=value` assignment.
    pub fn apply(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| AppError::Config(format!("expected key=value, got `{assignment}`")))?;
        self.set(k.trim(), v.trim())
    }

    /// Parses a file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.merge(text)?;
        Ok(c)
    }

    /// Applies every assignment in `text` to `self`.
    pub fn merge(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.apply(line).map_err(|e| AppError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// Every key, in [`KEYS`] order. Floats use the shortest exact form.
    pub fn serialize(&self) -> String {
        let t = &self.train;
        let values: Vec<String> = vec![
            self.data_dir.display().to_string(),
            self.synth_task.map_or("none".into(), |s| s.name().into()),
            self.synth_count.to_string(),
            self.fid_samples.to_string(),
            t.epochs.to_string(),
            t.steps_per_epoch.to_string(),
            t.batch_size.to_string(),
            t.image_side.to_string(),
            t.seed.to_string(),
            t.terms.label(),
            t.weights.gan.to_string(),
            t.weights.id.to_string(),
            t.weights.ctc.to_string(),
            t.weights.zid.to_string(),
            t.weights.zcyc.to_string(),
            t.adam.lr.to_string(),
            t.adam.beta1.to_string(),
            t.adam.beta2.to_string(),
            t.adam.eps.to_string(),
            t.history_capacity.to_string(),
            t.checkpoint_every.to_string(),
            t.net.base_width.to_string(),
            t.net.latent_channels.to_string(),
            t.net.n_res_blocks.to_string(),
            t.net.disc_width.to_string(),
            t.net.disc_layers.to_string(),
        ];
        let mut out = String::new();
        for ((key, _), value) in KEYS.iter().zip(values) {
            writeln!(out, "{key} = {value}").expect("writing to a String");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.data_dir.as_os_str().is_empty() && self.synth_task.is_none() {
            return Err(AppError::Config("set data_dir or synth_task".into()));
        }
        Ok(())
    }

    /// Spec of the synthetic training set, if any.
    pub fn synth_spec(&self) -> Option<SyntheticSpec> {
        self.synth_task.filter(|_| self.data_dir.as_os_str().is_empty()).map(|task| SyntheticSpec {
            task,
            image_side: self.train.image_side,
            count: self.synth_count,
            seed: self.train.seed,
        })
    }
}
