//! Library-level building blocks behind the subcommands.

use std::fs;
use std::path::Path;

use crossnet_core::data::{images_to_batch, batch_to_images, synth_generate, RgbImage, SynthOutput, SyntheticSpec};
use crossnet_core::eval::{extract_features, fit_gaussian, frechet_distance, FeatureExtractor, FeatureSet};
use crossnet_core::losses::LossReport;
use crossnet_core::nn::{CrossModel, ModelBundle};
use crossnet_core::train::{train_loop, TrainSink};
use crossnet_core::{Real, Tape, Tensor};

use crate::checkpoint::save_checkpoint;
use crate::config::ExperimentConfig;
use crate::csv::{sig9, Table};
use crate::dataset::{list_images, load_dataset, load_images, LoadedData};
use crate::error::{AppError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    AToB,
    BToA,
}

impl Direction {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "a2b" => Ok(Direction::AToB),
            "b2a" => Ok(Direction::BToA),
            other => Err(AppError::Config(format!("direction must be a2b or b2a, got `{other}`"))),
        }
    }
}

/// Output image and latent code of one translation.
pub fn translate_tensor<T: Real>(
    bundle: &ModelBundle<T>,
    image: &Tensor<T>,
    direction: Direction,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let mut tape = Tape::new();
    let x = tape.constant(image.clone());
    let path = match direction {
        Direction::AToB => bundle.translate_ab(&mut tape, x)?,
        Direction::BToA => bundle.translate_ba(&mut tape, x)?,
    };
    Ok((tape.value(path.image).clone(), tape.value(path.latent).clone()))
}

pub fn translate_image<T: Real>(bundle: &ModelBundle<T>, image: &RgbImage, direction: Direction) -> Result<RgbImage> {
    let batch = images_to_batch::<T>(&[image])?;
    let (out, _) = translate_tensor(bundle, &batch, direction)?;
    Ok(batch_to_images(&out)?.remove(0))
}

/// Features of each image, extracted one at a time so sizes may differ.
pub fn image_features(images: &[RgbImage], extractor: &dyn FeatureExtractor<f32>) -> Result<FeatureSet> {
    let mut rows = Vec::with_capacity(images.len());
    for img in images {
        let fs = extract_features(&images_to_batch::<f32>(&[img])?, extractor)?;
        rows.push(fs.row(0).to_vec());
    }
    Ok(FeatureSet::from_rows(rows, extractor.id())?)
}

pub fn fid(real: &[RgbImage], fake: &[RgbImage], extractor: &dyn FeatureExtractor<f32>) -> Result<f64> {
    let g_real = fit_gaussian(&image_features(real, extractor)?)?;
    let g_fake = fit_gaussian(&image_features(fake, extractor)?)?;
    Ok(frechet_distance(&g_real, &g_fake)?)
}

/// Loads every image in `dir`, optionally preprocessed to `side`.
pub fn load_folder(dir: &Path, side: Option<usize>, threads: usize) -> Result<(Vec<String>, Vec<RgbImage>)> {
    let paths = list_images(dir)?;
    if paths.is_empty() {
        return Err(AppError::Format(format!("{}: no images", dir.display())));
    }
    let mut images = load_images(&paths, threads)?;
    if let Some(s) = side {
        images = images.iter().map(|im| im.preprocess(s)).collect();
    }
    let names = paths
        .iter()
        .map(|p| p.file_name().expect("listed files have names").to_string_lossy().into_owned())
        .collect();
    Ok((names, images))
}

/// The training set described by `cfg`: synthetic or from `data_dir`.
pub fn training_data(cfg: &ExperimentConfig, threads: usize) -> Result<LoadedData> {
    match cfg.synth_spec() {
        Some(spec) => Ok(from_synth(synth_generate(&spec)?)),
        None => load_dataset(&cfg.data_dir, cfg.train.image_side, threads),
    }
}

/// A held-out set drawn like the training set: a fresh synthetic seed, or
/// `testA`/`testB` when the dataset root has them. At most `fid_samples`
/// images per domain are kept.
pub fn evaluation_data(cfg: &ExperimentConfig, threads: usize) -> Result<LoadedData> {
    let mut data = match cfg.synth_spec() {
        Some(spec) => {
            let count = if cfg.fid_samples > 0 { cfg.fid_samples } else { spec.count };
            from_synth(synth_generate(&SyntheticSpec {
                seed: spec.seed.wrapping_add(1),
                count,
                ..spec
            })?)
        }
        None => {
            let root = &cfg.data_dir;
            if root.join("testA").is_dir() && root.join("testB").is_dir() {
                let a = load_folder(&root.join("testA"), Some(cfg.train.image_side), threads)?;
                let b = load_folder(&root.join("testB"), Some(cfg.train.image_side), threads)?;
                LoadedData {
                    a: crossnet_core::data::DomainDataset::new(crossnet_core::data::Domain::A, a.1, a.0)?,
                    b: crossnet_core::data::DomainDataset::new(crossnet_core::data::Domain::B, b.1, b.0)?,
                    masks_b: None,
                }
            } else {
                load_dataset(root, cfg.train.image_side, threads)?
            }
        }
    };
    if cfg.fid_samples > 0 {
        for ds in [&mut data.a, &mut data.b] {
            ds.images.truncate(cfg.fid_samples);
            ds.manifest.truncate(cfg.fid_samples);
        }
        if let Some(m) = &mut data.masks_b {
            m.truncate(cfg.fid_samples);
        }
    }
    Ok(data)
}

fn from_synth(s: SynthOutput) -> LoadedData {
    LoadedData {
        a: s.a,
        b: s.b,
        masks_b: s.masks,
    }
}

/// FID of translations against real images, per direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FidPair {
    pub ab: f64,
    pub ba: f64,
}

impl FidPair {
    pub fn total(&self) -> f64 {
        self.ab + self.ba
    }
}

pub fn translation_fid(bundle: &ModelBundle<f32>, data: &LoadedData, extractor: &dyn FeatureExtractor<f32>) -> Result<FidPair> {
    let translate_all = |images: &[RgbImage], d| -> Result<Vec<RgbImage>> {
        images.iter().map(|im| translate_image(bundle, im, d)).collect()
    };
    let fake_b = translate_all(&data.a.images, Direction::AToB)?;
    let fake_a = translate_all(&data.b.images, Direction::BToA)?;
    Ok(FidPair {
        ab: fid(&data.b.images, &fake_b, extractor)?,
        ba: fid(&data.a.images, &fake_a, extractor)?,
    })
}

const LOSS_COLUMNS: [&str; 7] = ["gan_g", "gan_d", "id", "ctc", "zid", "zcyc", "total"];

fn loss_cells(r: &LossReport) -> Vec<String> {
    [r.gan_g, r.gan_d, r.id, r.ctc, r.zid, r.zcyc, r.total]
        .into_iter()
        .map(sig9)
        .collect()
}

/// Collects loss logs and writes intermediate checkpoints into a run directory.
pub struct RunRecorder<'a> {
    out: &'a Path,
    meta: String,
    pub steps: Table,
    pub epochs: Table,
    pub last_epoch: LossReport,
    verbose: bool,
}

impl<'a> RunRecorder<'a> {
    pub fn new(out: &'a Path, resolved_config: &str, verbose: bool) -> Self {
        let mut step_header = vec!["epoch", "step"];
        step_header.extend(LOSS_COLUMNS);
        let mut epoch_header = vec!["epoch"];
        epoch_header.extend(LOSS_COLUMNS);
        RunRecorder {
            out,
            meta: resolved_config.to_string(),
            steps: Table::new(&step_header),
            epochs: Table::new(&epoch_header),
            last_epoch: LossReport::default(),
            verbose,
        }
    }

    fn meta(&self, epochs_done: usize) -> String {
        format!("format = xnet1\nepochs_done = {epochs_done}\n{}", self.meta)
    }
}

impl TrainSink<f32> for RunRecorder<'_> {
    fn on_step(&mut self, epoch: usize, step: usize, r: &LossReport) -> crossnet_core::Result<()> {
        let mut row = vec![(epoch + 1).to_string(), (step + 1).to_string()];
        row.extend(loss_cells(r));
        self.steps.push(row);
        Ok(())
    }

    fn on_epoch(&mut self, epoch: usize, mean: &LossReport) -> crossnet_core::Result<()> {
        let mut row = vec![(epoch + 1).to_string()];
        row.extend(loss_cells(mean));
        self.epochs.push(row);
        self.last_epoch = *mean;
        if self.verbose {
            eprintln!(
                "epoch {} total {} id {} zid {} gan_g {} gan_d {}",
                epoch + 1,
                sig9(mean.total),
                sig9(mean.id),
                sig9(mean.zid),
                sig9(mean.gan_g),
                sig9(mean.gan_d)
            );
        }
        self.epochs
            .write(&self.out.join("losses.csv"))
            .map_err(|e| crossnet_core::Error::Data(e.to_string()))
    }

    fn on_checkpoint(&mut self, epoch: usize, bundle: &ModelBundle<f32>) -> crossnet_core::Result<()> {
        let path = self.out.join(format!("checkpoint_e{:04}.xnet", epoch + 1));
        save_checkpoint(&path, bundle, &self.meta(epoch + 1)).map_err(|e| crossnet_core::Error::Data(e.to_string()))
    }
}

/// Everything a finished run leaves behind.
pub struct RunOutcome {
    pub bundle: ModelBundle<f32>,
    pub last_epoch: LossReport,
}

/// Trains per `cfg`, writing `config.txt`, `losses.csv`, `steps.csv`,
/// periodic checkpoints and the final `checkpoint.xnet` into `out`.
pub fn run_training(cfg: &ExperimentConfig, data: &LoadedData, out: &Path, verbose: bool) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| AppError::io(out, e))?;
    let resolved = cfg.serialize();
    let config_path = out.join("config.txt");
    fs::write(&config_path, &resolved).map_err(|e| AppError::io(&config_path, e))?;
    let mut rec = RunRecorder::new(out, &resolved, verbose);
    let bundle: ModelBundle<f32> = train_loop(&cfg.train, &data.a, &data.b, &mut rec)?;
    rec.steps.write(&out.join("steps.csv"))?;
    rec.epochs.write(&out.join("losses.csv"))?;
    save_checkpoint(&out.join("checkpoint.xnet"), &bundle, &rec.meta(cfg.train.epochs))?;
    Ok(RunOutcome {
        bundle,
        last_epoch: rec.last_epoch,
    })
}
