//! Subcommand definitions and their execution.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use crossnet_core::data::{synth_generate, Mask, SynthTask, SyntheticSpec};
use crossnet_core::eval::{
    foreground_extract, foreground_scores, latent_magnitude_map, latent_pca_viz, roc_auc, DownsampleExtractor,
    EncoderExtractor, FeatureExtractor,
};
use crossnet_core::losses::LossTerms;
use crossnet_core::nn::ModelBundle;

use crate::checkpoint::load_checkpoint;
use crate::config::{ExperimentConfig, KEYS};
use crate::csv::{sig9, Table};
use crate::dataset::{load_image, load_mask, save_image, worker_threads, write_synthetic};
use crate::error::{AppError, Result};
use crate::pipeline::{
    evaluation_data, fid, load_folder, run_training, training_data, translate_image, translate_tensor,
    translation_fid, Direction,
};
use crate::ppm::{encode_pgm, encode_ppm};

#[derive(Parser, Debug)]
#[command(name = "crossnet", version, about = "Unpaired image translation with latent cross-consistency")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train one model.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Translate a folder of images with a trained checkpoint.
    Translate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dir: PathBuf,
        /// a2b or b2a
        #[arg(long)]
        direction: String,
        #[arg(long)]
        out: PathBuf,
        /// Center-crop and resize inputs to this side first.
        #[arg(long)]
        side: Option<usize>,
    },
    /// Train one run per loss subset and report translation FID for each.
    Ablate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated subsets, e.g. `gan,gan+zid,full`.
        #[arg(long)]
        terms: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fréchet distance between the image sets in two folders.
    EvalFid {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        fake: PathBuf,
        /// `downsample<N>` (default `downsample8`), or `encoder-ab:<checkpoint>` / `encoder-ba:<checkpoint>`.
        #[arg(long, default_value = "downsample8")]
        extractor: String,
        /// Center-crop and resize images to this side first.
        #[arg(long)]
        side: Option<usize>,
    },
    /// Whiten near-white translated pixels, keep original colors elsewhere.
    ExtractFg {
        #[arg(long)]
        original: PathBuf,
        /// Translations with the same file names as the originals.
        #[arg(long)]
        translated: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth `<stem>.pgm` masks; enables the ROC report.
        #[arg(long)]
        masks: Option<PathBuf>,
    },
    /// PCA and magnitude maps of an image's latent code.
    VizLatent {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value = "a2b")]
        direction: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        side: Option<usize>,
    },
    /// Write a synthetic two-domain dataset.
    SynthData {
        /// invert, stripes or segmentation
        #[arg(long)]
        task: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        count: usize,
        #[arg(long, default_value_t = 16)]
        side: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// List configuration keys with their defaults.
    ConfigKeys,
}

/// Configuration sources, lowest precedence first: built-in defaults, the
/// `--config` file, `--set` assignments in order, then `--seed`.
#[derive(Args, Debug)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `key=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
            cfg.merge(&text)
                .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        }
        for s in &self.set {
            cfg.apply(s)?;
        }
        if let Some(seed) = self.seed {
            cfg.train.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| AppError::io(path, e))
}

pub fn run(cli: Cli) -> Result<()> {
    let threads = worker_threads()?;
    match cli.command {
        Command::Train { config, out } => {
            let cfg = config.resolve()?;
            let data = training_data(&cfg, threads)?;
            let outcome = run_training(&cfg, &data, &out, true)?;
            println!("checkpoint {}", out.join("checkpoint.xnet").display());
            println!("final_total {}", sig9(outcome.last_epoch.total));
        }
        Command::Translate {
            checkpoint,
            dir,
            direction,
            out,
            side,
        } => {
            let direction = Direction::parse(&direction)?;
            let bundle = generators_from(&checkpoint)?;
            let (names, images) = load_folder(&dir, side, threads)?;
            create_dir(&out)?;
            for (name, img) in names.iter().zip(&images) {
                save_image(&out.join(name), &translate_image(&bundle, img, direction)?)?;
            }
            println!("translated {}", names.len());
        }
        Command::Ablate { config, terms, out } => ablate(&config.resolve()?, &terms, &out, threads)?,
        Command::EvalFid {
            real,
            fake,
            extractor,
            side,
        } => {
            let (_, real_images) = load_folder(&real, side, threads)?;
            let (_, fake_images) = load_folder(&fake, side, threads)?;
            let holder;
            let ext: Box<dyn FeatureExtractor<f32> + '_> = match parse_extractor(&extractor)? {
                ExtractorSpec::Downsample(side) => Box::new(DownsampleExtractor { side }),
                ExtractorSpec::Encoder { checkpoint, a_to_b } => {
                    holder = generators_from(&checkpoint)?;
                    Box::new(EncoderExtractor {
                        bundle: &holder,
                        a_to_b,
                    })
                }
            };
            let value = fid(&real_images, &fake_images, ext.as_ref())?;
            let mut t = Table::new(&["extractor", "n_real", "n_fake", "fid"]);
            t.push(vec![
                ext.id(),
                real_images.len().to_string(),
                fake_images.len().to_string(),
                sig9(value),
            ]);
            print!("{}", t.render());
        }
        Command::ExtractFg {
            original,
            translated,
            out,
            masks,
        } => extract_fg(&original, &translated, &out, masks.as_deref(), threads)?,
        Command::VizLatent {
            checkpoint,
            image,
            direction,
            out,
            side,
        } => {
            let direction = Direction::parse(&direction)?;
            let bundle = generators_from(&checkpoint)?;
            let mut img = load_image(&image)?;
            if let Some(s) = side {
                img = img.preprocess(s);
            }
            let batch = crossnet_core::data::images_to_batch::<f32>(&[&img])?;
            let (_, z) = translate_tensor(&bundle, &batch, direction)?;
            create_dir(&out)?;
            let pca = out.join("latent_pca.ppm");
            fs::write(&pca, encode_ppm(&latent_pca_viz(&z)?)).map_err(|e| AppError::io(&pca, e))?;
            let mag = out.join("latent_magnitude.pgm");
            fs::write(&mag, encode_pgm(&latent_magnitude_map(&z)?)).map_err(|e| AppError::io(&mag, e))?;
            println!("wrote {} {}", pca.display(), mag.display());
        }
        Command::SynthData {
            task,
            seed,
            count,
            side,
            out,
        } => {
            let spec = SyntheticSpec {
                task: SynthTask::parse(&task)?,
                image_side: side,
                count,
                seed,
            };
            write_synthetic(&out, &synth_generate(&spec)?)?;
            println!("{}", spec.describe());
        }
        Command::ConfigKeys => {
            for (key, doc) in KEYS {
                println!("{key:<18} {doc}");
            }
        }
    }
    Ok(())
}

/// Encoders and decoders only, as translation needs nothing else.
fn generators_from(path: &Path) -> Result<ModelBundle<f32>> {
    let ckpt = load_checkpoint(path)?;
    let mut bundle = ModelBundle::generators_only(ckpt.infer_config()?, 0)?;
    ckpt.load_into(&mut bundle)?;
    Ok(bundle)
}

enum ExtractorSpec {
    Downsample(usize),
    Encoder { checkpoint: PathBuf, a_to_b: bool },
}

fn parse_extractor(s: &str) -> Result<ExtractorSpec> {
    if let Some(n) = s.strip_prefix("downsample") {
        return match n.parse() {
            Ok(side) if side > 0 => Ok(ExtractorSpec::Downsample(side)),
            _ => Err(AppError::Config(format!("bad extractor `{s}`"))),
        };
    }
    for (prefix, a_to_b) in [("encoder-ab:", true), ("encoder-ba:", false)] {
        if let Some(path) = s.strip_prefix(prefix) {
            return Ok(ExtractorSpec::Encoder {
                checkpoint: PathBuf::from(path),
                a_to_b,
            });
        }
    }
    Err(AppError::Config(format!(
        "unknown extractor `{s}` (expected downsample<N>, encoder-ab:<ckpt> or encoder-ba:<ckpt>)"
    )))
}

fn ablate(cfg: &ExperimentConfig, terms: &str, out: &Path, threads: usize) -> Result<()> {
    let subsets = terms
        .split([',', ';'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| Ok(LossTerms::parse(s)?))
        .collect::<Result<Vec<_>>>()?;
    if subsets.is_empty() {
        return Err(AppError::Config("no loss subsets given".into()));
    }
    let data = training_data(cfg, threads)?;
    let held_out = evaluation_data(cfg, threads)?;
    let extractor = DownsampleExtractor::default();
    create_dir(out)?;
    let mut summary = Table::new(&["terms", "fid_ab", "fid_ba", "fid_total", "n_eval", "final_id", "final_zid", "final_total"]);
    for terms in subsets {
        let mut run_cfg = cfg.clone();
        run_cfg.train.terms = terms;
        let label = terms.label();
        let outcome = run_training(&run_cfg, &data, &out.join(&label), false)?;
        let f = translation_fid(&outcome.bundle, &held_out, &extractor)?;
        eprintln!("{label}: fid_total {}", sig9(f.total()));
        summary.push(vec![
            label,
            sig9(f.ab),
            sig9(f.ba),
            sig9(f.total()),
            held_out.a.len().min(held_out.b.len()).to_string(),
            sig9(outcome.last_epoch.id),
            sig9(outcome.last_epoch.zid),
            sig9(outcome.last_epoch.total),
        ]);
        summary.write(&out.join("summary.csv"))?;
    }
    print!("{}", summary.render());
    Ok(())
}

fn extract_fg(original: &Path, translated: &Path, out: &Path, masks: Option<&Path>, threads: usize) -> Result<()> {
    let (names, originals) = load_folder(original, None, threads)?;
    create_dir(out)?;
    let mut scores = Vec::new();
    let mut truth = Vec::new();
    for (name, orig) in names.iter().zip(&originals) {
        let trans = load_image(&translated.join(name))?;
        save_image(&out.join(name), &foreground_extract(orig, &trans)?)?;
        if let Some(dir) = masks {
            let stem = Path::new(name).file_stem().unwrap_or_default();
            let mask: Mask = load_mask(&dir.join(stem).with_extension("pgm"))?;
            if (mask.width, mask.height) != (trans.width(), trans.height()) {
                return Err(AppError::Format(format!("mask for {name} does not match its image size")));
            }
            scores.extend(foreground_scores(&trans));
            truth.extend(mask.bits);
        }
    }
    if masks.is_some() {
        let roc = roc_auc(&scores, &truth)?;
        let mut t = Table::new(&["fpr", "tpr", "threshold"]);
        for (i, &(fpr, tpr)) in roc.points.iter().enumerate() {
            let threshold = if i == 0 { f64::INFINITY } else { roc.thresholds[i - 1] };
            t.push(vec![sig9(fpr), sig9(tpr), sig9(threshold)]);
        }
        t.write(&out.join("roc.csv"))?;
        println!("auc {}", sig9(roc.auc));
    }
    println!("extracted {}", names.len());
    Ok(())
}
