//! Alternating generator/discriminator optimization.

use alloc::format;
use alloc::vec::Vec;

use crate::data::{sample_unpaired_batch, DomainDataset, UnpairedSampler};
use crate::error::{Error, Result};
use crate::history::HistoryBuffer;
use crate::losses::{loss_gan_discriminator, total_generator_loss, LossReport, LossTerms, LossWeights};
use crate::nn::{CrossModel, ModelBundle, NetConfig};
use crate::optim::{lr_factor, AdamConfig};
use crate::scalar::Real;
use crate::tape::Tape;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub image_side: usize,
    pub seed: u64,
    pub weights: LossWeights,
    pub terms: LossTerms,
    pub adam: AdamConfig,
    pub history_capacity: usize,
    /// Checkpoint every this many epochs; 0 disables periodic checkpoints.
    pub checkpoint_every: usize,
    /// Caps optimizer steps per epoch; 0 means one pass over the larger domain.
    pub steps_per_epoch: usize,
    pub net: NetConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 1,
            image_side: 256,
            seed: 0,
            weights: LossWeights::default(),
            terms: LossTerms::ALL,
            adam: AdamConfig::default(),
            history_capacity: 50,
            checkpoint_every: 0,
            steps_per_epoch: 0,
            net: NetConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Desk-scale preset: 16-pixel images, 16 latent channels, base width
    /// 8, and a two-stage discriminator small enough for that side.
    pub fn smoke() -> Self {
        TrainConfig {
            image_side: 16,
            net: NetConfig {
                base_width: 8,
                latent_channels: 16,
                disc_width: 16,
                disc_layers: 2,
                ..NetConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !self.image_side.is_multiple_of(4) || self.image_side < 8 {
            return Err(Error::Config(format!(
                "image_side {} must be a multiple of 4 and at least 8",
                self.image_side
            )));
        }
        if !(self.adam.lr >= 0.0) || !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return Err(Error::Config(format!("invalid optimizer settings {:?}", self.adam)));
        }
        self.weights.validate()?;
        self.net.validate()?;
        if self.terms.gan && self.net.disc_output_side(self.image_side).is_none() {
            return Err(Error::Config(format!(
                "image_side {} is too small for a {}-layer discriminator",
                self.image_side, self.net.disc_layers
            )));
        }
        Ok(())
    }
}

/// History buffers for the translated images fed to each critic.
#[derive(Clone, Debug)]
pub struct HistoryPair<T> {
    pub fake_a: HistoryBuffer<T>,
    pub fake_b: HistoryBuffer<T>,
}

impl<T: Real> HistoryPair<T> {
    pub fn new(capacity: usize, seed: u64) -> Self {
        HistoryPair {
            fake_a: HistoryBuffer::new(capacity, seed.wrapping_add(1)),
            fake_b: HistoryBuffer::new(capacity, seed.wrapping_add(2)),
        }
    }
}

/// One optimization step on a batch pair.
///
/// The generator side (encoders, decoders, translators) is updated first
/// with the critics frozen; then each critic is updated on real images and
/// pooled fakes with the generator side untouched. With the GAN term
/// disabled the critic phase is skipped.
pub fn train_step<T: Real>(
    bundle: &mut ModelBundle<T>,
    batch_a: &Tensor<T>,
    batch_b: &Tensor<T>,
    config: &TrainConfig,
    buffers: &mut HistoryPair<T>,
    lr: f64,
) -> Result<LossReport> {
    let generator_ids = bundle.generator_params();
    let critic_ids = bundle.critic_params();

    let mut tape = Tape::new();
    tape.freeze(critic_ids.iter().copied());
    let x_a = tape.constant(batch_a.clone());
    let x_b = tape.constant(batch_b.clone());
    let pass = total_generator_loss(&*bundle, &mut tape, x_a, x_b, &config.weights, &config.terms)?;
    let mut report = pass.report;
    check_finite(&report)?;

    let store = bundle.store_mut();
    store.zero_grad(&generator_ids);
    tape.backward(pass.total, store)?;
    config.adam.step(store, &generator_ids, lr)?;

    if let (true, Some(fa), Some(fb)) = (config.terms.gan, pass.fake_a, pass.fake_b) {
        let pooled_a = buffers.fake_a.query(tape.value(fa))?;
        let pooled_b = buffers.fake_b.query(tape.value(fb))?;
        drop(tape);

        let mut tape = Tape::new();
        tape.freeze(generator_ids.iter().copied());
        let real_a = tape.constant(batch_a.clone());
        let real_b = tape.constant(batch_b.clone());
        let fake_a = tape.constant(pooled_a);
        let fake_b = tape.constant(pooled_b);
        let model = &*bundle;
        let d_a = loss_gan_discriminator(&mut tape, |t, x| model.critic_a(t, x), real_a, fake_a)?;
        let d_b = loss_gan_discriminator(&mut tape, |t, x| model.critic_b(t, x), real_b, fake_b)?;
        let d = tape.add(d_a, d_b)?;
        report.gan_d = tape.scalar_value(d).to_f64();
        if !report.gan_d.is_finite() {
            return Err(Error::NonFinite("gan_d"));
        }
        let store = bundle.store_mut();
        store.zero_grad(&critic_ids);
        tape.backward(d, store)?;
        config.adam.step(store, &critic_ids, lr)?;
    }
    Ok(report)
}

fn check_finite(report: &LossReport) -> Result<()> {
    for (name, v) in report.terms() {
        if !v.is_finite() {
            return Err(Error::NonFinite(name));
        }
    }
    if !report.total.is_finite() {
        return Err(Error::NonFinite("total"));
    }
    Ok(())
}

/// Receives progress from [`train_loop`].
pub trait TrainSink<T> {
    fn on_step(&mut self, _epoch: usize, _step: usize, _report: &LossReport) -> Result<()> {
        Ok(())
    }

    /// Mean of the step reports of a finished epoch.
    fn on_epoch(&mut self, _epoch: usize, _mean: &LossReport) -> Result<()> {
        Ok(())
    }

    /// Called every `checkpoint_every` epochs with the current bundle.
    fn on_checkpoint(&mut self, _epoch: usize, _bundle: &ModelBundle<T>) -> Result<()> {
        Ok(())
    }
}

/// A sink that ignores everything.
pub struct NullSink;

impl<T> TrainSink<T> for NullSink {}

/// Trains a freshly initialized bundle for `config.epochs` epochs.
pub fn train_loop<T: Real>(
    config: &TrainConfig,
    dataset_a: &DomainDataset,
    dataset_b: &DomainDataset,
    sink: &mut dyn TrainSink<T>,
) -> Result<ModelBundle<T>> {
    config.validate()?;
    let bundle = ModelBundle::new(config.net, config.seed)?;
    train_bundle(bundle, config, dataset_a, dataset_b, sink)
}

/// Like [`train_loop`] but starting from an existing bundle.
pub fn train_bundle<T: Real>(
    mut bundle: ModelBundle<T>,
    config: &TrainConfig,
    dataset_a: &DomainDataset,
    dataset_b: &DomainDataset,
    sink: &mut dyn TrainSink<T>,
) -> Result<ModelBundle<T>> {
    config.validate()?;
    if dataset_a.is_empty() || dataset_b.is_empty() {
        return Err(Error::Data("training needs at least one image per domain".into()));
    }
    for ds in [dataset_a, dataset_b] {
        if ds.side() != Some(config.image_side) {
            return Err(Error::Data(format!(
                "dataset images are {:?} pixels wide, config expects {}",
                ds.side(),
                config.image_side
            )));
        }
    }
    let mut sampler = UnpairedSampler::new(dataset_a.len(), dataset_b.len(), config.seed)?;
    let mut buffers = HistoryPair::new(config.history_capacity, config.seed);
    let steps = if config.steps_per_epoch > 0 {
        config.steps_per_epoch
    } else {
        dataset_a.len().max(dataset_b.len()).div_ceil(config.batch_size)
    };
    for epoch in 0..config.epochs {
        let lr = config.adam.lr * lr_factor(epoch, config.epochs);
        let mut reports = Vec::with_capacity(steps);
        for step in 0..steps {
            let (a, b) = sample_unpaired_batch(dataset_a, dataset_b, config.batch_size, &mut sampler)?;
            let report = train_step(&mut bundle, &a, &b, config, &mut buffers, lr)?;
            sink.on_step(epoch, step, &report)?;
            reports.push(report);
        }
        sink.on_epoch(epoch, &mean_report(&reports))?;
        if config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0 {
            sink.on_checkpoint(epoch, &bundle)?;
        }
    }
    Ok(bundle)
}

pub fn mean_report(reports: &[LossReport]) -> LossReport {
    let n = reports.len().max(1) as f64;
    let mut m = LossReport::default();
    for r in reports {
        m.gan_g += r.gan_g / n;
        m.gan_d += r.gan_d / n;
        m.id += r.id / n;
        m.ctc += r.ctc / n;
        m.zid += r.zid / n;
        m.zcyc += r.zcyc / n;
        m.total += r.total / n;
    }
    m
}
