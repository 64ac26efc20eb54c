use crossnet_core::data::{synth_generate, SynthTask, SyntheticSpec};
use crossnet_core::history::HistoryBuffer;
use crossnet_core::losses::{LossReport, LossTerms, LossWeights};
use crossnet_core::nn::{ModelBundle, NetConfig};
use crossnet_core::train::{train_loop, train_step, HistoryPair, NullSink, TrainConfig, TrainSink};
use crossnet_core::{Error, Result, Tensor};

fn image(v: f32) -> Tensor<f32> {
    Tensor::full(&[1, 1, 2, 2], v)
}

#[test]
fn history_fill_phase_is_exact() {
    let mut buf = HistoryBuffer::new(50, 9);
    for i in 0..50 {
        let x = image(i as f32);
        assert_eq!(buf.query(&x).unwrap(), x);
        assert_eq!(buf.len(), i + 1);
    }
}

#[test]
fn history_steady_state_returns_stored_half_the_time() {
    let mut buf = HistoryBuffer::new(50, 2024);
    let mut last_len = 0;
    for i in 0..50 {
        buf.query(&image(-(i as f32) - 1.0)).unwrap();
    }
    let trials = 10_000;
    let mut stored = 0;
    for i in 0..trials {
        let fresh = image(i as f32);
        let out = buf.query(&fresh).unwrap();
        if out != fresh {
            stored += 1;
        }
        assert!(buf.len() >= last_len && buf.len() <= 50);
        last_len = buf.len();
    }
    let p = stored as f64 / trials as f64;
    assert!((p - 0.5).abs() <= 0.05, "p = {p}");
}

fn tiny() -> TrainConfig {
    TrainConfig {
        epochs: 1,
        image_side: 8,
        history_capacity: 4,
        net: NetConfig {
            base_width: 4,
            latent_channels: 4,
            n_res_blocks: 1,
            disc_width: 4,
            disc_layers: 1,
            ..NetConfig::default()
        },
        ..TrainConfig::default()
    }
}

fn batch(seed: u64) -> Tensor<f32> {
    Tensor::from_fn(&[1, 3, 8, 8], |i| (((i as u64 * 2654435761 + seed * 97) % 1000) as f32 / 500.0) - 1.0)
}

fn snapshot(b: &ModelBundle<f32>, critics: bool) -> Vec<Vec<u32>> {
    let ids = if critics { b.critic_params() } else { b.generator_params() };
    ids.iter()
        .map(|&id| b.store().get(id).value.data().iter().map(|v| v.to_bits()).collect())
        .collect()
}

#[test]
fn nothing_enabled_changes_nothing() {
    let cfg = TrainConfig {
        weights: LossWeights::ZERO,
        terms: LossTerms::NONE,
        ..tiny()
    };
    let mut bundle = ModelBundle::<f32>::new(cfg.net, 1).unwrap();
    let (g0, q0) = (snapshot(&bundle, false), snapshot(&bundle, true));
    let mut buffers = HistoryPair::new(4, 1);
    let r = train_step(&mut bundle, &batch(1), &batch(2), &cfg, &mut buffers, 2e-4).unwrap();
    assert_eq!(r, LossReport::default());
    assert_eq!(snapshot(&bundle, false), g0);
    assert_eq!(snapshot(&bundle, true), q0);
}

#[test]
fn critic_phase_leaves_generators_alone() {
    // GAN term evaluated but weighted zero: only the critic step moves weights
    let cfg = TrainConfig {
        weights: LossWeights::ZERO,
        terms: LossTerms::parse("gan").unwrap(),
        ..tiny()
    };
    let mut bundle = ModelBundle::<f32>::new(cfg.net, 2).unwrap();
    let (g0, q0) = (snapshot(&bundle, false), snapshot(&bundle, true));
    let mut buffers = HistoryPair::new(4, 1);
    let r = train_step(&mut bundle, &batch(3), &batch(4), &cfg, &mut buffers, 2e-4).unwrap();
    assert!(r.gan_d > 0.0);
    assert_eq!(snapshot(&bundle, false), g0);
    assert_ne!(snapshot(&bundle, true), q0);
}

#[test]
fn generator_phase_leaves_critics_alone_without_gan() {
    let cfg = TrainConfig {
        terms: LossTerms::parse("id+ctc+zid+zcyc").unwrap(),
        ..tiny()
    };
    let mut bundle = ModelBundle::<f32>::new(cfg.net, 3).unwrap();
    let (g0, q0) = (snapshot(&bundle, false), snapshot(&bundle, true));
    let mut buffers = HistoryPair::new(4, 1);
    train_step(&mut bundle, &batch(5), &batch(6), &cfg, &mut buffers, 2e-4).unwrap();
    assert_ne!(snapshot(&bundle, false), g0);
    assert_eq!(snapshot(&bundle, true), q0);
}

#[test]
fn non_finite_loss_names_the_term() {
    let cfg = tiny();
    let mut bundle = ModelBundle::<f32>::new(cfg.net, 4).unwrap();
    let id = bundle.store().find("d_a.head.bias").unwrap();
    bundle.store_mut().get_mut(id).value.data_mut()[0] = f32::NAN;
    let mut buffers = HistoryPair::new(4, 1);
    match train_step(&mut bundle, &batch(7), &batch(8), &cfg, &mut buffers, 2e-4) {
        Err(Error::NonFinite(term)) => assert_eq!(term, "gan_g"),
        other => panic!("expected a non-finite error, got {other:?}"),
    }
}

#[test]
fn seeded_runs_are_bitwise_reproducible() {
    let spec = SyntheticSpec {
        task: SynthTask::Stripes,
        image_side: 8,
        count: 3,
        seed: 5,
    };
    let data = synth_generate(&spec).unwrap();
    let cfg = TrainConfig {
        steps_per_epoch: 2,
        epochs: 2,
        ..tiny()
    };
    let run = || -> Vec<(String, Vec<u32>)> {
        let b: ModelBundle<f32> = train_loop(&cfg, &data.a, &data.b, &mut NullSink).unwrap();
        b.named_tensors()
            .map(|(n, t)| (n.to_string(), t.data().iter().map(|v| v.to_bits()).collect()))
            .collect()
    };
    assert_eq!(run(), run());
}

#[test]
fn empty_dataset_rejected() {
    let spec = SyntheticSpec {
        task: SynthTask::Invert,
        image_side: 8,
        count: 2,
        seed: 0,
    };
    let mut data = synth_generate(&spec).unwrap();
    data.b.images.clear();
    data.b.manifest.clear();
    let r: Result<ModelBundle<f32>> = train_loop(&tiny(), &data.a, &data.b, &mut NullSink);
    assert!(matches!(r, Err(Error::Data(_))));
}

#[test]
fn config_validation() {
    assert!(TrainConfig { epochs: 0, ..tiny() }.validate().is_err());
    assert!(TrainConfig { image_side: 10, ..tiny() }.validate().is_err());
    let too_deep = TrainConfig {
        net: NetConfig {
            disc_layers: 3,
            ..tiny().net
        },
        ..tiny()
    };
    assert!(too_deep.validate().is_err());
    assert!(TrainConfig::smoke().validate().is_ok());
    assert!(TrainConfig::default().validate().is_ok());
}

struct Recorder(Vec<LossReport>);

impl TrainSink<f32> for Recorder {
    fn on_step(&mut self, _: usize, _: usize, r: &LossReport) -> Result<()> {
        self.0.push(*r);
        Ok(())
    }
}

#[test]
fn invert_task_reconstruction_halves_in_200_steps() {
    let spec = SyntheticSpec {
        task: SynthTask::Invert,
        image_side: 16,
        count: 64,
        seed: 0,
    };
    let data = synth_generate(&spec).unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        steps_per_epoch: 200,
        ..TrainConfig::smoke()
    };
    let mut rec = Recorder(Vec::new());
    let _: ModelBundle<f32> = train_loop(&cfg, &data.a, &data.b, &mut rec).unwrap();
    let recon: Vec<f64> = rec.0.iter().map(|r| r.id + r.zid).collect();
    let tail = &recon[recon.len() - 20..];
    let late = tail.iter().sum::<f64>() / tail.len() as f64;
    assert!(late <= 0.5 * recon[0], "step 1 {} vs last-20 mean {late}", recon[0]);
}
