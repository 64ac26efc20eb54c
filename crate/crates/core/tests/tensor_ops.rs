use crossnet_core::optim::{adam_step, lr_factor};
use crossnet_core::param::ParamStore;
use crossnet_core::tape::{conv_output_side, conv_transpose_output_side};
use crossnet_core::{Error, PadSpec, Tape, Tensor};

fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
    Tensor::new(shape, data.to_vec()).unwrap()
}

#[test]
fn identity_kernel_conv() {
    let mut tape = Tape::new();
    let x = tape.constant(t(&[1, 1, 3, 3], &[1., 2., 3., 4., 5., 6., 7., 8., 9.]));
    let k = tape.constant(t(&[1, 1, 1, 1], &[1.0]));
    let y = tape.conv2d(x, k, 1, PadSpec::NONE).unwrap();
    assert_eq!(tape.value(y), tape.value(x));
}

#[test]
fn sliding_window_sums() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::full(&[1, 1, 4, 4], 1.0f64));
    let k = tape.constant(Tensor::full(&[1, 1, 2, 2], 1.0));
    let y = tape.conv2d(x, k, 2, PadSpec::NONE).unwrap();
    assert_eq!(tape.shape(y), &[1, 1, 2, 2]);
    assert_eq!(tape.value(y).data(), &[4.0; 4]);
}

#[test]
fn conv_channel_mismatch_names_axis() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::<f32>::zeros(&[1, 2, 4, 4]));
    let k = tape.constant(Tensor::zeros(&[1, 3, 3, 3]));
    match tape.conv2d(x, k, 1, PadSpec::Zero(1)) {
        Err(Error::Dimension { detail, .. }) => assert!(detail.contains("axis C"), "{detail}"),
        other => panic!("expected dimension error, got {other:?}"),
    }
}

#[test]
fn transpose_identity_and_output_padding_check() {
    let mut tape = Tape::new();
    let x = tape.constant(t(&[1, 1, 2, 2], &[1., -2., 3., 0.5]));
    let k = tape.constant(t(&[1, 1, 1, 1], &[1.0]));
    let y = tape.conv2d_transpose(x, k, 1, 0, 0).unwrap();
    assert_eq!(tape.value(y), tape.value(x));
    assert!(tape.conv2d_transpose(x, k, 2, 0, 2).is_err());
}

/// Every (side, kernel, stride, pad, output_padding) combination the
/// networks use, checked against the output-size formulas.
#[test]
fn shape_table() {
    for side in [8usize, 16, 32, 64, 256] {
        let cases = [
            (7, 1, PadSpec::Reflect(3), side),
            (3, 1, PadSpec::Reflect(1), side),
            (3, 2, PadSpec::Zero(1), side / 2),
            (4, 2, PadSpec::Zero(1), side / 2),
            (4, 1, PadSpec::Zero(1), side - 1),
        ];
        for (k, stride, pad, expected) in cases {
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::<f32>::zeros(&[1, 1, side, side]));
            let kv = tape.constant(Tensor::zeros(&[1, 1, k, k]));
            let y = tape.conv2d(x, kv, stride, pad).unwrap();
            assert_eq!(tape.shape(y), &[1, 1, expected, expected], "side {side} k {k} s {stride}");
            assert_eq!(conv_output_side(side, k, stride, pad.total()), Some(expected));
        }
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::<f32>::zeros(&[1, 2, side / 4, side / 4]));
        let kv = tape.constant(Tensor::zeros(&[2, 1, 3, 3]));
        let up = tape.conv2d_transpose(z, kv, 2, 1, 1).unwrap();
        assert_eq!(tape.shape(up), &[1, 1, side / 2, side / 2]);
        assert_eq!(conv_transpose_output_side(side / 4, 3, 2, 2, 1), Some(side / 2));
    }
}

#[test]
fn instance_norm_examples() {
    let mut tape = Tape::new();
    let g = tape.constant(t(&[1], &[1.0]));
    let b = tape.constant(t(&[1], &[0.0]));
    let flat = tape.constant(Tensor::full(&[1, 1, 2, 2], 3.0));
    let y = tape.instance_norm(flat, g, b, 1e-5).unwrap();
    assert!(tape.value(y).data().iter().all(|&v| v == 0.0));

    let x = tape.constant(t(&[1, 1, 1, 4], &[1., 2., 3., 4.]));
    let y = tape.instance_norm(x, g, b, 0.0).unwrap();
    let std = 1.25f64.sqrt();
    for (out, v) in tape.value(y).data().iter().zip([1., 2., 3., 4.]) {
        assert!((out - (v - 2.5) / std).abs() < 1e-12);
    }

    let single = tape.constant(Tensor::full(&[1, 1, 1, 1], 3.0));
    assert!(matches!(tape.instance_norm(single, g, b, 1e-5), Err(Error::DegenerateStatistics(1))));
}

#[test]
fn instance_norm_moments() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::from_fn(&[2, 3, 4, 5], |i| ((i * 37 % 11) as f64).sin() * 4.0 + 1.0));
    let g = tape.constant(Tensor::full(&[3], 1.0));
    let b = tape.constant(Tensor::zeros(&[3]));
    let y = tape.instance_norm(x, g, b, 1e-5).unwrap();
    for slice in tape.value(y).data().chunks(20) {
        let mean = slice.iter().sum::<f64>() / 20.0;
        let var = slice.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 20.0;
        assert!(mean.abs() <= 1e-5);
        assert!((var - 1.0).abs() <= 1e-3);
    }
}

#[test]
fn activation_examples() {
    let mut tape = Tape::new();
    let x = tape.constant(t(&[3], &[0.0, -2.0, 1.5]));
    let th = tape.tanh(x);
    assert_eq!(tape.value(th).data()[0], 0.0);
    let lr = tape.leaky_relu(x, 0.2);
    assert!((tape.value(lr).data()[1] + 0.4).abs() < 1e-15);
    let r = tape.relu(x);
    assert_eq!(tape.value(r).data(), &[0.0, 0.0, 1.5]);
    let big = tape.constant(t(&[2], &[-40.0, 40.0]));
    let tb = tape.tanh(big);
    assert!(tape.value(tb).data().iter().all(|v| v.abs() <= 1.0));
}

#[test]
fn leaky_relu_subgradient_at_zero_is_slope() {
    let mut tape = Tape::new();
    let x = tape.leaf(t(&[1], &[0.0]));
    let y = tape.leaky_relu(x, 0.2);
    let s = tape.sum(y);
    tape.backward(s, &mut ParamStore::new()).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &[0.2]);
}

#[test]
fn reflection_examples() {
    let mut tape = Tape::new();
    let x = tape.constant(t(&[1, 1, 2, 3], &[1., 2., 3., 4., 5., 6.]));
    assert_eq!(tape.pad_reflect(x, 0).unwrap(), x);
    let p = tape.pad_reflect(x, 1).unwrap();
    assert_eq!(tape.shape(p), &[1, 1, 4, 5]);
    assert_eq!(&tape.value(p).data()[5..10], &[2., 1., 2., 3., 2.]);
    assert!(tape.pad_reflect(x, 2).is_err());
}

#[test]
fn reduction_examples() {
    let mut tape = Tape::new();
    let a = tape.constant(t(&[2], &[1.0, 2.0]));
    let b = tape.constant(t(&[2], &[0.0, 4.0]));
    let same = tape.l1_mean(a, a).unwrap();
    assert_eq!(tape.scalar_value(same), 0.0);
    let l1 = tape.l1_mean(a, b).unwrap();
    assert_eq!(tape.scalar_value(l1), 1.5);
    let c = tape.constant(t(&[2], &[0.0, 2.0]));
    let sq = tape.sq_mean(c, 1.0);
    assert_eq!(tape.scalar_value(sq), 1.0);
    let short = tape.constant(t(&[3], &[0.0; 3]));
    assert!(tape.l1_mean(a, short).is_err());
    assert!(tape.add(a, short).is_err());
}

#[test]
fn backward_of_sum_is_ones() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::from_fn(&[2, 3], |i| i as f64 * 0.7 - 1.0));
    let s = tape.sum(x);
    tape.backward(s, &mut ParamStore::new()).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &[1.0; 6]);
}

#[test]
fn parameter_gradients_accumulate_across_tapes() {
    let mut store = ParamStore::new();
    let id = store.add("w", t(&[2], &[1.0, -1.0])).unwrap();
    for _ in 0..2 {
        let mut tape = Tape::new();
        let w = tape.param(&store, id);
        let s = tape.sum(w);
        tape.backward(s, &mut store).unwrap();
    }
    assert_eq!(store.get(id).grad.as_deref(), Some(&[2.0, 2.0][..]));
}

#[test]
fn tape_rejects_reuse_and_non_scalar_loss() {
    let mut store = ParamStore::new();
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::<f64>::zeros(&[2]));
    assert!(matches!(tape.backward(x, &mut store), Err(Error::NonScalarLoss(_))));
    let s = tape.sum(x);
    tape.backward(s, &mut store).unwrap();
    assert!(matches!(tape.backward(s, &mut store), Err(Error::TapeConsumed)));
}

#[test]
fn backward_visits_in_reverse_execution_order() {
    let mut tape = Tape::new();
    let x = tape.leaf(t(&[2], &[0.3, -0.4]));
    let a = tape.tanh(x);
    let b = tape.scale(a, 2.0);
    let c = tape.add(a, b).unwrap();
    let s = tape.sum(c);
    tape.backward(s, &mut ParamStore::new()).unwrap();
    let order = tape.backward_visit_order().to_vec();
    let mut sorted = order.clone();
    sorted.sort_unstable_by(|p, q| q.cmp(p));
    assert_eq!(order, sorted);
    assert_eq!(order.first(), Some(&s.index()));
    assert_eq!(order.last(), Some(&x.index()));
}

#[test]
fn frozen_parameters_get_no_gradient() {
    let mut store = ParamStore::new();
    let a = store.add("a", t(&[1], &[2.0])).unwrap();
    let b = store.add("b", t(&[1], &[3.0])).unwrap();
    let mut tape = Tape::new();
    tape.freeze([b]);
    let (va, vb) = (tape.param(&store, a), tape.param(&store, b));
    let s = tape.add(va, vb).unwrap();
    tape.backward(s, &mut store).unwrap();
    assert!(store.get(a).grad.is_some());
    assert!(store.get(b).grad.is_none());
}

#[test]
fn replay_is_bitwise_deterministic() {
    let run = || {
        let mut store = ParamStore::new();
        let id = store.add("k", Tensor::from_fn(&[2, 2, 3, 3], |i| (i as f32 * 0.37).sin())).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_fn(&[1, 2, 6, 6], |i| (i as f32 * 0.11).cos()));
        let k = tape.param(&store, id);
        let y = tape.conv2d(x, k, 1, PadSpec::Reflect(1)).unwrap();
        let y = tape.tanh(y);
        let l = tape.sq_mean(y, 0.5);
        tape.backward(l, &mut store).unwrap();
        store.get(id).grad.clone().unwrap()
    };
    let (g1, g2) = (run(), run());
    assert_eq!(
        g1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        g2.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn adam_examples() {
    let mut store = ParamStore::new();
    let id = store.add("theta", t(&[1], &[0.0])).unwrap();
    store.get_mut(id).grad = Some(vec![1.0]);
    adam_step(&mut store, &[id], 0.1, 0.9, 0.999, 1e-8).unwrap();
    let p = store.get(id);
    assert!((p.value.data()[0] + 0.1).abs() < 1e-6);
    assert_eq!(p.step_count, 1);
    assert!(p.grad.is_none());
    match adam_step(&mut store, &[id], 0.1, 0.9, 0.999, 1e-8) {
        Err(Error::MissingGradient(name)) => assert_eq!(name, "theta"),
        other => panic!("expected missing gradient, got {other:?}"),
    }
}

#[test]
fn schedule_holds_then_decays_to_zero() {
    assert_eq!(lr_factor(0, 200), 1.0);
    assert_eq!(lr_factor(99, 200), 1.0);
    assert!(lr_factor(150, 200) < 1.0);
    assert!(lr_factor(199, 200) > 0.0);
    let mut prev = 1.0;
    for e in 0..200 {
        let f = lr_factor(e, 200);
        assert!(f <= prev && f >= 0.0);
        prev = f;
    }
}
