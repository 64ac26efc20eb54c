use crossnet_core::data::RgbImage;
use crossnet_core::eval::{
    extract_features, fit_gaussian, foreground_extract, foreground_scores, frechet_distance, latent_magnitude_map,
    latent_pca, latent_pca_viz, luma_exceeds, matrix_sqrt_psd, roc_auc, DownsampleExtractor, EncoderExtractor,
    FeatureSet, GaussianSummary, WHITE_LUMA_THRESHOLD,
};
use crossnet_core::nn::{ModelBundle, NetConfig};
use crossnet_core::Tensor;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Closed form for Σ1 = BBᵀ, Σ2 = CCᵀ: tr((Σ1^½ Σ2 Σ1^½)^½) is the nuclear
/// norm of BᵀC, so no matrix square root is involved.
fn oracle_fid(mu1: &DVector<f64>, b: &DMatrix<f64>, mu2: &DVector<f64>, c: &DMatrix<f64>) -> f64 {
    let nuclear: f64 = (b.transpose() * c).singular_values().iter().sum();
    (mu1 - mu2).norm_squared() + b.norm_squared() + c.norm_squared() - 2.0 * nuclear
}

fn summary(mean: DVector<f64>, cov: DMatrix<f64>) -> GaussianSummary {
    GaussianSummary::new(mean, cov).unwrap()
}

#[test]
fn isotropic_shift_is_squared_distance() {
    let g1 = summary(DVector::zeros(4), DMatrix::identity(4, 4));
    let g2 = summary(DVector::from_element(4, 3.0), DMatrix::identity(4, 4));
    let fid = frechet_distance(&g1, &g2).unwrap();
    assert!((fid - 36.0).abs() <= 1e-9, "{fid}");
}

#[test]
fn fid_matches_nuclear_norm_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for d in [1, 2, 5, 9, 16] {
        for _ in 0..4 {
            let b = random_matrix(&mut rng, d, d);
            let c = random_matrix(&mut rng, d, d);
            let mu1 = random_matrix(&mut rng, d, 1).column(0).into_owned();
            let mu2 = random_matrix(&mut rng, d, 1).column(0).into_owned();
            let expected = oracle_fid(&mu1, &b, &mu2, &c);
            let got = frechet_distance(
                &summary(mu1.clone(), &b * b.transpose()),
                &summary(mu2.clone(), &c * c.transpose()),
            )
            .unwrap();
            assert!(
                (got - expected).abs() <= 1e-6 * expected.abs().max(1.0),
                "d={d}: {got} vs {expected}"
            );
        }
    }
}

#[test]
fn fid_is_zero_on_self_and_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows = |rng: &mut ChaCha8Rng, shift: f64| -> Vec<Vec<f64>> {
        (0..300).map(|_| (0..12).map(|_| rng.sample::<f64, _>(StandardNormal) + shift).collect()).collect()
    };
    let x = fit_gaussian(&FeatureSet::from_rows(rows(&mut rng, 0.0), "t").unwrap()).unwrap();
    let y = fit_gaussian(&FeatureSet::from_rows(rows(&mut rng, 0.5), "t").unwrap()).unwrap();
    assert!(frechet_distance(&x, &x).unwrap() <= 1e-8);
    let (xy, yx) = (frechet_distance(&x, &y).unwrap(), frechet_distance(&y, &x).unwrap());
    assert!(xy > 1.0);
    assert!((xy - yx).abs() <= 1e-8 * xy, "{xy} vs {yx}");
}

#[test]
fn fid_from_samples_approaches_population_value() {
    let d = 8;
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let b = random_matrix(&mut rng, d, d);
    let c = random_matrix(&mut rng, d, d) * 0.5;
    let mu1 = DVector::zeros(d);
    let mu2 = DVector::from_fn(d, |i, _| if i % 2 == 0 { 1.0 } else { -0.5 });
    let population = oracle_fid(&mu1, &b, &mu2, &c);

    let mut draw = |mu: &DVector<f64>, l: &DMatrix<f64>| -> FeatureSet {
        let rows = (0..n)
            .map(|_| {
                let e = random_matrix(&mut rng, d, 1);
                (mu + l * e).iter().copied().collect()
            })
            .collect();
        FeatureSet::from_rows(rows, "gaussian").unwrap()
    };
    let x = fit_gaussian(&draw(&mu1, &b)).unwrap();
    let y = fit_gaussian(&draw(&mu2, &c)).unwrap();
    let estimate = frechet_distance(&x, &y).unwrap();
    assert!(
        (estimate - population).abs() <= 0.05 * population,
        "estimate {estimate} vs population {population}"
    );
}

#[test]
fn psd_square_root_squares_back() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in [3, 16] {
        let a = random_matrix(&mut rng, d, d);
        let m = &a * a.transpose();
        let r = matrix_sqrt_psd(&m).unwrap();
        assert!((&r - r.transpose()).norm() <= 1e-12 * r.norm());
        assert!((&r * &r - &m).norm() <= 1e-6 * m.norm());
        let eig = r.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-9 * m.norm()));
    }
    assert!(matrix_sqrt_psd(&DMatrix::zeros(2, 3)).is_err());
}

#[test]
fn fitted_covariance_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rows: Vec<Vec<f64>> = (0..50).map(|_| (0..6).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let g = fit_gaussian(&FeatureSet::from_rows(rows, "t").unwrap()).unwrap();
    assert!((&g.cov - g.cov.transpose()).amax() <= 1e-12);
}

#[test]
fn mismatched_dimensions_rejected() {
    let g1 = summary(DVector::zeros(2), DMatrix::identity(2, 2));
    let g2 = summary(DVector::zeros(3), DMatrix::identity(3, 3));
    assert!(frechet_distance(&g1, &g2).is_err());
    assert!(GaussianSummary::new(DVector::zeros(2), DMatrix::identity(3, 3)).is_err());
}

#[test]
fn downsample_features_of_flat_images_agree() {
    let images = Tensor::<f32>::full(&[3, 3, 16, 16], 0.25);
    let fs = extract_features(&images, &DownsampleExtractor::default()).unwrap();
    assert_eq!((fs.n_samples, fs.dim), (3, 192));
    assert_eq!(fs.extractor, "downsample8");
    assert!(fs.data.iter().all(|&v| (v - 0.25).abs() < 1e-7));
    assert_eq!(fs.row(0), fs.row(2));
}

#[test]
fn downsample_features_are_block_means() {
    // 4x4 single image down to 2x2: each feature is the mean of one 2x2 block
    let images = Tensor::<f64>::from_fn(&[1, 3, 4, 4], |i| i as f64);
    let fs = extract_features(&images, &DownsampleExtractor { side: 2 }).unwrap();
    let mut expected = Vec::new();
    for ch in 0..3 {
        for by in 0..2 {
            for bx in 0..2 {
                let mut acc = 0.0;
                for y in 0..2 {
                    for x in 0..2 {
                        acc += (ch * 16 + (2 * by + y) * 4 + 2 * bx + x) as f64;
                    }
                }
                expected.push(acc / 4.0);
            }
        }
    }
    for (g, e) in fs.row(0).iter().zip(&expected) {
        assert!((g - e).abs() < 1e-12, "{g} vs {e}");
    }
}

#[test]
fn encoder_features_have_latent_width() {
    let cfg = NetConfig {
        base_width: 4,
        latent_channels: 6,
        n_res_blocks: 1,
        ..NetConfig::default()
    };
    let bundle = ModelBundle::<f32>::generators_only(cfg, 0).unwrap();
    let images = Tensor::<f32>::from_fn(&[2, 3, 8, 8], |i| ((i % 7) as f32 - 3.0) / 4.0);
    let fs = extract_features(
        &images,
        &EncoderExtractor {
            bundle: &bundle,
            a_to_b: false,
        },
    )
    .unwrap();
    assert_eq!((fs.n_samples, fs.dim), (2, 6));
    assert_eq!(fs.extractor, "encoder-ba");
}

#[test]
fn rank_one_latent_has_one_component() {
    // every position is a multiple of a single direction
    let dir = [0.6, 0.0, -0.8, 0.0];
    let (h, w) = (3, 5);
    let z = Tensor::<f64>::from_fn(&[1, 4, h, w], |i| {
        let (ch, p) = (i / (h * w), i % (h * w));
        dir[ch] * (p as f64 - 4.0)
    });
    let pca = latent_pca(&z).unwrap();
    let lead = &pca.components[0];
    let cos: f64 = lead.iter().zip(dir).map(|(a, b)| a * b).sum();
    assert!((cos.abs() - 1.0).abs() <= 1e-6);
    for v in &pca.variances[1..] {
        assert!(*v <= 1e-10 * pca.variances[0]);
    }
    let img = latent_pca_viz(&z).unwrap();
    let pixels = img.pixels();
    for p in pixels.chunks_exact(3) {
        assert_eq!((p[1], p[2]), (0, 0));
    }
    assert!(pixels.chunks_exact(3).any(|p| p[0] == 255));
    assert!(pixels.chunks_exact(3).any(|p| p[0] == 0));
}

#[test]
fn pca_components_are_orthonormal() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let z = Tensor::<f32>::from_fn(&[1, 8, 6, 6], |_| rng.random_range(-1.0..1.0));
    let pca = latent_pca(&z).unwrap();
    assert_eq!(pca.components.len(), 3);
    assert_eq!((pca.width, pca.height), (6, 6));
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = pca.components[i].iter().zip(&pca.components[j]).map(|(a, b)| a * b).sum();
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((dot - expected).abs() <= 1e-6);
        }
    }
    assert!(pca.variances.windows(2).all(|v| v[0] >= v[1]));
}

#[test]
fn zero_latent_gives_flat_maps() {
    let z = Tensor::<f32>::zeros(&[1, 4, 4, 4]);
    let mag = latent_magnitude_map(&z).unwrap();
    assert_eq!((mag.width, mag.height), (4, 4));
    assert!(mag.pixels.iter().all(|&v| v == 0));
    let viz = latent_pca_viz(&z).unwrap();
    assert!(viz.pixels().iter().all(|&v| v == 0));
}

#[test]
fn magnitude_map_peaks_at_largest_norm() {
    let z = Tensor::<f32>::from_fn(&[1, 2, 2, 2], |i| [0.0, 1.0, 2.0, 0.5, 0.0, 0.0, 2.0, 0.0][i]);
    let mag = latent_magnitude_map(&z).unwrap();
    // norms: 0, 1, 2√2, 0.5
    assert_eq!(mag.pixels[0], 0);
    assert_eq!(mag.pixels[2], 255);
    assert!(mag.pixels[1] > mag.pixels[3]);
}

fn random_image(rng: &mut ChaCha8Rng, side: usize) -> RgbImage {
    RgbImage::new(side, side, (0..side * side * 3).map(|_| rng.random()).collect()).unwrap()
}

#[test]
fn foreground_pixels_are_white_or_original() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let original = random_image(&mut rng, 9);
        // bias the translation toward bright values so both branches occur
        let translated = RgbImage::new(9, 9, (0..243).map(|_| rng.random_range(200..=255)).collect()).unwrap();
        let out = foreground_extract(&original, &translated).unwrap();
        let scores = foreground_scores(&translated);
        for y in 0..9 {
            for x in 0..9 {
                let white = luma_exceeds(translated.pixel(x, y), WHITE_LUMA_THRESHOLD);
                let expected = if white { [255, 255, 255] } else { original.pixel(x, y) };
                assert_eq!(out.pixel(x, y), expected);
                assert_eq!(scores[y * 9 + x] < 255.0 - WHITE_LUMA_THRESHOLD as f64, white);
            }
        }
    }
}

#[test]
fn foreground_threshold_boundary() {
    let original = RgbImage::filled(1, 1, [10, 20, 30]);
    let at = foreground_extract(&original, &RgbImage::filled(1, 1, [243, 243, 243])).unwrap();
    assert_eq!(at.pixel(0, 0), [10, 20, 30]);
    let above = foreground_extract(&original, &RgbImage::filled(1, 1, [244, 244, 244])).unwrap();
    assert_eq!(above.pixel(0, 0), [255, 255, 255]);
}

/// Mann-Whitney form of the AUC: fraction of (positive, negative) pairs
/// ranked correctly, ties counting half.
fn pairwise_auc(scores: &[f64], truth: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &ti) in truth.iter().enumerate() {
        for (j, &tj) in truth.iter().enumerate() {
            if ti && !tj {
                pairs += 1.0;
                wins += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

#[test]
fn ideal_and_constant_scores() {
    let truth: Vec<bool> = (0..40).map(|i| i % 3 == 0).collect();
    let ideal: Vec<f64> = truth.iter().map(|&t| t as u8 as f64).collect();
    assert_eq!(roc_auc(&ideal, &truth).unwrap().auc, 1.0);
    assert_eq!(roc_auc(&[0.7; 40], &truth).unwrap().auc, 0.5);
}

#[test]
fn random_scores_are_near_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let truth: Vec<bool> = (0..10_000).map(|_| rng.random_bool(0.3)).collect();
    let scores: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
    let auc = roc_auc(&scores, &truth).unwrap().auc;
    assert!((auc - 0.5).abs() <= 0.02, "{auc}");
}

#[test]
fn roc_curve_is_monotone_and_closed() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let truth: Vec<bool> = (0..200).map(|_| rng.random_bool(0.5)).collect();
    let scores: Vec<f64> = (0..200).map(|_| rng.random_range(0..20) as f64).collect();
    let roc = roc_auc(&scores, &truth).unwrap();
    assert_eq!(roc.points[0], (0.0, 0.0));
    assert_eq!(*roc.points.last().unwrap(), (1.0, 1.0));
    assert!(roc.points.windows(2).all(|p| p[1].0 >= p[0].0 && p[1].1 >= p[0].1));
    assert!(roc.thresholds.windows(2).all(|t| t[0] > t[1]));
}

proptest! {
    #[test]
    fn auc_matches_pairwise_count(
        pairs in prop::collection::vec((0u8..12, any::<bool>()), 2..60)
    ) {
        let truth: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(truth.iter().any(|&t| t) && truth.iter().any(|&t| !t));
        let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let auc = roc_auc(&scores, &truth).unwrap().auc;
        prop_assert!((auc - pairwise_auc(&scores, &truth)).abs() <= 1e-12);
    }

    #[test]
    fn auc_invariant_under_monotone_maps(
        pairs in prop::collection::vec((-50i32..50, any::<bool>()), 2..60)
    ) {
        let truth: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(truth.iter().any(|&t| t) && truth.iter().any(|&t| !t));
        let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let warped: Vec<f64> = scores.iter().map(|s| (s / 10.0).exp() * 3.0 - 1.0).collect();
        let a = roc_auc(&scores, &truth).unwrap().auc;
        let b = roc_auc(&warped, &truth).unwrap().auc;
        prop_assert!((a - b).abs() <= 1e-12);
    }
}
