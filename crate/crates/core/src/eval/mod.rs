//! Measurement stack: Fréchet distance between feature distributions,
//! latent-space visualization, foreground extraction and ROC analysis.

mod features;
mod foreground;
mod frechet;
mod roc;
mod viz;

pub use features::{extract_features, DownsampleExtractor, EncoderExtractor, FeatureExtractor, FeatureSet};
pub use foreground::{foreground_extract, foreground_scores, luma_exceeds, luma_milli, WHITE_LUMA_THRESHOLD};
pub use frechet::{fit_gaussian, frechet_distance, matrix_sqrt_psd, GaussianSummary};
pub use roc::{roc_auc, RocCurve};
pub use viz::{latent_magnitude_map, latent_pca, latent_pca_viz, GrayImage, LatentPca};
