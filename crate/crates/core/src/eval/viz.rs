use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::RgbImage;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Components whose variance falls below this fraction of the leading one
/// are treated as numerically absent and rendered flat.
const NEGLIGIBLE_VARIANCE: f64 = 1e-10;

/// 8-bit single-channel image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// Principal components of a latent code, treating each spatial position
/// as one `C_z`-dimensional sample.
#[derive(Clone, Debug)]
pub struct LatentPca {
    pub width: usize,
    pub height: usize,
    /// Up to three unit-length principal directions, by decreasing variance.
    pub components: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
    /// Projection of each position onto each component, row-major positions.
    pub scores: Vec<Vec<f64>>,
}

fn positions<T: Real>(z: &Tensor<T>) -> Result<(usize, usize, usize, Vec<Vec<f64>>)> {
    let (_, c, h, w) = z.dims4("latent_pca")?;
    let plane = h * w;
    let data = z.data();
    // first batch item only
    let samples = (0..plane)
        .map(|p| (0..c).map(|ch| data[ch * plane + p].to_f64()).collect())
        .collect();
    Ok((c, h, w, samples))
}

pub fn latent_pca<T: Real>(z: &Tensor<T>) -> Result<LatentPca> {
    let (c, h, w, samples) = positions(z)?;
    let n = h * w;
    if n < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: n });
    }
    let mut mean = vec![0.0; c];
    for s in &samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v / n as f64;
        }
    }
    let centered = DMatrix::from_fn(n, c, |i, j| samples[i][j] - mean[j]);
    let cov = centered.transpose() * &centered / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let k = c.min(3);
    let components: Vec<Vec<f64>> = order[..k]
        .iter()
        .map(|&j| eig.eigenvectors.column(j).iter().copied().collect())
        .collect();
    let variances: Vec<f64> = order[..k].iter().map(|&j| eig.eigenvalues[j].max(0.0)).collect();
    let scores = (0..n)
        .map(|i| {
            components
                .iter()
                .map(|dir| dir.iter().enumerate().map(|(j, d)| d * centered[(i, j)]).sum())
                .collect()
        })
        .collect();
    Ok(LatentPca {
        width: w,
        height: h,
        components,
        variances,
        scores,
    })
}

/// Min-max scales values onto 0..=255; a flat input maps to all zeros.
fn scale_to_u8(values: &[f64], flat: bool) -> Vec<u8> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if flat || !(hi > lo) {
        return vec![0; values.len()];
    }
    values
        .iter()
        .map(|v| libm::round((v - lo) / (hi - lo) * 255.0) as u8)
        .collect()
}

/// The top three principal-component scores per position, each min-max
/// scaled to one RGB channel. Missing or negligible components are black.
pub fn latent_pca_viz<T: Real>(z: &Tensor<T>) -> Result<RgbImage> {
    let pca = latent_pca(z)?;
    let lead = pca.variances.first().copied().unwrap_or(0.0);
    let n = pca.width * pca.height;
    let mut channels = Vec::with_capacity(3);
    for k in 0..3 {
        if k < pca.components.len() {
            let flat = !(pca.variances[k] > NEGLIGIBLE_VARIANCE * lead);
            let vals: Vec<f64> = pca.scores.iter().map(|s| s[k]).collect();
            channels.push(scale_to_u8(&vals, flat));
        } else {
            channels.push(vec![0; n]);
        }
    }
    let pixels = (0..n).flat_map(|p| [channels[0][p], channels[1][p], channels[2][p]]).collect();
    RgbImage::new(pca.width, pca.height, pixels)
}

/// Per-position L2 norm of the latent vector, min-max scaled.
pub fn latent_magnitude_map<T: Real>(z: &Tensor<T>) -> Result<GrayImage> {
    let (_, h, w, samples) = positions(z)?;
    let norms: Vec<f64> = samples
        .iter()
        .map(|s| libm::sqrt(s.iter().map(|v| v * v).sum()))
        .collect();
    let all_zero = norms.iter().all(|&v| v == 0.0);
    Ok(GrayImage {
        width: w,
        height: h,
        pixels: scale_to_u8(&norms, all_zero),
    })
}
