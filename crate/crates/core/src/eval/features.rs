use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::data::area_weights;
use crate::error::{Error, Result};
use crate::nn::{CrossModel, ModelBundle};
use crate::scalar::Real;
use crate::tape::Tape;
use crate::tensor::Tensor;

/// `n_samples x dim` feature matrix, row-major, tagged with its extractor.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    pub n_samples: usize,
    pub dim: usize,
    pub data: Vec<f64>,
    pub extractor: String,
}

impl FeatureSet {
    pub fn from_rows(rows: Vec<Vec<f64>>, extractor: impl Into<String>) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.is_empty() || dim == 0 {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Data("feature rows differ in length".into()));
        }
        Ok(FeatureSet {
            n_samples: rows.len(),
            dim,
            data: rows.concat(),
            extractor: extractor.into(),
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Maps a `[N, 3, H, W]` image batch to one feature row per image.
pub trait FeatureExtractor<T> {
    fn id(&self) -> String;
    fn extract(&self, images: &Tensor<T>) -> Result<Vec<Vec<f64>>>;
}

/// Area-downsamples every channel to `side x side` and flattens
/// (`3·side²` features; 192 at the default side of 8).
#[derive(Clone, Copy, Debug)]
pub struct DownsampleExtractor {
    pub side: usize,
}

impl Default for DownsampleExtractor {
    fn default() -> Self {
        DownsampleExtractor { side: 8 }
    }
}

impl<T: Real> FeatureExtractor<T> for DownsampleExtractor {
    fn id(&self) -> String {
        format!("downsample{}", self.side)
    }

    fn extract(&self, images: &Tensor<T>) -> Result<Vec<Vec<f64>>> {
        let (n, c, h, w) = images.dims4("extract_features")?;
        let wy = area_weights(h, self.side);
        let wx = area_weights(w, self.side);
        let data = images.data();
        Ok((0..n)
            .map(|i| {
                let mut row = Vec::with_capacity(c * self.side * self.side);
                for ch in 0..c {
                    let base = (i * c + ch) * h * w;
                    for taps_y in &wy {
                        for taps_x in &wx {
                            let mut acc = 0.0;
                            for &(sy, fy) in taps_y {
                                for &(sx, fx) in taps_x {
                                    acc += fy * fx * data[base + sy * w + sx].to_f64();
                                }
                            }
                            row.push(acc);
                        }
                    }
                }
                row
            })
            .collect())
    }
}

/// Global average of a trained encoder's latent code (`C_z` features).
pub struct EncoderExtractor<'a, T> {
    pub bundle: &'a ModelBundle<T>,
    /// `true` for `E_ab`, `false` for `E_ba`.
    pub a_to_b: bool,
}

impl<T: Real> FeatureExtractor<T> for EncoderExtractor<'_, T> {
    fn id(&self) -> String {
        String::from(if self.a_to_b { "encoder-ab" } else { "encoder-ba" })
    }

    fn extract(&self, images: &Tensor<T>) -> Result<Vec<Vec<f64>>> {
        let (n, _, _, _) = images.dims4("extract_features")?;
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut tape = Tape::new();
            let x = tape.constant(images.batch_item(i)?);
            let z = if self.a_to_b {
                self.bundle.encode_ab(&mut tape, x)?
            } else {
                self.bundle.encode_ba(&mut tape, x)?
            };
            let (_, cz, zh, zw) = tape.value(z).dims4("extract_features")?;
            let plane = zh * zw;
            let data = tape.value(z).data();
            rows.push(
                (0..cz)
                    .map(|c| data[c * plane..(c + 1) * plane].iter().map(|v| (*v).to_f64()).sum::<f64>() / plane as f64)
                    .collect(),
            );
        }
        Ok(rows)
    }
}

pub fn extract_features<T: Real>(images: &Tensor<T>, extractor: &dyn FeatureExtractor<T>) -> Result<FeatureSet> {
    FeatureSet::from_rows(extractor.extract(images)?, extractor.id())
}
