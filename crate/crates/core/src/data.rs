//! Images, normalization, unpaired sampling and the synthetic two-domain
//! tasks used to exercise training end to end.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Largest accepted image side.
pub const MAX_SIDE: usize = 8192;

/// 8-bit RGB image, interleaved row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || width > MAX_SIDE || height > MAX_SIDE {
            return Err(Error::Data(format!(
                "image dimensions {width}x{height} outside 1..={MAX_SIDE}"
            )));
        }
        if pixels.len() != width * height * 3 {
            return Err(Error::Data(format!(
                "{width}x{height} RGB image needs {} bytes, got {}",
                width * height * 3,
                pixels.len()
            )));
        }
        Ok(RgbImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let pixels = rgb.iter().copied().cycle().take(width * height * 3).collect();
        RgbImage {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Largest centered square.
    pub fn center_crop_square(&self) -> RgbImage {
        let side = self.width.min(self.height);
        let (x0, y0) = ((self.width - side) / 2, (self.height - side) / 2);
        let mut pixels = Vec::with_capacity(side * side * 3);
        for y in y0..y0 + side {
            let row = (y * self.width + x0) * 3;
            pixels.extend_from_slice(&self.pixels[row..row + side * 3]);
        }
        RgbImage {
            width: side,
            height: side,
            pixels,
        }
    }

    /// Area (box-filter) resampling to `width` x `height`.
    pub fn resize_area(&self, width: usize, height: usize) -> RgbImage {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let wx = area_weights(self.width, width);
        let wy = area_weights(self.height, height);
        let mut pixels = Vec::with_capacity(width * height * 3);
        for row in &wy {
            for col in &wx {
                let mut acc = [0.0f64; 3];
                for &(sy, fy) in row {
                    for &(sx, fx) in col {
                        let p = self.pixel(sx, sy);
                        for c in 0..3 {
                            acc[c] += fy * fx * p[c] as f64;
                        }
                    }
                }
                for v in acc {
                    pixels.push(libm::round(v).clamp(0.0, 255.0) as u8);
                }
            }
        }
        RgbImage {
            width,
            height,
            pixels,
        }
    }

    /// Center crop to a square, then area-resample to `side`.
    pub fn preprocess(&self, side: usize) -> RgbImage {
        self.center_crop_square().resize_area(side, side)
    }
}

/// For each output index, the source indices it covers and their
/// normalized overlap weights.
pub(crate) fn area_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let (lo, hi) = (o as f64 * scale, (o + 1) as f64 * scale);
            let mut taps = Vec::new();
            let mut s = libm::floor(lo) as usize;
            while (s as f64) < hi && s < src {
                let overlap = (hi.min(s as f64 + 1.0) - lo.max(s as f64)).max(0.0);
                if overlap > 0.0 {
                    taps.push((s, overlap / scale));
                }
                s += 1;
            }
            taps
        })
        .collect()
}

/// Binary foreground mask, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn fraction(&self) -> f64 {
        self.bits.iter().filter(|&&b| b).count() as f64 / self.bits.len() as f64
    }
}

/// `v / 127.5 - 1`, mapping 0..=255 onto [-1, 1].
pub fn normalize_value(v: u8) -> f64 {
    v as f64 / 127.5 - 1.0
}

/// Inverse of [`normalize_value`]: clamps to [0, 255] and rounds half up.
pub fn denormalize_value(x: f64) -> u8 {
    let v = (x + 1.0) * 127.5;
    if v.is_nan() {
        return 0;
    }
    libm::floor(v + 0.5).clamp(0.0, 255.0) as u8
}

/// Stacks same-sized images into a `[N, 3, H, W]` batch in [-1, 1].
pub fn images_to_batch<T: Real>(images: &[&RgbImage]) -> Result<Tensor<T>> {
    let first = images
        .first()
        .ok_or_else(|| Error::Data("empty image list".into()))?;
    let (w, h) = (first.width, first.height);
    let plane = w * h;
    let mut data = vec![T::zero(); images.len() * 3 * plane];
    for (n, img) in images.iter().enumerate() {
        if (img.width, img.height) != (w, h) {
            return Err(Error::Data(format!(
                "image {n} is {}x{}, expected {w}x{h}",
                img.width, img.height
            )));
        }
        for (p, rgb) in img.pixels.chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[(n * 3 + c) * plane + p] = T::from_f64(normalize_value(rgb[c]));
            }
        }
    }
    Tensor::new(&[images.len(), 3, h, w], data)
}

/// Splits a `[N, 3, H, W]` batch back into 8-bit images.
pub fn batch_to_images<T: Real>(batch: &Tensor<T>) -> Result<Vec<RgbImage>> {
    let (n, c, h, w) = batch.dims4("batch_to_images")?;
    if c != 3 {
        return Err(Error::dim("batch_to_images", format!("axis C: expected 3 channels, got {c}")));
    }
    let plane = h * w;
    let data = batch.data();
    (0..n)
        .map(|i| {
            let mut pixels = Vec::with_capacity(plane * 3);
            for p in 0..plane {
                for ch in 0..3 {
                    pixels.push(denormalize_value(data[(i * 3 + ch) * plane + p].to_f64()));
                }
            }
            RgbImage::new(w, h, pixels)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    A,
    B,
}

/// One domain's images, all of identical size.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainDataset {
    pub domain: Domain,
    pub images: Vec<RgbImage>,
    /// Relative path or description of each image.
    pub manifest: Vec<String>,
}

impl DomainDataset {
    pub fn new(domain: Domain, images: Vec<RgbImage>, manifest: Vec<String>) -> Result<Self> {
        if images.len() != manifest.len() {
            return Err(Error::Data("manifest and image counts differ".into()));
        }
        if let Some(first) = images.first() {
            if let Some((i, _)) = images
                .iter()
                .enumerate()
                .find(|(_, im)| (im.width, im.height) != (first.width, first.height))
            {
                return Err(Error::Data(format!("image {} differs in size from image 0", manifest[i])));
            }
        }
        Ok(DomainDataset {
            domain,
            images,
            manifest,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn side(&self) -> Option<usize> {
        self.images.first().map(|i| i.width)
    }

    pub fn batch<T: Real>(&self, indices: &[usize]) -> Result<Tensor<T>> {
        let refs: Vec<&RgbImage> = indices.iter().map(|&i| &self.images[i]).collect();
        images_to_batch(&refs)
    }
}

/// Draws independent batches from two domains. Each domain walks its own
/// shuffled permutation, reshuffling once exhausted, so every image of a
/// domain appears exactly once per epoch.
#[derive(Clone, Debug)]
pub struct UnpairedSampler {
    order_a: Vec<usize>,
    order_b: Vec<usize>,
    pos_a: usize,
    pos_b: usize,
    rng_a: ChaCha8Rng,
    rng_b: ChaCha8Rng,
}

impl UnpairedSampler {
    pub fn new(len_a: usize, len_b: usize, seed: u64) -> Result<Self> {
        if len_a == 0 || len_b == 0 {
            return Err(Error::Data("cannot sample from an empty dataset".into()));
        }
        let mut rng_a = ChaCha8Rng::seed_from_u64(seed);
        let mut rng_b = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut order_a: Vec<usize> = (0..len_a).collect();
        let mut order_b: Vec<usize> = (0..len_b).collect();
        order_a.shuffle(&mut rng_a);
        order_b.shuffle(&mut rng_b);
        Ok(UnpairedSampler {
            order_a,
            order_b,
            pos_a: 0,
            pos_b: 0,
            rng_a,
            rng_b,
        })
    }

    fn draw(order: &mut [usize], pos: &mut usize, rng: &mut ChaCha8Rng, count: usize) -> Vec<usize> {
        (0..count)
            .map(|_| {
                if *pos == order.len() {
                    order.shuffle(rng);
                    *pos = 0;
                }
                *pos += 1;
                order[*pos - 1]
            })
            .collect()
    }

    /// Index lists for the next batch of each domain.
    pub fn next_indices(&mut self, batch: usize) -> (Vec<usize>, Vec<usize>) {
        let a = Self::draw(&mut self.order_a, &mut self.pos_a, &mut self.rng_a, batch);
        let b = Self::draw(&mut self.order_b, &mut self.pos_b, &mut self.rng_b, batch);
        (a, b)
    }
}

/// Draws one unpaired batch from each dataset.
pub fn sample_unpaired_batch<T: Real>(
    ds_a: &DomainDataset,
    ds_b: &DomainDataset,
    batch: usize,
    sampler: &mut UnpairedSampler,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let (ia, ib) = sampler.next_indices(batch);
    Ok((ds_a.batch(&ia)?, ds_b.batch(&ib)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthTask {
    /// B is the color complement of A.
    Invert,
    /// A has horizontal bars, B vertical bars.
    Stripes,
    /// The same shapes on white (A) and on procedural noise (B).
    Segmentation,
}

impl SynthTask {
    pub fn name(self) -> &'static str {
        match self {
            SynthTask::Invert => "invert",
            SynthTask::Stripes => "stripes",
            SynthTask::Segmentation => "segmentation",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "invert" => Ok(SynthTask::Invert),
            "stripes" | "stripes-orientation" => Ok(SynthTask::Stripes),
            "segmentation" | "shape-on-white" => Ok(SynthTask::Segmentation),
            other => Err(Error::Config(format!(
                "unknown synthetic task `{other}` (expected invert, stripes, segmentation)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub task: SynthTask,
    pub image_side: usize,
    pub count: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// One-line self-description recorded in manifests.
    pub fn describe(&self) -> String {
        format!(
            "task={} side={} count={} seed={}",
            self.task.name(),
            self.image_side,
            self.count,
            self.seed
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthOutput {
    pub a: DomainDataset,
    pub b: DomainDataset,
    /// Foreground masks, shared by A and B, for the segmentation task.
    pub masks: Option<Vec<Mask>>,
}

/// Pure function of `spec`: identical specs give identical datasets.
pub fn synth_generate(spec: &SyntheticSpec) -> Result<SynthOutput> {
    let s = spec.image_side;
    if !(4..=MAX_SIDE).contains(&s) {
        return Err(Error::Config(format!("synthetic image side {s} outside 4..={MAX_SIDE}")));
    }
    if spec.count == 0 {
        return Err(Error::Config("synthetic count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut a = Vec::with_capacity(spec.count);
    let mut b = Vec::with_capacity(spec.count);
    let mut masks = Vec::new();
    for _ in 0..spec.count {
        match spec.task {
            SynthTask::Invert => {
                let img = blobs_image(s, &mut rng);
                let inv = RgbImage {
                    width: s,
                    height: s,
                    pixels: img.pixels.iter().map(|&v| 255 - v).collect(),
                };
                a.push(img);
                b.push(inv);
            }
            SynthTask::Stripes => {
                let (h, v) = stripes_pair(s, &mut rng);
                a.push(h);
                b.push(v);
            }
            SynthTask::Segmentation => {
                let (shape, mask) = random_shape(s, &mut rng);
                let mut on_white = RgbImage::filled(s, s, [255, 255, 255]);
                let mut on_noise = noise_background(s, &mut rng);
                for (p, &fg) in mask.bits.iter().enumerate() {
                    if fg {
                        let (x, y) = (p % s, p / s);
                        on_white.set_pixel(x, y, shape);
                        on_noise.set_pixel(x, y, shape);
                    }
                }
                a.push(on_white);
                b.push(on_noise);
                masks.push(mask);
            }
        }
    }
    let label = spec.describe();
    let manifest = |d: &str| -> Vec<String> {
        (0..spec.count)
            .map(|i| format!("{d}/{i:05}.ppm # {label}"))
            .collect()
    };
    Ok(SynthOutput {
        a: DomainDataset::new(Domain::A, a, manifest("trainA"))?,
        b: DomainDataset::new(Domain::B, b, manifest("trainB"))?,
        masks: (spec.task == SynthTask::Segmentation).then_some(masks),
    })
}

fn random_color(rng: &mut ChaCha8Rng) -> [u8; 3] {
    [rng.random(), rng.random(), rng.random()]
}

const BLOB_PALETTE: [[u8; 3]; 6] = [
    [230, 40, 40],
    [40, 210, 60],
    [50, 80, 235],
    [235, 220, 50],
    [220, 60, 220],
    [60, 220, 225],
];

/// Dark background with a few axis-aligned rectangles and discs drawn
/// from a fixed bright palette.
fn blobs_image(s: usize, rng: &mut ChaCha8Rng) -> RgbImage {
    let background = [rng.random_range(0..40), rng.random_range(0..40), rng.random_range(0..40)];
    let mut img = RgbImage::filled(s, s, background);
    let count = rng.random_range(1..=3);
    for _ in 0..count {
        let color = BLOB_PALETTE[rng.random_range(0..BLOB_PALETTE.len())];
        let (cx, cy) = (rng.random_range(0..s) as f64, rng.random_range(0..s) as f64);
        let r = rng.random_range(s as f64 * 0.15..s as f64 * 0.4);
        let disc = rng.random::<bool>();
        for y in 0..s {
            for x in 0..s {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                let inside = if disc {
                    dx * dx + dy * dy <= r * r
                } else {
                    dx.abs() <= r && dy.abs() <= r
                };
                if inside {
                    img.set_pixel(x, y, color);
                }
            }
        }
    }
    img
}

fn stripes_pair(s: usize, rng: &mut ChaCha8Rng) -> (RgbImage, RgbImage) {
    let period = rng.random_range(4..=(s / 2).max(4));
    let phase = rng.random_range(0..period);
    let (c1, c2) = (random_color(rng), random_color(rng));
    let mut horizontal = RgbImage::filled(s, s, c1);
    let mut vertical = RgbImage::filled(s, s, c1);
    for y in 0..s {
        for x in 0..s {
            if ((y + phase) % period) < period / 2 {
                horizontal.set_pixel(x, y, c2);
            }
            if ((x + phase) % period) < period / 2 {
                vertical.set_pixel(x, y, c2);
            }
        }
    }
    (horizontal, vertical)
}

/// A saturated, non-whitish color and a random disc, ellipse or rectangle
/// covering between 5% and 60% of the image.
const SHAPE_PALETTE: [[u8; 3]; 6] = [
    [190, 30, 30],
    [30, 140, 40],
    [40, 60, 200],
    [150, 40, 160],
    [20, 110, 150],
    [170, 90, 20],
];

/// A disc, ellipse or rectangle in a dark palette color. Centers are
/// uniform over the image, so shapes may be clipped at the border; masks
/// covering less than 5% or more than 60% of the image are redrawn.
fn random_shape(s: usize, rng: &mut ChaCha8Rng) -> ([u8; 3], Mask) {
    let color = SHAPE_PALETTE[rng.random_range(0..SHAPE_PALETTE.len())];
    let sf = s as f64;
    loop {
        let kind = rng.random_range(0..3);
        let (rx, ry) = match kind {
            0 => {
                let r = rng.random_range(0.2 * sf..0.38 * sf);
                (r, r)
            }
            _ => (
                rng.random_range(0.18 * sf..0.4 * sf),
                rng.random_range(0.18 * sf..0.4 * sf),
            ),
        };
        let cx = rng.random_range(0.0..sf);
        let cy = rng.random_range(0.0..sf);
        let bits: Vec<bool> = (0..s * s)
            .map(|p| {
                let (dx, dy) = ((p % s) as f64 + 0.5 - cx, (p / s) as f64 + 0.5 - cy);
                match kind {
                    2 => dx.abs() <= rx && dy.abs() <= ry,
                    _ => (dx / rx) * (dx / rx) + (dy / ry) * (dy / ry) <= 1.0,
                }
            })
            .collect();
        let mask = Mask {
            width: s,
            height: s,
            bits,
        };
        let f = mask.fraction();
        if f > 0.05 && f < 0.6 {
            return (color, mask);
        }
    }
}

/// Near-gray bilinear value noise on a coarse lattice with per-pixel
/// luminance jitter, lighter than every shape color but never white.
fn noise_background(s: usize, rng: &mut ChaCha8Rng) -> RgbImage {
    let cells = 4usize;
    let lattice: Vec<[f64; 3]> = (0..(cells + 1) * (cells + 1))
        .map(|_| {
            let gray = rng.random_range(120.0..215.0);
            [
                gray + rng.random_range(-8.0..8.0),
                gray + rng.random_range(-8.0..8.0),
                gray + rng.random_range(-8.0..8.0),
            ]
        })
        .collect();
    let mut img = RgbImage::filled(s, s, [0, 0, 0]);
    for y in 0..s {
        for x in 0..s {
            let fx = x as f64 / s as f64 * cells as f64;
            let fy = y as f64 / s as f64 * cells as f64;
            let (ix, iy) = (libm::floor(fx) as usize, libm::floor(fy) as usize);
            let (tx, ty) = (fx - ix as f64, fy - iy as f64);
            let at = |i: usize, j: usize| lattice[j * (cells + 1) + i];
            let jitter = rng.random_range(-15.0..15.0);
            let rgb: [u8; 3] = core::array::from_fn(|c| {
                let top = at(ix, iy)[c] * (1.0 - tx) + at(ix + 1, iy)[c] * tx;
                let bottom = at(ix, iy + 1)[c] * (1.0 - tx) + at(ix + 1, iy + 1)[c] * tx;
                let v = top * (1.0 - ty) + bottom * ty + jitter;
                libm::round(v).clamp(0.0, 235.0) as u8
            });
            img.set_pixel(x, y, rgb);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_endpoints() {
        assert_eq!(normalize_value(0), -1.0);
        assert_eq!(normalize_value(255), 1.0);
        assert_eq!(denormalize_value(0.0), 128);
        assert_eq!(denormalize_value(-3.0), 0);
        assert_eq!(denormalize_value(3.0), 255);
    }

    #[test]
    fn normalize_round_trip_is_within_one_level() {
        for v in 0..=255u8 {
            let back = denormalize_value(normalize_value(v));
            assert!((back as i32 - v as i32).abs() <= 1, "{v} -> {back}");
            let back32 = denormalize_value(normalize_value(v) as f32 as f64);
            assert!((back32 as i32 - v as i32).abs() <= 1, "{v} -> {back32} via f32");
        }
    }

    #[test]
    fn crop_and_area_resize() {
        let mut img = RgbImage::filled(6, 4, [0, 0, 0]);
        for y in 0..4 {
            img.set_pixel(0, y, [255, 255, 255]);
        }
        let sq = img.center_crop_square();
        assert_eq!((sq.width(), sq.height()), (4, 4));
        // the white column at x=0 is cropped away
        assert!(sq.pixels().iter().all(|&v| v == 0));

        let mut checker = RgbImage::filled(4, 4, [0, 0, 0]);
        for y in 0..4 {
            for x in 0..4 {
                if (x + y) % 2 == 0 {
                    checker.set_pixel(x, y, [200, 100, 50]);
                }
            }
        }
        let small = checker.resize_area(2, 2);
        assert_eq!(small.pixel(0, 0), [100, 50, 25]);
        let same = checker.resize_area(4, 4);
        assert_eq!(same, checker);
    }

    #[test]
    fn rejects_oversized_images() {
        assert!(RgbImage::new(MAX_SIDE + 1, 1, vec![0; (MAX_SIDE + 1) * 3]).is_err());
        assert!(RgbImage::new(2, 2, vec![0; 11]).is_err());
    }

    #[test]
    fn singleton_datasets_sample_themselves() {
        for seed in 0..5 {
            let mut s = UnpairedSampler::new(1, 1, seed).unwrap();
            assert_eq!(s.next_indices(1), (vec![0], vec![0]));
        }
    }

    #[test]
    fn epoch_is_a_permutation() {
        let mut s = UnpairedSampler::new(7, 5, 11).unwrap();
        let mut seen_a = Vec::new();
        for _ in 0..7 {
            seen_a.extend(s.next_indices(1).0);
        }
        seen_a.sort();
        assert_eq!(seen_a, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn invert_task_is_complementary() {
        let spec = SyntheticSpec {
            task: SynthTask::Invert,
            image_side: 8,
            count: 4,
            seed: 7,
        };
        let out = synth_generate(&spec).unwrap();
        for (a, b) in out.a.images.iter().zip(&out.b.images) {
            for (&x, &y) in a.pixels().iter().zip(b.pixels()) {
                assert_eq!(x as u16 + y as u16, 255);
            }
        }
        assert!(out.masks.is_none());
    }

    #[test]
    fn stripes_are_orthogonal() {
        let spec = SyntheticSpec {
            task: SynthTask::Stripes,
            image_side: 16,
            count: 3,
            seed: 2,
        };
        let out = synth_generate(&spec).unwrap();
        for (h, v) in out.a.images.iter().zip(&out.b.images) {
            for y in 0..16 {
                assert!((0..16).all(|x| h.pixel(x, y) == h.pixel(0, y)));
            }
            for x in 0..16 {
                assert!((0..16).all(|y| v.pixel(x, y) == v.pixel(x, 0)));
            }
        }
    }

    #[test]
    fn segmentation_masks_cover_expected_fraction() {
        for side in [16, 32] {
            let spec = SyntheticSpec {
                task: SynthTask::Segmentation,
                image_side: side,
                count: 200,
                seed: 5,
            };
            let out = synth_generate(&spec).unwrap();
            let masks = out.masks.unwrap();
            assert_eq!(masks.len(), 200);
            for (i, m) in masks.iter().enumerate() {
                let f = m.fraction();
                assert!(f > 0.05 && f < 0.6, "mask {i} fraction {f}");
                for (p, &fg) in m.bits.iter().enumerate() {
                    let (x, y) = (p % side, p / side);
                    let white = out.a.images[i].pixel(x, y) == [255, 255, 255];
                    assert_eq!(white, !fg);
                    if fg {
                        assert_eq!(out.a.images[i].pixel(x, y), out.b.images[i].pixel(x, y));
                    }
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        for task in [SynthTask::Invert, SynthTask::Stripes, SynthTask::Segmentation] {
            let spec = SyntheticSpec {
                task,
                image_side: 16,
                count: 5,
                seed: 42,
            };
            assert_eq!(synth_generate(&spec).unwrap(), synth_generate(&spec).unwrap());
        }
    }

    #[test]
    fn batch_conversion_round_trips() {
        let spec = SyntheticSpec {
            task: SynthTask::Invert,
            image_side: 8,
            count: 3,
            seed: 1,
        };
        let out = synth_generate(&spec).unwrap();
        let batch: Tensor<f32> = out.a.batch(&[0, 1, 2]).unwrap();
        assert_eq!(batch.shape(), &[3, 3, 8, 8]);
        assert!(batch.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(batch_to_images(&batch).unwrap(), out.a.images);
    }
}
