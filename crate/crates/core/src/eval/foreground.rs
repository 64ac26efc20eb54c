use alloc::format;
use alloc::vec::Vec;

use crate::data::RgbImage;
use crate::error::{Error, Result};

/// Luma above which a translated pixel counts as background.
pub const WHITE_LUMA_THRESHOLD: u32 = 243;

/// Rec. 601 luma scaled by 1000: `299 R + 587 G + 114 B`, exact in integers.
pub fn luma_milli(rgb: [u8; 3]) -> u32 {
    299 * rgb[0] as u32 + 587 * rgb[1] as u32 + 114 * rgb[2] as u32
}

/// Strictly greater than the threshold: luma 243 itself is foreground.
pub fn luma_exceeds(rgb: [u8; 3], threshold: u32) -> bool {
    luma_milli(rgb) > threshold * 1000
}

/// Whitens every pixel whose translated counterpart is nearly white and
/// restores the original color everywhere else.
pub fn foreground_extract(original: &RgbImage, translated: &RgbImage) -> Result<RgbImage> {
    same_size(original, translated)?;
    let mut out = original.clone();
    for y in 0..original.height() {
        for x in 0..original.width() {
            if luma_exceeds(translated.pixel(x, y), WHITE_LUMA_THRESHOLD) {
                out.set_pixel(x, y, [255, 255, 255]);
            }
        }
    }
    Ok(out)
}

/// Per-pixel foreground score of a translated image: distance of its luma
/// from white, `255 - luma`. Thresholding this score at `255 - 243`
/// reproduces [`foreground_extract`]'s decision.
pub fn foreground_scores(translated: &RgbImage) -> Vec<f64> {
    translated
        .pixels()
        .chunks_exact(3)
        .map(|p| 255.0 - luma_milli([p[0], p[1], p[2]]) as f64 / 1000.0)
        .collect()
}

fn same_size(a: &RgbImage, b: &RgbImage) -> Result<()> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(Error::Data(format!(
            "original is {}x{} but translation is {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}
