//! Binary Netpbm images: P6 for RGB, P5 for masks and grayscale maps.

use crossnet_core::data::{Mask, RgbImage, MAX_SIDE};
use crossnet_core::eval::GrayImage;

use crate::error::{AppError, Result};

struct Header {
    width: usize,
    height: usize,
    maxval: usize,
    data_start: usize,
}

fn malformed(detail: impl Into<String>) -> AppError {
    AppError::Format(format!("malformed netpbm header: {}", detail.into()))
}

fn skip_space_and_comments(bytes: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

fn read_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    *pos = skip_space_and_comments(bytes, *pos);
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
        if *pos - start > 9 {
            return Err(malformed(format!("{what} is too large")));
        }
    }
    if start == *pos {
        return Err(malformed(format!("expected {what}")));
    }
    let text = std::str::from_utf8(&bytes[start..*pos]).expect("ascii digits");
    Ok(text.parse().expect("at most nine digits"))
}

fn parse_header(bytes: &[u8], magic: &[u8; 2]) -> Result<Header> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(malformed(format!("expected magic {}", String::from_utf8_lossy(magic))));
    }
    let mut pos = 2;
    let width = read_number(bytes, &mut pos, "width")?;
    let height = read_number(bytes, &mut pos, "height")?;
    let maxval = read_number(bytes, &mut pos, "maxval")?;
    if width == 0 || height == 0 || width > MAX_SIDE || height > MAX_SIDE {
        return Err(malformed(format!("dimensions {width}x{height} outside 1..={MAX_SIDE}")));
    }
    if !(1..=255).contains(&maxval) {
        return Err(malformed(format!("maxval {maxval} outside 1..=255")));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => {}
        _ => return Err(malformed("missing whitespace after maxval")),
    }
    Ok(Header {
        width,
        height,
        maxval,
        data_start: pos + 1,
    })
}

fn payload<'a>(bytes: &'a [u8], h: &Header, channels: usize) -> Result<&'a [u8]> {
    let need = h.width * h.height * channels;
    let have = bytes.len() - h.data_start;
    if have < need {
        return Err(AppError::Format(format!(
            "truncated netpbm payload: {}x{} needs {need} bytes, found {have}",
            h.width, h.height
        )));
    }
    Ok(&bytes[h.data_start..h.data_start + need])
}

fn rescale(v: u8, maxval: usize) -> u8 {
    if maxval == 255 {
        v
    } else {
        ((v as usize).min(maxval) * 255 * 2 + maxval).div_euclid(2 * maxval) as u8
    }
}

/// Decodes a binary P6 file. Samples are rescaled to 0..=255 when the
/// file's maxval is smaller.
pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let h = parse_header(bytes, b"P6")?;
    let data = payload(bytes, &h, 3)?;
    let pixels = data.iter().map(|&v| rescale(v, h.maxval)).collect();
    Ok(RgbImage::new(h.width, h.height, pixels)?)
}

/// Canonical P6: `P6\n<w> <h>\n255\n` followed by the raw samples.
pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let h = parse_header(bytes, b"P5")?;
    let data = payload(bytes, &h, 1)?;
    Ok(GrayImage {
        width: h.width,
        height: h.height,
        pixels: data.iter().map(|&v| rescale(v, h.maxval)).collect(),
    })
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// Pixels at or above half intensity are foreground.
pub fn decode_mask(bytes: &[u8]) -> Result<Mask> {
    let g = decode_pgm(bytes)?;
    Ok(Mask {
        width: g.width,
        height: g.height,
        bits: g.pixels.iter().map(|&v| v >= 128).collect(),
    })
}

pub fn encode_mask(mask: &Mask) -> Vec<u8> {
    encode_pgm(&GrayImage {
        width: mask.width,
        height: mask.height,
        pixels: mask.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
    })
}
