//! Image files and dataset directories.
//!
//! A dataset root holds `trainA/` and `trainB/` images (`.ppm`, or `.png`
//! on ingest), optional `masksB/<stem>.pgm` foreground masks and an optional
//! `manifest.txt` listing image paths relative to the root, one per line.
//! Without a manifest every image in the two folders is used in file-name
//! order.

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use crossnet_core::data::{Domain, DomainDataset, Mask, RgbImage, SynthOutput};

use crate::error::{AppError, Result};
use crate::ppm::{decode_mask, decode_ppm, encode_mask, encode_ppm};

pub const THREADS_ENV: &str = "XNET_THREADS";

/// Worker threads for file decoding: `XNET_THREADS` if set, otherwise the
/// available parallelism.
pub fn worker_threads() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(AppError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

fn is_image(path: &Path) -> bool {
    matches!(extension(path).as_str(), "ppm" | "png")
}

pub fn decode_image(path: &Path, bytes: &[u8]) -> Result<RgbImage> {
    match extension(path).as_str() {
        "ppm" => decode_ppm(bytes),
        "png" => {
            let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
                .map_err(|e| AppError::Format(format!("{}: {e}", path.display())))?
                .into_rgb8();
            let (w, h) = img.dimensions();
            Ok(RgbImage::new(w as usize, h as usize, img.into_raw())?)
        }
        other => Err(AppError::Format(format!(
            "{}: unsupported image extension `{other}`",
            path.display()
        ))),
    }
}

pub fn load_image(path: &Path) -> Result<RgbImage> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode_image(path, &bytes)
}

/// Writes PNG for a `.png` path and binary PPM otherwise.
pub fn save_image(path: &Path, img: &RgbImage) -> Result<()> {
    let bytes = if extension(path) == "png" {
        let buf = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, img.pixels().to_vec())
            .expect("buffer matches dimensions");
        let mut out = std::io::Cursor::new(Vec::new());
        buf.write_to(&mut out, image::ImageFormat::Png)
            .map_err(|e| AppError::Format(format!("{}: {e}", path.display())))?;
        out.into_inner()
    } else {
        encode_ppm(img)
    };
    fs::write(path, bytes).map_err(|e| AppError::io(path, e))
}

pub fn load_mask(path: &Path) -> Result<Mask> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode_mask(&bytes)
}

/// Image files directly inside `dir`, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| AppError::io(dir, e))? {
        let path = entry.map_err(|e| AppError::io(dir, e))?.path();
        if path.is_file() && is_image(&path) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Decodes `paths` on up to `threads` workers, preserving order.
pub fn load_images(paths: &[PathBuf], threads: usize) -> Result<Vec<RgbImage>> {
    if paths.is_empty() {
        return Ok(Vec::new());
    }
    let chunk = paths.len().div_ceil(threads.max(1));
    thread::scope(|s| {
        let handles: Vec<_> = paths
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|p| load_image(p)).collect::<Result<Vec<_>>>()))
            .collect();
        let mut out = Vec::with_capacity(paths.len());
        for h in handles {
            out.extend(h.join().expect("decoder thread panicked")?);
        }
        Ok(out)
    })
}

/// Both domains of a dataset directory, preprocessed to one side length.
#[derive(Clone, Debug)]
pub struct LoadedData {
    pub a: DomainDataset,
    pub b: DomainDataset,
    /// Masks for the B images, when `masksB/` exists.
    pub masks_b: Option<Vec<Mask>>,
}

fn manifest_entries(root: &Path) -> Result<Option<Vec<String>>> {
    let path = root.join("manifest.txt");
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| AppError::io(&path, e))?;
    Ok(Some(
        text.lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect(),
    ))
}

fn domain_paths(root: &Path, folder: &str, manifest: &Option<Vec<String>>) -> Result<Vec<PathBuf>> {
    match manifest {
        Some(lines) => Ok(lines
            .iter()
            .filter(|l| Path::new(l).starts_with(folder))
            .map(|l| root.join(l))
            .collect()),
        None => list_images(&root.join(folder)),
    }
}

fn relative(root: &Path, path: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).display().to_string()
}

/// Loads `trainA`/`trainB` (and `masksB` if present), center-cropping and
/// resizing every image to `side`.
pub fn load_dataset(root: &Path, side: usize, threads: usize) -> Result<LoadedData> {
    let manifest = manifest_entries(root)?;
    let mut domains = Vec::new();
    for (folder, domain) in [("trainA", Domain::A), ("trainB", Domain::B)] {
        let paths = domain_paths(root, folder, &manifest)?;
        if paths.is_empty() {
            return Err(AppError::Format(format!("{}: no images in {folder}", root.display())));
        }
        let images = load_images(&paths, threads)?
            .iter()
            .map(|im| im.preprocess(side))
            .collect();
        let names = paths.iter().map(|p| relative(root, p)).collect();
        domains.push((DomainDataset::new(domain, images, names)?, paths));
    }
    let (b, b_paths) = domains.pop().expect("two domains");
    let (a, _) = domains.pop().expect("two domains");

    let mask_dir = root.join("masksB");
    let masks_b = if mask_dir.is_dir() {
        let masks = b_paths
            .iter()
            .map(|p| {
                let stem = p.file_stem().unwrap_or_default();
                let path = mask_dir.join(stem).with_extension("pgm");
                let m = load_mask(&path)?;
                if (m.width, m.height) != (side, side) {
                    return Err(AppError::Format(format!(
                        "{}: mask is {}x{}, images are {side}x{side}",
                        path.display(),
                        m.width,
                        m.height
                    )));
                }
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?;
        Some(masks)
    } else {
        None
    };
    Ok(LoadedData { a, b, masks_b })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| AppError::io(path, e))
}

/// Writes a generated dataset in the directory layout [`load_dataset`] reads.
pub fn write_synthetic(root: &Path, data: &SynthOutput) -> Result<()> {
    let mut manifest = String::new();
    for ds in [&data.a, &data.b] {
        for (img, line) in ds.images.iter().zip(&ds.manifest) {
            let rel = line.split('#').next().unwrap_or("").trim();
            let path = root.join(rel);
            if let Some(parent) = path.parent() {
                create_dir(parent)?;
            }
            save_image(&path, img)?;
            manifest.push_str(line);
            manifest.push('\n');
        }
    }
    if let Some(masks) = &data.masks {
        let dir = root.join("masksB");
        create_dir(&dir)?;
        for (mask, line) in masks.iter().zip(&data.b.manifest) {
            let rel = Path::new(line.split('#').next().unwrap_or("").trim());
            let path = dir.join(rel.file_stem().unwrap_or_default()).with_extension("pgm");
            fs::write(&path, encode_mask(mask)).map_err(|e| AppError::io(&path, e))?;
        }
    }
    let path = root.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| AppError::io(&path, e))
}
