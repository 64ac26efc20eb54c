//! `XNET` checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "XNET" | u32 version | u64 count
//! count × ( u16 name_len | name (UTF-8) | u8 rank | rank × u32 dim | f32 values )
//! u32 CRC-32 of every byte between the magic and the checksum
//! ```
//!
//! Training metadata (epoch, resolved configuration) lives in a plain-text
//! sidecar `<checkpoint>.meta` so the binary file depends only on weights.

use std::fs;
use std::path::{Path, PathBuf};

use crossnet_core::nn::{ModelBundle, NetConfig, NetworkId};
use crossnet_core::{Real, Tensor};

use crate::error::{AppError, Result};

pub const MAGIC: &[u8; 4] = b"XNET";
pub const VERSION: u32 = 1;

/// Decoded checkpoint contents in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub entries: Vec<(String, Tensor<f32>)>,
}

pub fn encode_checkpoint<T: Real>(bundle: &ModelBundle<T>) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    out.extend_from_slice(&VERSION.to_le_bytes());
    let entries: Vec<_> = bundle.named_tensors().collect();
    out.extend_from_slice(&(entries.len() as u64).to_le_bytes());
    for (name, t) in entries {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.rank() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&(v.to_f64() as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out[MAGIC.len()..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(AppError::Format(format!("checkpoint truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < MAGIC.len() + 4 || &bytes[..4] != MAGIC {
        return Err(AppError::Format("not an XNET checkpoint (bad magic)".into()));
    }
    let (body, tail) = bytes[MAGIC.len()..].split_at(bytes.len() - MAGIC.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("four bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(AppError::Checksum { stored, computed });
    }
    let mut r = Reader { bytes: body, pos: 0 };
    let version = u32::from_le_bytes(r.array("version")?);
    if version != VERSION {
        return Err(AppError::Format(format!("unsupported checkpoint version {version}")));
    }
    let count = u64::from_le_bytes(r.array("entry count")?);
    let mut entries = Vec::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(r.array("name length")?) as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| AppError::Format("parameter name is not UTF-8".into()))?
            .to_string();
        let rank = r.take(1, "rank")?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u32::from_le_bytes(r.array("dimension")?) as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|n| n.checked_mul(4).is_some())
            .ok_or_else(|| AppError::Format(format!("tensor `{name}` is impossibly large")))?;
        let raw = r.take(n * 4, &name)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of four")))
            .collect();
        entries.push((name, Tensor::new(&shape, data)?));
    }
    if r.pos != body.len() {
        return Err(AppError::Format(format!(
            "{} unexpected bytes after the last tensor",
            body.len() - r.pos
        )));
    }
    Ok(Checkpoint { entries })
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&Tensor<f32>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    fn has_network(&self, id: NetworkId) -> bool {
        self.entries.iter().any(|(n, _)| NetworkId::from_param_name(n) == Some(id))
    }

    /// Recovers the architecture from tensor names and shapes. Discriminator
    /// settings fall back to defaults when the file carries no critics.
    pub fn infer_config(&self) -> Result<NetConfig> {
        let shape = |name: &str| -> Result<&[usize]> {
            self.get(name)
                .map(|t| t.shape())
                .ok_or_else(|| AppError::Format(format!("checkpoint lacks `{name}`")))
        };
        let stem = shape("e_ab.stem.weight")?;
        let latent = shape("e_ab.down2.weight")?;
        let n_res_blocks = (0..)
            .take_while(|i| self.get(&format!("e_ab.res{i}.conv1.weight")).is_some())
            .count();
        let defaults = NetConfig::default();
        let (disc_width, disc_layers) = match self.get("q_a.layer0.weight") {
            Some(t) => {
                let layers = (0..)
                    .take_while(|i| self.get(&format!("q_a.layer{i}.weight")).is_some())
                    .count();
                (t.shape()[0], layers - 1)
            }
            None => (defaults.disc_width, defaults.disc_layers),
        };
        Ok(NetConfig {
            in_channels: stem[1],
            base_width: stem[0],
            latent_channels: latent[0],
            n_res_blocks,
            disc_width,
            disc_layers: disc_layers.max(1),
        })
    }

    /// Rebuilds a bundle with exactly the networks present in the file.
    pub fn to_bundle<T: Real>(&self, config: &NetConfig) -> Result<ModelBundle<T>> {
        let full = NetworkId::ALL.into_iter().all(|id| self.has_network(id));
        let mut bundle = if full {
            ModelBundle::new(*config, 0)?
        } else {
            ModelBundle::generators_only(*config, 0)?
        };
        self.load_into(&mut bundle)?;
        Ok(bundle)
    }

    /// Overwrites `bundle`'s parameters; fails naming the first tensor
    /// that is missing or shaped differently.
    pub fn load_into<T: Real>(&self, bundle: &mut ModelBundle<T>) -> Result<()> {
        bundle.load_named(self.entries.iter().map(|(n, t)| (n.as_str(), t)))?;
        Ok(())
    }
}

pub fn meta_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Writes the checkpoint and its `.meta` sidecar.
pub fn save_checkpoint<T: Real>(path: &Path, bundle: &ModelBundle<T>, meta: &str) -> Result<()> {
    fs::write(path, encode_checkpoint(bundle)).map_err(|e| AppError::io(path, e))?;
    let meta_file = meta_path(path);
    fs::write(&meta_file, meta).map_err(|e| AppError::io(&meta_file, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// Loads a checkpoint and rebuilds its bundle from the inferred architecture.
pub fn load_bundle(path: &Path) -> Result<ModelBundle<f32>> {
    let ckpt = load_checkpoint(path)?;
    let config = ckpt.infer_config()?;
    ckpt.to_bundle(&config)
}
