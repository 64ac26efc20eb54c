//! The eight networks: two encoders, two decoders, two latent
//! cross-translators and two PatchGAN discriminators.

mod bundle;
mod layers;

use alloc::format;
use alloc::vec::Vec;

pub use bundle::{CrossModel, LatentPath, ModelBundle, NetworkId};
pub use layers::{Conv, ConvTranspose, Norm, ResBlock};

use crate::error::{Error, Result};
use crate::param::{ParamId, ParamStore};
use crate::scalar::Real;
use crate::tape::{conv_output_side, PadSpec, Tape, Var};
use layers::{block_name, Builder};

const LEAKY_SLOPE: f64 = 0.2;
const DISC_KERNEL: usize = 4;

/// Architecture hyperparameters shared by all eight networks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetConfig {
    pub in_channels: usize,
    /// Width of the first generator convolution; the second stage uses twice this.
    pub base_width: usize,
    /// Channel count `C_z` of the latent code.
    pub latent_channels: usize,
    /// Residual blocks in each encoder and each translator.
    pub n_res_blocks: usize,
    /// Width of the first discriminator convolution.
    pub disc_width: usize,
    /// Number of stride-2 discriminator convolutions. Three gives the
    /// 70x70 receptive field.
    pub disc_layers: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            in_channels: 3,
            base_width: 64,
            latent_channels: 256,
            n_res_blocks: 9,
            disc_width: 64,
            disc_layers: 3,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0
            || self.base_width == 0
            || self.latent_channels == 0
            || self.disc_width == 0
            || self.disc_layers == 0
        {
            return Err(Error::Config(format!("network widths and depths must be positive: {self:?}")));
        }
        Ok(())
    }

    /// Receptive field (in input pixels) of one discriminator output unit.
    pub fn disc_receptive_field(&self) -> usize {
        let strides = self.disc_strides();
        let mut field = 1;
        let mut jump = 1;
        for s in strides {
            field += (DISC_KERNEL - 1) * jump;
            jump *= s;
        }
        field
    }

    fn disc_strides(&self) -> Vec<usize> {
        let mut strides: Vec<usize> = (0..self.disc_layers).map(|_| 2).collect();
        // one stride-1 widening conv and the stride-1 scoring head
        strides.extend([1, 1]);
        strides
    }

    /// Side of the discriminator score map for a square input, or `None`
    /// when the input is too small to yield a single score.
    pub fn disc_output_side(&self, side: usize) -> Option<usize> {
        self.disc_strides()
            .into_iter()
            .try_fold(side, |s, stride| conv_output_side(s, DISC_KERNEL, stride, 2))
            .filter(|&s| s >= 1)
    }
}

fn check_side(op: &'static str, side_h: usize, side_w: usize) -> Result<()> {
    if !side_h.is_multiple_of(4) || !side_w.is_multiple_of(4) || side_h < 8 || side_w < 8 {
        return Err(Error::dim(
            op,
            format!("axes H,W: image side {side_h}x{side_w} must be a multiple of 4 and at least 8"),
        ));
    }
    Ok(())
}

/// 7x7 stem, two stride-2 downsampling convolutions, then residual blocks
/// at the latent width. Output side is one quarter of the input side.
#[derive(Clone, Debug)]
pub struct Encoder {
    stem: Conv,
    stem_norm: Norm,
    down1: Conv,
    down1_norm: Norm,
    down2: Conv,
    down2_norm: Norm,
    blocks: Vec<ResBlock>,
    params: Vec<ParamId>,
    in_channels: usize,
}

impl Encoder {
    pub(crate) fn build<T: Real>(cfg: &NetConfig, mut b: Builder<'_, T>) -> Result<Self> {
        let (w1, w2, cz) = (cfg.base_width, 2 * cfg.base_width, cfg.latent_channels);
        let stem = b.conv("stem", cfg.in_channels, w1, 7, 1, PadSpec::Reflect(3), false)?;
        let stem_norm = b.norm("stem_norm", w1)?;
        let down1 = b.conv("down1", w1, w2, 3, 2, PadSpec::Zero(1), false)?;
        let down1_norm = b.norm("down1_norm", w2)?;
        let down2 = b.conv("down2", w2, cz, 3, 2, PadSpec::Zero(1), false)?;
        let down2_norm = b.norm("down2_norm", cz)?;
        let blocks = (0..cfg.n_res_blocks)
            .map(|i| b.res_block(&block_name(i), cz))
            .collect::<Result<Vec<_>>>()?;
        Ok(Encoder {
            stem,
            stem_norm,
            down1,
            down1_norm,
            down2,
            down2_norm,
            blocks,
            params: b.ids,
            in_channels: cfg.in_channels,
        })
    }

    pub fn params(&self) -> &[ParamId] {
        &self.params
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let (_, c, h, w) = tape.value(x).dims4("encoder")?;
        if c != self.in_channels {
            return Err(Error::dim(
                "encoder",
                format!("axis C: expected {} channels, got {c}", self.in_channels),
            ));
        }
        check_side("encoder", h, w)?;
        let mut h = x;
        for (conv, norm) in [
            (&self.stem, &self.stem_norm),
            (&self.down1, &self.down1_norm),
            (&self.down2, &self.down2_norm),
        ] {
            h = conv.forward(tape, store, h)?;
            h = norm.forward(tape, store, h)?;
            h = tape.relu(h);
        }
        for block in &self.blocks {
            h = block.forward(tape, store, h)?;
        }
        Ok(h)
    }
}

/// Two stride-2 transposed convolutions followed by a 7x7 convolution and
/// tanh. Output side is four times the latent side.
#[derive(Clone, Debug)]
pub struct Decoder {
    up1: ConvTranspose,
    up1_norm: Norm,
    up2: ConvTranspose,
    up2_norm: Norm,
    head: Conv,
    params: Vec<ParamId>,
    latent_channels: usize,
}

impl Decoder {
    pub(crate) fn build<T: Real>(cfg: &NetConfig, mut b: Builder<'_, T>) -> Result<Self> {
        let (w1, w2, cz) = (cfg.base_width, 2 * cfg.base_width, cfg.latent_channels);
        let up1 = b.conv_transpose("up1", cz, w2, 3, 2, 1, 1)?;
        let up1_norm = b.norm("up1_norm", w2)?;
        let up2 = b.conv_transpose("up2", w2, w1, 3, 2, 1, 1)?;
        let up2_norm = b.norm("up2_norm", w1)?;
        let head = b.conv("head", w1, cfg.in_channels, 7, 1, PadSpec::Reflect(3), true)?;
        Ok(Decoder {
            up1,
            up1_norm,
            up2,
            up2_norm,
            head,
            params: b.ids,
            latent_channels: cz,
        })
    }

    pub fn params(&self) -> &[ParamId] {
        &self.params
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, z: Var) -> Result<Var> {
        let (_, c, _, _) = tape.value(z).dims4("decoder")?;
        if c != self.latent_channels {
            return Err(Error::dim(
                "decoder",
                format!("axis C: latent has {c} channels, decoder expects {}", self.latent_channels),
            ));
        }
        let mut h = z;
        for (up, norm) in [(&self.up1, &self.up1_norm), (&self.up2, &self.up2_norm)] {
            h = up.forward(tape, store, h)?;
            h = norm.forward(tape, store, h)?;
            h = tape.relu(h);
        }
        let h = self.head.forward(tape, store, h)?;
        Ok(tape.tanh(h))
    }
}

/// Residual blocks mapping one latent space onto the other, shape-preserving.
#[derive(Clone, Debug)]
pub struct Translator {
    blocks: Vec<ResBlock>,
    params: Vec<ParamId>,
    latent_channels: usize,
}

impl Translator {
    pub(crate) fn build<T: Real>(cfg: &NetConfig, mut b: Builder<'_, T>) -> Result<Self> {
        let blocks = (0..cfg.n_res_blocks)
            .map(|i| b.res_block(&block_name(i), cfg.latent_channels))
            .collect::<Result<Vec<_>>>()?;
        Ok(Translator {
            blocks,
            params: b.ids,
            latent_channels: cfg.latent_channels,
        })
    }

    pub fn params(&self) -> &[ParamId] {
        &self.params
    }

    pub fn blocks(&self) -> &[ResBlock] {
        &self.blocks
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, z: Var) -> Result<Var> {
        let (_, c, _, _) = tape.value(z).dims4("translator")?;
        if c != self.latent_channels {
            return Err(Error::dim(
                "translator",
                format!("axis C: latent has {c} channels, translator expects {}", self.latent_channels),
            ));
        }
        let mut h = z;
        for block in &self.blocks {
            h = block.forward(tape, store, h)?;
        }
        Ok(h)
    }
}

/// Fully convolutional PatchGAN scoring overlapping patches.
#[derive(Clone, Debug)]
pub struct Discriminator {
    layers: Vec<(Conv, Option<Norm>)>,
    head: Conv,
    params: Vec<ParamId>,
    cfg: NetConfig,
}

impl Discriminator {
    pub(crate) fn build<T: Real>(cfg: &NetConfig, mut b: Builder<'_, T>) -> Result<Self> {
        let mut layers = Vec::new();
        let mut cin = cfg.in_channels;
        let width = |i: usize| cfg.disc_width * (1usize << i.min(3));
        for i in 0..=cfg.disc_layers {
            let stride = if i < cfg.disc_layers { 2 } else { 1 };
            let cout = width(i);
            let name = format!("layer{i}");
            // the first layer has no norm, so it carries a bias
            let conv = b.conv(&name, cin, cout, DISC_KERNEL, stride, PadSpec::Zero(1), i == 0)?;
            let norm = if i == 0 {
                None
            } else {
                Some(b.norm(&format!("{name}_norm"), cout)?)
            };
            layers.push((conv, norm));
            cin = cout;
        }
        let head = b.conv("head", cin, 1, DISC_KERNEL, 1, PadSpec::Zero(1), true)?;
        Ok(Discriminator {
            layers,
            head,
            params: b.ids,
            cfg: *cfg,
        })
    }

    pub fn params(&self) -> &[ParamId] {
        &self.params
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let (_, c, h, w) = tape.value(x).dims4("discriminator")?;
        if c != self.cfg.in_channels {
            return Err(Error::dim(
                "discriminator",
                format!("axis C: expected {} channels, got {c}", self.cfg.in_channels),
            ));
        }
        if self.cfg.disc_output_side(h.min(w)).is_none() {
            return Err(Error::dim(
                "discriminator",
                format!(
                    "axes H,W: input {h}x{w} too small for a {}-layer PatchGAN (receptive field {})",
                    self.cfg.disc_layers,
                    self.cfg.disc_receptive_field()
                ),
            ));
        }
        let slope = T::from_f64(LEAKY_SLOPE);
        let mut h = x;
        for (conv, norm) in &self.layers {
            h = conv.forward(tape, store, h)?;
            if let Some(norm) = norm {
                h = norm.forward(tape, store, h)?;
            }
            h = tape.leaky_relu(h, slope);
        }
        self.head.forward(tape, store, h)
    }
}
