use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::param::{ParamId, ParamStore};
use crate::scalar::Real;
use crate::tape::{PadSpec, Tape, Var};
use crate::tensor::Tensor;

pub(crate) const NORM_EPS: f64 = 1e-5;
pub(crate) const INIT_STD: f64 = 0.02;

/// Registers parameters under a common name prefix and remembers which
/// ids belong to the network being built.
pub(crate) struct Builder<'a, T> {
    pub store: &'a mut ParamStore<T>,
    pub rng: &'a mut ChaCha8Rng,
    pub prefix: &'static str,
    pub ids: Vec<ParamId>,
}

impl<'a, T: Real> Builder<'a, T> {
    pub fn new(store: &'a mut ParamStore<T>, rng: &'a mut ChaCha8Rng, prefix: &'static str) -> Self {
        Builder {
            store,
            rng,
            prefix,
            ids: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, value: Tensor<T>) -> Result<ParamId> {
        let id = self.store.add(format!("{}.{}", self.prefix, name), value)?;
        self.ids.push(id);
        Ok(id)
    }

    fn normal(&mut self, shape: &[usize]) -> Tensor<T> {
        let dist = Normal::new(0.0, INIT_STD).expect("valid std");
        let rng = &mut *self.rng;
        Tensor::from_fn(shape, |_| T::from_f64(dist.sample(rng)))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn conv(
        &mut self,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        pad: PadSpec,
        bias: bool,
    ) -> Result<Conv> {
        let w = self.normal(&[cout, cin, kernel, kernel]);
        let weight = self.add(&format!("{name}.weight"), w)?;
        let bias = if bias {
            Some(self.add(&format!("{name}.bias"), Tensor::zeros(&[cout]))?)
        } else {
            None
        };
        Ok(Conv {
            weight,
            bias,
            stride,
            pad,
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn conv_transpose(
        &mut self,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        output_padding: usize,
    ) -> Result<ConvTranspose> {
        let w = self.normal(&[cin, cout, kernel, kernel]);
        let weight = self.add(&format!("{name}.weight"), w)?;
        Ok(ConvTranspose {
            weight,
            stride,
            pad,
            output_padding,
        })
    }

    pub fn norm(&mut self, name: &str, channels: usize) -> Result<Norm> {
        let gain = self.add(&format!("{name}.gain"), Tensor::full(&[channels], T::one()))?;
        let bias = self.add(&format!("{name}.bias"), Tensor::zeros(&[channels]))?;
        Ok(Norm { gain, bias })
    }

    pub fn res_block(&mut self, name: &str, channels: usize) -> Result<ResBlock> {
        Ok(ResBlock {
            conv1: self.conv(&format!("{name}.conv1"), channels, channels, 3, 1, PadSpec::Reflect(1), false)?,
            norm1: self.norm(&format!("{name}.norm1"), channels)?,
            conv2: self.conv(&format!("{name}.conv2"), channels, channels, 3, 1, PadSpec::Reflect(1), false)?,
            norm2: self.norm(&format!("{name}.norm2"), channels)?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Conv {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub stride: usize,
    pub pad: PadSpec,
}

impl Conv {
    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let y = tape.conv2d(x, w, self.stride, self.pad)?;
        match self.bias {
            Some(b) => {
                let b = tape.param(store, b);
                tape.channel_bias(y, b)
            }
            None => Ok(y),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConvTranspose {
    pub weight: ParamId,
    pub stride: usize,
    pub pad: usize,
    pub output_padding: usize,
}

impl ConvTranspose {
    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        tape.conv2d_transpose(x, w, self.stride, self.pad, self.output_padding)
    }
}

#[derive(Clone, Debug)]
pub struct Norm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl Norm {
    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let g = tape.param(store, self.gain);
        let b = tape.param(store, self.bias);
        tape.instance_norm(x, g, b, T::from_f64(NORM_EPS))
    }
}

/// `x + norm(conv(relu(norm(conv(x)))))`.
#[derive(Clone, Debug)]
pub struct ResBlock {
    pub conv1: Conv,
    pub norm1: Norm,
    pub conv2: Conv,
    pub norm2: Norm,
}

impl ResBlock {
    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let h = self.conv1.forward(tape, store, x)?;
        let h = self.norm1.forward(tape, store, h)?;
        let h = tape.relu(h);
        let h = self.conv2.forward(tape, store, h)?;
        let h = self.norm2.forward(tape, store, h)?;
        tape.add(x, h)
    }

    /// Ids of the residual branch (everything except the skip).
    pub fn branch_params(&self) -> [ParamId; 6] {
        [
            self.conv1.weight,
            self.norm1.gain,
            self.norm1.bias,
            self.conv2.weight,
            self.norm2.gain,
            self.norm2.bias,
        ]
    }
}

pub(crate) fn block_name(i: usize) -> String {
    format!("res{i}")
}
