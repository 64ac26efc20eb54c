//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every op appends one node holding its output value plus whatever the
//! backward pass needs. `backward` walks the nodes in exact reverse order,
//! writing parameter gradients into the [`ParamStore`] and keeping leaf
//! gradients on the tape for inspection.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernels::{self, ConvGeom, NormCache};
use crate::param::{ParamId, ParamStore};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Border handling for a convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PadSpec {
    /// Symmetric zero padding of the given width on every side.
    Zero(usize),
    /// Mirror the interior about the edge pixel (edge not repeated).
    Reflect(usize),
}

impl PadSpec {
    pub const NONE: PadSpec = PadSpec::Zero(0);

    pub fn amount(self) -> usize {
        match self {
            PadSpec::Zero(a) | PadSpec::Reflect(a) => a,
        }
    }

    pub fn total(self) -> usize {
        2 * self.amount()
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Constant,
    Leaf,
    Param(ParamId),
    Conv2d {
        input: Var,
        kernel: Var,
        geom: ConvGeom,
    },
    ConvTranspose2d {
        input: Var,
        kernel: Var,
        // geometry of the adjoint direct convolution
        geom: ConvGeom,
    },
    ChannelBias {
        input: Var,
        bias: Var,
    },
    InstanceNorm {
        input: Var,
        gain: Var,
        bias: Var,
        cache: NormCache<T>,
    },
    Relu(Var),
    LeakyRelu(Var, T),
    Tanh(Var),
    PadReflect(Var, usize),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Sum(Var),
    L1Mean(Var, Var),
    SqMean(Var, T),
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    frozen: BTreeSet<ParamId>,
    consumed: bool,
    leaf_grads: Vec<Option<Vec<T>>>,
    visit_order: Vec<usize>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            frozen: BTreeSet::new(),
            consumed: false,
            leaf_grads: Vec::new(),
            visit_order: Vec::new(),
        }
    }

    /// Parameters in `ids` enter this tape as constants: they are read but
    /// never receive gradient.
    pub fn freeze(&mut self, ids: impl IntoIterator<Item = ParamId>) {
        self.frozen.extend(ids);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn scalar_value(&self, v: Var) -> T {
        self.nodes[v.0].value.data()[0]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Gradient of a [`Tape::leaf`] after `backward`; `None` if the leaf
    /// was unreachable from the loss.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.leaf_grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Node indices in the order `backward` processed them.
    pub fn backward_visit_order(&self) -> &[usize] {
        &self.visit_order
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Constant, false)
    }

    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        let value = store.get(id).value.clone();
        if self.frozen.contains(&id) {
            self.push(value, Op::Constant, false)
        } else {
            self.push(value, Op::Param(id), true)
        }
    }

    /// Copy of `v` cut off from the gradient graph.
    pub fn detach(&mut self, v: Var) -> Var {
        let t = self.nodes[v.0].value.clone();
        self.constant(t)
    }

    pub fn conv2d(&mut self, input: Var, kernel: Var, stride: usize, pad: PadSpec) -> Result<Var> {
        let input = match pad {
            PadSpec::Reflect(a) if a > 0 => self.pad_reflect(input, a)?,
            _ => input,
        };
        let zero_pad = match pad {
            PadSpec::Zero(a) => a,
            PadSpec::Reflect(_) => 0,
        };
        let geom = conv_geom("conv2d", self.value(input), self.value(kernel), stride, zero_pad)?;
        let out = kernels::conv_forward(self.value(input).data(), self.value(kernel).data(), &geom);
        let ng = self.ng(input) || self.ng(kernel);
        Ok(self.push(
            Tensor::from_parts(vec![geom.n, geom.cout, geom.oh, geom.ow], out),
            Op::Conv2d {
                input,
                kernel,
                geom,
            },
            ng,
        ))
    }

    /// Transposed convolution with kernel layout `[Cin, Cout, kh, kw]`.
    pub fn conv2d_transpose(
        &mut self,
        input: Var,
        kernel: Var,
        stride: usize,
        pad: usize,
        output_padding: usize,
    ) -> Result<Var> {
        let op = "conv2d_transpose";
        if stride == 0 {
            return Err(Error::dim(op, "stride must be positive"));
        }
        if output_padding >= stride {
            return Err(Error::dim(
                op,
                format!("output_padding {output_padding} must be < stride {stride}"),
            ));
        }
        let (n, cin, h, w) = self.value(input).dims4(op)?;
        let (kcin, kcout, kh, kw) = self.value(kernel).dims4(op)?;
        if kcin != cin {
            return Err(Error::dim(
                op,
                format!("axis C: input has {cin} channels, kernel expects {kcin}"),
            ));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::dim(op, format!("axes kh,kw: kernel {kh}x{kw} must be odd")));
        }
        let out_h = ((h - 1) * stride + kh + output_padding)
            .checked_sub(2 * pad)
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::dim(op, format!("axis H: padding {pad} too large")))?;
        let out_w = ((w - 1) * stride + kw + output_padding)
            .checked_sub(2 * pad)
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::dim(op, format!("axis W: padding {pad} too large")))?;
        let geom = ConvGeom {
            n,
            cin: kcout,
            h: out_h,
            w: out_w,
            cout: cin,
            kh,
            kw,
            stride,
            pad,
            oh: h,
            ow: w,
        };
        let out = kernels::conv_input_grad(self.value(input).data(), self.value(kernel).data(), &geom);
        let ng = self.ng(input) || self.ng(kernel);
        Ok(self.push(
            Tensor::from_parts(vec![n, kcout, out_h, out_w], out),
            Op::ConvTranspose2d {
                input,
                kernel,
                geom,
            },
            ng,
        ))
    }

    /// Adds `bias[c]` to every element of channel `c`.
    pub fn channel_bias(&mut self, input: Var, bias: Var) -> Result<Var> {
        let (_, c, h, w) = self.value(input).dims4("channel_bias")?;
        if self.value(bias).len() != c {
            return Err(Error::dim(
                "channel_bias",
                format!("axis C: input has {c} channels, bias has {}", self.value(bias).len()),
            ));
        }
        let plane = h * w;
        let b = self.value(bias).data();
        let data: Vec<T> = self
            .value(input)
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v + b[(i / plane) % c])
            .collect();
        let shape = self.shape(input).to_vec();
        let ng = self.ng(input) || self.ng(bias);
        Ok(self.push(Tensor::from_parts(shape, data), Op::ChannelBias { input, bias }, ng))
    }

    pub fn instance_norm(&mut self, input: Var, gain: Var, bias: Var, eps: T) -> Result<Var> {
        let op = "instance_norm";
        let (n, c, h, w) = self.value(input).dims4(op)?;
        if h * w < 2 {
            return Err(Error::DegenerateStatistics(h * w));
        }
        for (what, v) in [("gain", gain), ("bias", bias)] {
            if self.value(v).len() != c {
                return Err(Error::dim(
                    op,
                    format!("axis C: input has {c} channels, {what} has {}", self.value(v).len()),
                ));
            }
        }
        let (y, cache) = kernels::instance_norm_forward(
            self.value(input).data(),
            n,
            c,
            h * w,
            self.value(gain).data(),
            self.value(bias).data(),
            eps,
        );
        let ng = self.ng(input) || self.ng(gain) || self.ng(bias);
        Ok(self.push(
            Tensor::from_parts(vec![n, c, h, w], y),
            Op::InstanceNorm {
                input,
                gain,
                bias,
                cache,
            },
            ng,
        ))
    }

    fn map(&mut self, input: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let t = self.value(input);
        let data = t.data().iter().map(|&v| f(v)).collect();
        let shape = t.shape().to_vec();
        let ng = self.ng(input);
        self.push(Tensor::from_parts(shape, data), op, ng)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map(x, Op::Relu(x), |v| if v > T::zero() { v } else { T::zero() })
    }

    pub fn leaky_relu(&mut self, x: Var, slope: T) -> Var {
        self.map(x, Op::LeakyRelu(x, slope), |v| if v > T::zero() { v } else { v * slope })
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map(x, Op::Tanh(x), |v| v.tanh())
    }

    pub fn scale(&mut self, x: Var, factor: T) -> Var {
        self.map(x, Op::Scale(x, factor), |v| v * factor)
    }

    pub fn add_scalar(&mut self, x: Var, offset: T) -> Var {
        self.map(x, Op::AddScalar(x), |v| v + offset)
    }

    pub fn pad_reflect(&mut self, x: Var, amount: usize) -> Result<Var> {
        let (n, c, h, w) = self.value(x).dims4("pad_reflect")?;
        if amount >= h || amount >= w {
            return Err(Error::dim(
                "pad_reflect",
                format!("axes H,W: reflection amount {amount} needs H,W > {amount}, got {h}x{w}"),
            ));
        }
        if amount == 0 {
            return Ok(x);
        }
        let data = kernels::pad_reflect_forward(self.value(x).data(), n * c, h, w, amount);
        let ng = self.ng(x);
        Ok(self.push(
            Tensor::from_parts(vec![n, c, h + 2 * amount, w + 2 * amount], data),
            Op::PadReflect(x, amount),
            ng,
        ))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(
                op,
                format!("shapes {:?} and {:?} differ", self.shape(a), self.shape(b)),
            ));
        }
        Ok(())
    }

    fn zip(&mut self, a: Var, b: Var, op: Op<T>, name: &'static str, f: impl Fn(T, T) -> T) -> Result<Var> {
        self.same_shape(name, a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Tensor::from_parts(shape, data), op, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, Op::Add(a, b), "add", |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, Op::Sub(a, b), "sub", |x, y| x - y)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().fold(T::zero(), |a, &v| a + v);
        let ng = self.ng(x);
        self.push(Tensor::scalar(s), Op::Sum(x), ng)
    }

    /// `mean(|a - b|)` as a scalar.
    pub fn l1_mean(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("l1_mean", a, b)?;
        let n = T::from_f64(self.value(a).len() as f64);
        let s = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .fold(T::zero(), |acc, (&x, &y)| acc + (x - y).abs());
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Tensor::scalar(s / n), Op::L1Mean(a, b), ng))
    }

    /// `mean((a - target)^2)` as a scalar.
    pub fn sq_mean(&mut self, a: Var, target: T) -> Var {
        let n = T::from_f64(self.value(a).len() as f64);
        let s = self
            .value(a)
            .data()
            .iter()
            .fold(T::zero(), |acc, &x| acc + (x - target) * (x - target));
        let ng = self.ng(a);
        self.push(Tensor::scalar(s / n), Op::SqMean(a, target), ng)
    }

    /// Propagates d`loss` to every grad-enabled node reachable from it.
    ///
    /// Parameter gradients are added to whatever the store already holds.
    /// A tape supports exactly one backward pass.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore<T>) -> Result<()> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        if !self.value(loss).is_scalar() {
            return Err(Error::NonScalarLoss(self.shape(loss).to_vec()));
        }
        self.consumed = true;
        self.visit_order.clear();
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        self.leaf_grads = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![T::one()]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            self.visit_order.push(i);
            self.backprop_node(i, g, &mut grads, store);
        }
        Ok(())
    }

    fn backprop_node(
        &mut self,
        i: usize,
        g: Vec<T>,
        grads: &mut [Option<Vec<T>>],
        store: &mut ParamStore<T>,
    ) {
        let nodes = &self.nodes;
        let needs = |v: Var| nodes[v.0].needs_grad;
        let val = |v: Var| nodes[v.0].value.data();
        let mut acc = |v: Var, contribution: Vec<T>| {
            if !needs(v) {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => {
                    for (a, b) in existing.iter_mut().zip(contribution) {
                        *a += b;
                    }
                }
                slot => *slot = Some(contribution),
            }
        };

        match &nodes[i].op {
            Op::Constant => {}
            Op::Leaf => self.leaf_grads[i] = Some(g),
            Op::Param(id) => store.get_mut(*id).accumulate_grad(&g),
            Op::Conv2d {
                input,
                kernel,
                geom,
            } => {
                if needs(*input) {
                    acc(*input, kernels::conv_input_grad(&g, val(*kernel), geom));
                }
                if needs(*kernel) {
                    acc(*kernel, kernels::conv_kernel_grad(val(*input), &g, geom));
                }
            }
            Op::ConvTranspose2d {
                input,
                kernel,
                geom,
            } => {
                if needs(*input) {
                    acc(*input, kernels::conv_forward(&g, val(*kernel), geom));
                }
                if needs(*kernel) {
                    acc(*kernel, kernels::conv_kernel_grad(&g, val(*input), geom));
                }
            }
            Op::ChannelBias { input, bias } => {
                if needs(*bias) {
                    let shape = nodes[i].value.shape();
                    let (c, plane) = (shape[1], shape[2] * shape[3]);
                    let mut gb = vec![T::zero(); c];
                    for (k, &v) in g.iter().enumerate() {
                        gb[(k / plane) % c] += v;
                    }
                    acc(*bias, gb);
                }
                acc(*input, g);
            }
            Op::InstanceNorm {
                input,
                gain,
                bias,
                cache,
            } => {
                let shape = nodes[i].value.shape();
                let (gx, gg, gb) = kernels::instance_norm_backward(
                    &g,
                    cache,
                    shape[0],
                    shape[1],
                    shape[2] * shape[3],
                    val(*gain),
                );
                acc(*input, gx);
                acc(*gain, gg);
                acc(*bias, gb);
            }
            Op::Relu(x) => {
                let gx = g
                    .iter()
                    .zip(val(*x))
                    .map(|(&go, &v)| if v > T::zero() { go } else { T::zero() })
                    .collect();
                acc(*x, gx);
            }
            Op::LeakyRelu(x, slope) => {
                let gx = g
                    .iter()
                    .zip(val(*x))
                    .map(|(&go, &v)| if v > T::zero() { go } else { go * *slope })
                    .collect();
                acc(*x, gx);
            }
            Op::Tanh(x) => {
                let gx = g
                    .iter()
                    .zip(nodes[i].value.data())
                    .map(|(&go, &y)| go * (T::one() - y * y))
                    .collect();
                acc(*x, gx);
            }
            Op::PadReflect(x, amount) => {
                let s = nodes[x.0].value.shape();
                acc(
                    *x,
                    kernels::pad_reflect_backward(&g, s[0] * s[1], s[2], s[3], *amount),
                );
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g);
            }
            Op::Sub(a, b) => {
                acc(*b, g.iter().map(|&v| -v).collect());
                acc(*a, g);
            }
            Op::Scale(x, f) => acc(*x, g.iter().map(|&v| v * *f).collect()),
            Op::AddScalar(x) => acc(*x, g),
            Op::Sum(x) => {
                let n = nodes[x.0].value.len();
                acc(*x, vec![g[0]; n]);
            }
            Op::L1Mean(a, b) => {
                let n = T::from_f64(nodes[a.0].value.len() as f64);
                let scale = g[0] / n;
                let ga: Vec<T> = val(*a)
                    .iter()
                    .zip(val(*b))
                    .map(|(&x, &y)| {
                        let d = x - y;
                        if d > T::zero() {
                            scale
                        } else if d < T::zero() {
                            -scale
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                if needs(*b) {
                    acc(*b, ga.iter().map(|&v| -v).collect());
                }
                acc(*a, ga);
            }
            Op::SqMean(a, target) => {
                let n = T::from_f64(nodes[a.0].value.len() as f64);
                let scale = g[0] * T::from_f64(2.0) / n;
                let ga = val(*a).iter().map(|&x| scale * (x - *target)).collect();
                acc(*a, ga);
            }
        }
    }
}

fn conv_geom<T: Real>(
    op: &'static str,
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<ConvGeom> {
    if stride == 0 {
        return Err(Error::dim(op, "stride must be positive"));
    }
    let (n, cin, h, w) = input.dims4(op)?;
    let (cout, kcin, kh, kw) = kernel.dims4(op)?;
    if kcin != cin {
        return Err(Error::dim(
            op,
            format!("axis C: input has {cin} channels, kernel expects {kcin}"),
        ));
    }
    if kh % 2 == 0 || kw % 2 == 0 {
        // even kernels are allowed for the discriminator's 4x4 convolutions
        if kh != kw {
            return Err(Error::dim(op, format!("axes kh,kw: non-square even kernel {kh}x{kw}")));
        }
    }
    if h + 2 * pad < kh {
        return Err(Error::dim(
            op,
            format!("axis H: padded height {} smaller than kernel {kh}", h + 2 * pad),
        ));
    }
    if w + 2 * pad < kw {
        return Err(Error::dim(
            op,
            format!("axis W: padded width {} smaller than kernel {kw}", w + 2 * pad),
        ));
    }
    Ok(ConvGeom {
        n,
        cin,
        h,
        w,
        cout,
        kh,
        kw,
        stride,
        pad,
        oh: (h + 2 * pad - kh) / stride + 1,
        ow: (w + 2 * pad - kw) / stride + 1,
    })
}

/// Output side of a direct convolution.
pub fn conv_output_side(side: usize, kernel: usize, stride: usize, pad_total: usize) -> Option<usize> {
    (side + pad_total).checked_sub(kernel).map(|v| v / stride + 1)
}

/// Output side of a transposed convolution.
pub fn conv_transpose_output_side(
    side: usize,
    kernel: usize,
    stride: usize,
    pad_total: usize,
    output_padding: usize,
) -> Option<usize> {
    ((side - 1) * stride + kernel + output_padding).checked_sub(pad_total)
}
