//! Raw loops behind the differentiable ops. Everything here works on flat
//! NCHW slices; shape validation happens in the tape layer.

use alloc::vec;
use alloc::vec::Vec;

use crate::scalar::Real;

/// Geometry of a direct convolution `[n, cin, h, w] * [cout, cin, kh, kw]
/// -> [n, cout, oh, ow]` with symmetric zero padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub n: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    pub fn input_len(&self) -> usize {
        self.n * self.cin * self.h * self.w
    }

    pub fn output_len(&self) -> usize {
        self.n * self.cout * self.oh * self.ow
    }

    pub fn kernel_len(&self) -> usize {
        self.cout * self.cin * self.kh * self.kw
    }
}

/// Output indices `o` in `[lo, hi)` for which `o*stride + k - pad` lands
/// inside `[0, len)`.
#[inline]
fn valid_range(k: usize, pad: usize, stride: usize, len: usize, out_len: usize) -> (usize, usize) {
    let lo = if k >= pad {
        0
    } else {
        (pad - k).div_ceil(stride)
    };
    if len + pad <= k {
        return (0, 0);
    }
    let hi = ((len - 1 + pad - k) / stride + 1).min(out_len);
    (lo.min(hi), hi)
}

/// Visits every (input index, output index, kernel index) triple of the
/// convolution in a cache-friendly order.
#[inline]
fn for_each_tap<F: FnMut(usize, usize, usize)>(g: &ConvGeom, mut f: F) {
    let in_plane = g.h * g.w;
    let out_plane = g.oh * g.ow;
    let k_plane = g.kh * g.kw;
    for n in 0..g.n {
        for co in 0..g.cout {
            let out_base = (n * g.cout + co) * out_plane;
            for ci in 0..g.cin {
                let in_base = (n * g.cin + ci) * in_plane;
                let k_base = (co * g.cin + ci) * k_plane;
                for ky in 0..g.kh {
                    let (oy_lo, oy_hi) = valid_range(ky, g.pad, g.stride, g.h, g.oh);
                    for kx in 0..g.kw {
                        let (ox_lo, ox_hi) = valid_range(kx, g.pad, g.stride, g.w, g.ow);
                        if ox_lo >= ox_hi {
                            continue;
                        }
                        let k_idx = k_base + ky * g.kw + kx;
                        for oy in oy_lo..oy_hi {
                            let iy = oy * g.stride + ky - g.pad;
                            let in_row = in_base + iy * g.w;
                            let out_row = out_base + oy * g.ow;
                            for ox in ox_lo..ox_hi {
                                let ix = ox * g.stride + kx - g.pad;
                                f(in_row + ix, out_row + ox, k_idx);
                            }
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv_forward<T: Real>(x: &[T], k: &[T], g: &ConvGeom) -> Vec<T> {
    let mut out = vec![T::zero(); g.output_len()];
    for_each_tap(g, |i, o, kk| out[o] += k[kk] * x[i]);
    out
}

/// Gradient of the convolution with respect to its input; also the
/// forward pass of the transposed convolution.
pub(crate) fn conv_input_grad<T: Real>(gout: &[T], k: &[T], g: &ConvGeom) -> Vec<T> {
    let mut gx = vec![T::zero(); g.input_len()];
    for_each_tap(g, |i, o, kk| gx[i] += k[kk] * gout[o]);
    gx
}

pub(crate) fn conv_kernel_grad<T: Real>(x: &[T], gout: &[T], g: &ConvGeom) -> Vec<T> {
    let mut gk = vec![T::zero(); g.kernel_len()];
    for_each_tap(g, |i, o, kk| gk[kk] += x[i] * gout[o]);
    gk
}

/// Maps an index of the padded axis back to the source axis, mirroring
/// about the edge pixel without repeating it.
#[inline]
pub(crate) fn reflect_index(i: usize, amount: usize, len: usize) -> usize {
    let j = i as isize - amount as isize;
    let last = len as isize - 1;
    let r = if j < 0 {
        -j
    } else if j > last {
        2 * last - j
    } else {
        j
    };
    r as usize
}

pub(crate) fn pad_reflect_forward<T: Real>(
    x: &[T],
    planes: usize,
    h: usize,
    w: usize,
    amount: usize,
) -> Vec<T> {
    let (ph, pw) = (h + 2 * amount, w + 2 * amount);
    let mut out = Vec::with_capacity(planes * ph * pw);
    for p in 0..planes {
        let base = p * h * w;
        for y in 0..ph {
            let sy = reflect_index(y, amount, h);
            for xx in 0..pw {
                let sx = reflect_index(xx, amount, w);
                out.push(x[base + sy * w + sx]);
            }
        }
    }
    out
}

pub(crate) fn pad_reflect_backward<T: Real>(
    gout: &[T],
    planes: usize,
    h: usize,
    w: usize,
    amount: usize,
) -> Vec<T> {
    let (ph, pw) = (h + 2 * amount, w + 2 * amount);
    let mut gx = vec![T::zero(); planes * h * w];
    for p in 0..planes {
        let base = p * h * w;
        let obase = p * ph * pw;
        for y in 0..ph {
            let sy = reflect_index(y, amount, h);
            for xx in 0..pw {
                let sx = reflect_index(xx, amount, w);
                gx[base + sy * w + sx] += gout[obase + y * pw + xx];
            }
        }
    }
    gx
}

/// Saved statistics of an instance-norm forward pass.
#[derive(Clone, Debug)]
pub(crate) struct NormCache<T> {
    pub normalized: Vec<T>,
    pub inv_std: Vec<T>,
}

pub(crate) fn instance_norm_forward<T: Real>(
    x: &[T],
    n: usize,
    c: usize,
    plane: usize,
    gain: &[T],
    bias: &[T],
    eps: T,
) -> (Vec<T>, NormCache<T>) {
    let mut y = vec![T::zero(); x.len()];
    let mut normalized = vec![T::zero(); x.len()];
    let mut inv_std = Vec::with_capacity(n * c);
    let count = T::from_f64(plane as f64);
    for s in 0..n * c {
        let ch = s % c;
        let slice = &x[s * plane..(s + 1) * plane];
        let mean = slice.iter().fold(T::zero(), |a, &v| a + v) / count;
        let var = slice
            .iter()
            .fold(T::zero(), |a, &v| a + (v - mean) * (v - mean))
            / count;
        let inv = T::one() / (var + eps).sqrt();
        inv_std.push(inv);
        for (i, &v) in slice.iter().enumerate() {
            let xh = (v - mean) * inv;
            normalized[s * plane + i] = xh;
            y[s * plane + i] = gain[ch] * xh + bias[ch];
        }
    }
    (y, NormCache { normalized, inv_std })
}

/// Returns `(d input, d gain, d bias)`.
pub(crate) fn instance_norm_backward<T: Real>(
    gout: &[T],
    cache: &NormCache<T>,
    n: usize,
    c: usize,
    plane: usize,
    gain: &[T],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut gx = vec![T::zero(); gout.len()];
    let mut gg = vec![T::zero(); c];
    let mut gb = vec![T::zero(); c];
    let count = T::from_f64(plane as f64);
    for s in 0..n * c {
        let ch = s % c;
        let range = s * plane..(s + 1) * plane;
        let go = &gout[range.clone()];
        let xh = &cache.normalized[range.clone()];
        let mut sum_g = T::zero();
        let mut sum_gx = T::zero();
        for (&g, &h) in go.iter().zip(xh) {
            gg[ch] += g * h;
            gb[ch] += g;
            sum_g += g * gain[ch];
            sum_gx += g * gain[ch] * h;
        }
        let scale = cache.inv_std[s] / count;
        for (i, (&g, &h)) in go.iter().zip(xh).enumerate() {
            let dxh = g * gain[ch];
            gx[range.start + i] = scale * (count * dxh - sum_g - h * sum_gx);
        }
    }
    (gx, gg, gb)
}
