//! Dilated 2-D convolution with "same" zero padding and stride 1, via im2col.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{join, ParamKind, Parameters};
use crate::tensor::{gemm, gemm_abt_accumulate, Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    /// (height, width) dilation.
    pub dilation: (usize, usize),
}

impl ConvSpec {
    pub fn pointwise(in_channels: usize, out_channels: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel: (1, 1),
            dilation: (1, 1),
        }
    }

    pub fn spatial(in_channels: usize, out_channels: usize, dilation: (usize, usize)) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel: (3, 3),
            dilation,
        }
    }

    fn padding(&self) -> (usize, usize) {
        (
            self.dilation.0 * (self.kernel.0 - 1) / 2,
            self.dilation.1 * (self.kernel.1 - 1) / 2,
        )
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel.0 * self.kernel.1
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == (1, 1)
    }

    fn validate(&self) -> Result<()> {
        if self.kernel.0 % 2 == 0 || self.kernel.1 % 2 == 0 {
            return Err(Error::Config(format!(
                "\"same\" padding needs odd kernels, got {:?}",
                self.kernel
            )));
        }
        if self.dilation.0 == 0 || self.dilation.1 == 0 {
            return Err(Error::Config("dilation must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Conv2d<T: Real> {
    pub spec: ConvSpec,
    /// (out_channels, in_channels, k_h, k_w)
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Conv2d<T> {
    /// He-normal weights, zero bias.
    pub fn new(spec: ConvSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let std = (2.0 / spec.patch_len() as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        let mut conv = Self::zeros(spec)?;
        for w in conv.weight.data_mut() {
            *w = T::of(normal.sample(rng));
        }
        Ok(conv)
    }

    pub fn zeros(spec: ConvSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Conv2d {
            spec,
            weight: Tensor::zeros(&[
                spec.out_channels,
                spec.in_channels,
                spec.kernel.0,
                spec.kernel.1,
            ]),
            bias: Tensor::zeros(&[spec.out_channels]),
        })
    }

    fn input_dims(&self, x: &Tensor<T>) -> Result<(usize, usize, usize)> {
        match *x.shape() {
            [n, c, h, w] if c == self.spec.in_channels => Ok((n, h, w)),
            _ => Err(Error::Dimension(format!(
                "conv2d expects [N, {}, H, W], got {:?}",
                self.spec.in_channels,
                x.shape()
            ))),
        }
    }

    /// Unfolds one image `[C, H, W]` into `[C·kh·kw, H·W]`.
    fn im2col(&self, img: &[T], h: usize, w: usize, cols: &mut [T]) {
        let (kh, kw) = self.spec.kernel;
        let (dh, dw) = self.spec.dilation;
        let (ph, pw) = self.spec.padding();
        let hw = h * w;
        for c in 0..self.spec.in_channels {
            let plane = &img[c * hw..(c + 1) * hw];
            for ki in 0..kh {
                for kj in 0..kw {
                    let row = (c * kh + ki) * kw + kj;
                    let dst = &mut cols[row * hw..(row + 1) * hw];
                    let dy = (ki * dh) as isize - ph as isize;
                    let dx = (kj * dw) as isize - pw as isize;
                    // valid output columns: 0 <= x + dx < w
                    let x0 = (-dx).max(0) as usize;
                    let x1 = ((w as isize - dx).min(w as isize)).max(0) as usize;
                    for y in 0..h {
                        let sy = y as isize + dy;
                        let out = &mut dst[y * w..(y + 1) * w];
                        if sy < 0 || sy >= h as isize || x0 >= x1 {
                            out.fill(T::zero());
                            continue;
                        }
                        let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                        out[..x0].fill(T::zero());
                        out[x1..].fill(T::zero());
                        let s0 = (x0 as isize + dx) as usize;
                        out[x0..x1].copy_from_slice(&src[s0..s0 + (x1 - x0)]);
                    }
                }
            }
        }
    }

    /// Adjoint of [`Self::im2col`], accumulating into `img`.
    fn col2im(&self, cols: &[T], h: usize, w: usize, img: &mut [T]) {
        let (kh, kw) = self.spec.kernel;
        let (dh, dw) = self.spec.dilation;
        let (ph, pw) = self.spec.padding();
        let hw = h * w;
        for c in 0..self.spec.in_channels {
            let plane = &mut img[c * hw..(c + 1) * hw];
            for ki in 0..kh {
                for kj in 0..kw {
                    let row = (c * kh + ki) * kw + kj;
                    let src = &cols[row * hw..(row + 1) * hw];
                    let dy = (ki * dh) as isize - ph as isize;
                    let dx = (kj * dw) as isize - pw as isize;
                    let x0 = (-dx).max(0) as usize;
                    let x1 = ((w as isize - dx).min(w as isize)).max(0) as usize;
                    if x0 >= x1 {
                        continue;
                    }
                    for y in 0..h {
                        let sy = y as isize + dy;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let s0 = (x0 as isize + dx) as usize;
                        let dst = &mut plane[sy as usize * w + s0..sy as usize * w + s0 + (x1 - x0)];
                        for (d, &v) in dst.iter_mut().zip(&src[y * w + x0..y * w + x1]) {
                            *d += v;
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, h, w) = self.input_dims(x)?;
        let (ci, co) = (self.spec.in_channels, self.spec.out_channels);
        let hw = h * w;
        let k = self.spec.patch_len();
        let mut out = Tensor::zeros(&[n, co, h, w]);
        let mut cols = if self.spec.is_pointwise() { Vec::new() } else { vec![T::zero(); k * hw] };
        for b in 0..n {
            let img = &x.data()[b * ci * hw..(b + 1) * ci * hw];
            let dst = &mut out.data_mut()[b * co * hw..(b + 1) * co * hw];
            for (o, &bias) in self.bias.data().iter().enumerate() {
                dst[o * hw..(o + 1) * hw].fill(bias);
            }
            let patches = if self.spec.is_pointwise() {
                img
            } else {
                self.im2col(img, h, w, &mut cols);
                &cols[..]
            };
            gemm(false, false, co, hw, k, T::one(), self.weight.data(), patches, T::one(), dst);
        }
        Ok(out)
    }

    /// Accumulates weight/bias gradients into `grad` and returns `d_x`.
    pub fn backward(&self, x: &Tensor<T>, d_out: &Tensor<T>, grad: &mut Self) -> Result<Tensor<T>> {
        let (n, h, w) = self.input_dims(x)?;
        let (ci, co) = (self.spec.in_channels, self.spec.out_channels);
        if d_out.shape() != [n, co, h, w] {
            return Err(Error::Dimension(format!(
                "conv2d gradient shape {:?} does not match output [{n}, {co}, {h}, {w}]",
                d_out.shape()
            )));
        }
        let hw = h * w;
        let k = self.spec.patch_len();
        let mut dx = Tensor::zeros(x.shape());
        let pointwise = self.spec.is_pointwise();
        let mut cols = if pointwise { Vec::new() } else { vec![T::zero(); k * hw] };
        let mut dcols = vec![T::zero(); k * hw];
        let mut dw = vec![0.0f64; co * k];
        for b in 0..n {
            let img = &x.data()[b * ci * hw..(b + 1) * ci * hw];
            let dy = &d_out.data()[b * co * hw..(b + 1) * co * hw];
            for (o, db) in grad.bias.data_mut().iter_mut().enumerate() {
                *db += T::of(dy[o * hw..(o + 1) * hw].iter().map(|v| v.as_f64()).sum());
            }
            let patches = if pointwise {
                img
            } else {
                self.im2col(img, h, w, &mut cols);
                &cols[..]
            };
            gemm_abt_accumulate(co, k, hw, dy, patches, &mut dw);
            let dimg = &mut dx.data_mut()[b * ci * hw..(b + 1) * ci * hw];
            if pointwise {
                gemm(true, false, k, hw, co, T::one(), self.weight.data(), dy, T::zero(), dimg);
            } else {
                gemm(true, false, k, hw, co, T::one(), self.weight.data(), dy, T::zero(), &mut dcols);
                self.col2im(&dcols, h, w, dimg);
            }
        }
        for (g, v) in grad.weight.data_mut().iter_mut().zip(&dw) {
            *g += T::of(*v);
        }
        Ok(dx)
    }
}

impl<T: Real> Parameters<T> for Conv2d<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &Tensor<T>)) {
        f(&join(prefix, "weight"), ParamKind::Weight, &self.weight);
        f(&join(prefix, "bias"), ParamKind::Weight, &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &mut Tensor<T>)) {
        f(&join(prefix, "weight"), ParamKind::Weight, &mut self.weight);
        f(&join(prefix, "bias"), ParamKind::Weight, &mut self.bias);
    }
}
