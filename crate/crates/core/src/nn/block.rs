//! Pre-activation bottleneck residual block.
//!
//! ```text
//! x ─┬─ BN → ReLU → 1×1 reduce → BN → ReLU → 3×3 dilated → BN → ReLU → 1×1 restore ─┐
//!    └──────────────── identity or 1×1 projection (no norm) ─────────────────────────(+)→ out
//! ```

use rand::Rng;

use crate::error::Result;
use crate::nn::activation::{relu, relu_backward};
use crate::nn::conv::{Conv2d, ConvSpec};
use crate::nn::norm::{BatchNorm2d, BatchNormCache};
use crate::nn::Mode;
use crate::params::{join, ParamKind, Parameters};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Debug)]
pub struct BottleneckBlock<T: Real> {
    pub norm1: BatchNorm2d<T>,
    pub reduce: Conv2d<T>,
    pub norm2: BatchNorm2d<T>,
    pub spatial: Conv2d<T>,
    pub norm3: BatchNorm2d<T>,
    pub restore: Conv2d<T>,
    /// Present iff the block changes the channel count.
    pub shortcut: Option<Conv2d<T>>,
}

#[derive(Clone, Debug)]
pub struct BlockCache<T: Real> {
    x: Tensor<T>,
    pre: [Tensor<T>; 3],
    act: [Tensor<T>; 3],
    norms: [BatchNormCache<T>; 3],
}

/// Width of the reduced inner representation.
pub fn bottleneck_width(out_channels: usize, ratio: usize) -> usize {
    (out_channels / ratio.max(1)).max(1)
}

impl<T: Real> BottleneckBlock<T> {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        ratio: usize,
        dilation: (usize, usize),
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mid = bottleneck_width(out_channels, ratio);
        Ok(BottleneckBlock {
            norm1: BatchNorm2d::new(in_channels),
            reduce: Conv2d::new(ConvSpec::pointwise(in_channels, mid), rng)?,
            norm2: BatchNorm2d::new(mid),
            spatial: Conv2d::new(ConvSpec::spatial(mid, mid, dilation), rng)?,
            norm3: BatchNorm2d::new(mid),
            restore: Conv2d::new(ConvSpec::pointwise(mid, out_channels), rng)?,
            shortcut: if in_channels != out_channels {
                Some(Conv2d::new(ConvSpec::pointwise(in_channels, out_channels), rng)?)
            } else {
                None
            },
        })
    }

    pub fn in_channels(&self) -> usize {
        self.reduce.spec.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.restore.spec.out_channels
    }

    /// Zeroes every weight and bias of the residual branch.
    pub fn zero_residual_branch(&mut self) {
        for conv in [&mut self.reduce, &mut self.spatial, &mut self.restore] {
            conv.weight.fill(T::zero());
            conv.bias.fill(T::zero());
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, BlockCache<T>)> {
        let (u1, n1) = self.norm1.forward(x, mode)?;
        let a1 = relu(&u1);
        let c1 = self.reduce.forward(&a1)?;
        let (u2, n2) = self.norm2.forward(&c1, mode)?;
        let a2 = relu(&u2);
        let c2 = self.spatial.forward(&a2)?;
        let (u3, n3) = self.norm3.forward(&c2, mode)?;
        let a3 = relu(&u3);
        let residual = self.restore.forward(&a3)?;
        let out = match &self.shortcut {
            Some(proj) => proj.forward(x)?.add(&residual)?,
            None => x.add(&residual)?,
        };
        Ok((
            out,
            BlockCache {
                x: x.clone(),
                pre: [u1, u2, u3],
                act: [a1, a2, a3],
                norms: [n1, n2, n3],
            },
        ))
    }

    pub fn backward(&self, cache: &BlockCache<T>, d_out: &Tensor<T>, grad: &mut Self) -> Result<Tensor<T>> {
        let [u1, u2, u3] = &cache.pre;
        let [a1, a2, a3] = &cache.act;
        let [n1, n2, n3] = &cache.norms;

        let d_a3 = self.restore.backward(a3, d_out, &mut grad.restore)?;
        let d_c2 = self.norm3.backward(n3, &relu_backward(u3, &d_a3)?, &mut grad.norm3)?;
        let d_a2 = self.spatial.backward(a2, &d_c2, &mut grad.spatial)?;
        let d_c1 = self.norm2.backward(n2, &relu_backward(u2, &d_a2)?, &mut grad.norm2)?;
        let d_a1 = self.reduce.backward(a1, &d_c1, &mut grad.reduce)?;
        let mut dx = self.norm1.backward(n1, &relu_backward(u1, &d_a1)?, &mut grad.norm1)?;

        match (&self.shortcut, &mut grad.shortcut) {
            (Some(proj), Some(gproj)) => dx.accumulate(&proj.backward(&cache.x, d_out, gproj)?)?,
            _ => dx.accumulate(d_out)?,
        }
        Ok(dx)
    }
}

impl<T: Real> Parameters<T> for BottleneckBlock<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &Tensor<T>)) {
        self.norm1.visit(&join(prefix, "norm1"), f);
        self.reduce.visit(&join(prefix, "reduce"), f);
        self.norm2.visit(&join(prefix, "norm2"), f);
        self.spatial.visit(&join(prefix, "spatial"), f);
        self.norm3.visit(&join(prefix, "norm3"), f);
        self.restore.visit(&join(prefix, "restore"), f);
        if let Some(s) = &self.shortcut {
            s.visit(&join(prefix, "shortcut"), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &mut Tensor<T>)) {
        self.norm1.visit_mut(&join(prefix, "norm1"), f);
        self.reduce.visit_mut(&join(prefix, "reduce"), f);
        self.norm2.visit_mut(&join(prefix, "norm2"), f);
        self.spatial.visit_mut(&join(prefix, "spatial"), f);
        self.norm3.visit_mut(&join(prefix, "norm3"), f);
        self.restore.visit_mut(&join(prefix, "restore"), f);
        if let Some(s) = &mut self.shortcut {
            s.visit_mut(&join(prefix, "shortcut"), f);
        }
    }
}
