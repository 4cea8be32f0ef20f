//! The five-block convolutional encoder and its map-to-sequence collapse.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::block::{BlockCache, BottleneckBlock};
use crate::nn::pool::{maxpool2d, maxpool2d_backward, PoolCache};
use crate::nn::Mode;
use crate::params::{join, ParamKind, Parameters};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub channels: Vec<usize>,
    /// (height, width) dilation of each block's 3×3 convolution.
    pub dilations: Vec<(usize, usize)>,
    /// (height, width) max-pool window applied after each block.
    pub pools: Vec<(usize, usize)>,
    pub bottleneck_ratio: usize,
    pub input_height: usize,
    pub input_channels: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            channels: vec![32, 64, 128, 256, 256],
            dilations: vec![(1, 1), (2, 1), (4, 1), (8, 1), (1, 1)],
            pools: vec![(2, 2), (2, 2), (2, 1), (2, 1), (1, 1)],
            bottleneck_ratio: 4,
            input_height: 128,
            input_channels: 1,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.channels.len();
        if n == 0 || self.dilations.len() != n || self.pools.len() != n {
            return Err(Error::Config(format!(
                "encoder needs equal-length channel/dilation/pool lists, got {}/{}/{}",
                n,
                self.dilations.len(),
                self.pools.len()
            )));
        }
        if self.channels.contains(&0) || self.pools.iter().any(|&(h, w)| h == 0 || w == 0) {
            return Err(Error::Config("channels and pool windows must be positive".into()));
        }
        if self.input_height % self.height_divisor() != 0 {
            return Err(Error::Config(format!(
                "input height {} is not divisible by the pooled height factor {}",
                self.input_height,
                self.height_divisor()
            )));
        }
        Ok(())
    }

    pub fn height_divisor(&self) -> usize {
        self.pools.iter().map(|p| p.0).product()
    }

    pub fn width_divisor(&self) -> usize {
        self.pools.iter().map(|p| p.1).product()
    }

    /// Smallest accepted image width (at least four output frames).
    pub fn min_width(&self) -> usize {
        4 * self.width_divisor()
    }

    pub fn feature_height(&self) -> usize {
        self.input_height / self.height_divisor()
    }

    pub fn feature_dim(&self) -> usize {
        self.channels.last().copied().unwrap_or(0) * self.feature_height()
    }

    pub fn time_steps(&self, width: usize) -> usize {
        width / self.width_divisor()
    }
}

#[derive(Clone, Debug)]
pub struct Encoder<T: Real> {
    pub config: EncoderConfig,
    pub blocks: Vec<BottleneckBlock<T>>,
}

#[derive(Clone, Debug)]
pub struct EncoderCache<T: Real> {
    blocks: Vec<BlockCache<T>>,
    pools: Vec<PoolCache>,
    map_shape: Vec<usize>,
}

impl<T: Real> Encoder<T> {
    pub fn new(config: EncoderConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let mut blocks = Vec::with_capacity(config.channels.len());
        let mut in_ch = config.input_channels;
        for (&out_ch, &dil) in config.channels.iter().zip(&config.dilations) {
            blocks.push(BottleneckBlock::new(in_ch, out_ch, config.bottleneck_ratio, dil, rng)?);
            in_ch = out_ch;
        }
        Ok(Encoder { config, blocks })
    }

    pub fn zero_residual_branches(&mut self) {
        self.blocks.iter_mut().for_each(BottleneckBlock::zero_residual_branch);
    }

    /// `[N, 1, H, W]` image batch to a `[N, W/4, C·H/16]` feature sequence
    /// (for the default pools). Feature index is `channel * H_final + row`.
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, EncoderCache<T>)> {
        let cfg = &self.config;
        let [_, c, h, w] = *x.shape() else {
            return Err(Error::Dimension(format!("encoder expects [N, C, H, W], got {:?}", x.shape())));
        };
        if c != cfg.input_channels || h != cfg.input_height {
            return Err(Error::Dimension(format!(
                "encoder expects {} channel(s) of height {}, got {:?}",
                cfg.input_channels,
                cfg.input_height,
                x.shape()
            )));
        }
        if w < cfg.min_width() {
            return Err(Error::WidthTooSmall {
                width: w,
                min: cfg.min_width(),
            });
        }
        let pools = cfg.pools.clone();
        let mut cur = x.clone();
        let mut block_caches = Vec::with_capacity(self.blocks.len());
        let mut pool_caches = Vec::with_capacity(self.blocks.len());
        for (block, window) in self.blocks.iter_mut().zip(pools) {
            let (y, bc) = block.forward(&cur, mode)?;
            let (p, pc) = maxpool2d(&y, window)?;
            block_caches.push(bc);
            pool_caches.push(pc);
            cur = p;
        }
        let map_shape = cur.shape().to_vec();
        Ok((
            map_to_sequence(&cur),
            EncoderCache {
                blocks: block_caches,
                pools: pool_caches,
                map_shape,
            },
        ))
    }

    pub fn backward(&self, cache: &EncoderCache<T>, d_seq: &Tensor<T>, grad: &mut Self) -> Result<Tensor<T>> {
        let mut d = sequence_to_map(d_seq, &cache.map_shape)?;
        for i in (0..self.blocks.len()).rev() {
            let d_block = maxpool2d_backward(&cache.pools[i], &d)?;
            d = self.blocks[i].backward(&cache.blocks[i], &d_block, &mut grad.blocks[i])?;
        }
        Ok(d)
    }
}

/// `[N, C, H, T]` → `[N, T, C·H]`.
pub fn map_to_sequence<T: Real>(map: &Tensor<T>) -> Tensor<T> {
    let [n, c, h, t] = *map.shape() else {
        panic!("map_to_sequence expects rank 4");
    };
    let f = c * h;
    let src = map.data();
    let mut out = Tensor::zeros(&[n, t, f]);
    let dst = out.data_mut();
    for b in 0..n {
        for ch in 0..c {
            for row in 0..h {
                let s = ((b * c + ch) * h + row) * t;
                for step in 0..t {
                    dst[(b * t + step) * f + ch * h + row] = src[s + step];
                }
            }
        }
    }
    out
}

/// Inverse of [`map_to_sequence`].
pub fn sequence_to_map<T: Real>(seq: &Tensor<T>, map_shape: &[usize]) -> Result<Tensor<T>> {
    let [n, c, h, t] = *map_shape else {
        return Err(Error::Dimension("map shape must be rank 4".into()));
    };
    if seq.shape() != [n, t, c * h] {
        return Err(Error::Dimension(format!(
            "sequence gradient {:?} does not match map {map_shape:?}",
            seq.shape()
        )));
    }
    let f = c * h;
    let src = seq.data();
    let mut out = Tensor::zeros(map_shape);
    let dst = out.data_mut();
    for b in 0..n {
        for ch in 0..c {
            for row in 0..h {
                let d = ((b * c + ch) * h + row) * t;
                for step in 0..t {
                    dst[d + step] = src[(b * t + step) * f + ch * h + row];
                }
            }
        }
    }
    Ok(out)
}

impl<T: Real> Parameters<T> for Encoder<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &Tensor<T>)) {
        for (i, b) in self.blocks.iter().enumerate() {
            b.visit(&join(prefix, &format!("block{i}")), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &mut Tensor<T>)) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit_mut(&join(prefix, &format!("block{i}")), f);
        }
    }
}
