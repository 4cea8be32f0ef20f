//! Stochastic degradation pipeline. Each operation fires independently with
//! its own probability and fired operations compose in table order.
//!
//! Images are `[1, H, W]` tensors with white ≈ 1 and ink ≈ 0; every
//! operation preserves the shape and clamps the output to `[0, 1]`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::fnv1a;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentKind {
    BrightnessContrastGamma,
    Blur,
    Jpeg,
    Erosion,
    Dilation,
    RotationShear,
    PerlinNoise,
    GaussianNoise,
    Elastic,
    Scratches,
}

impl AugmentKind {
    pub const ALL: [AugmentKind; 10] = [
        AugmentKind::BrightnessContrastGamma,
        AugmentKind::Blur,
        AugmentKind::Jpeg,
        AugmentKind::Erosion,
        AugmentKind::Dilation,
        AugmentKind::RotationShear,
        AugmentKind::PerlinNoise,
        AugmentKind::GaussianNoise,
        AugmentKind::Elastic,
        AugmentKind::Scratches,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AugmentKind::BrightnessContrastGamma => "brightness_contrast_gamma",
            AugmentKind::Blur => "blur",
            AugmentKind::Jpeg => "jpeg",
            AugmentKind::Erosion => "erosion",
            AugmentKind::Dilation => "dilation",
            AugmentKind::RotationShear => "rotation_shear",
            AugmentKind::PerlinNoise => "perlin_noise",
            AugmentKind::GaussianNoise => "gaussian_noise",
            AugmentKind::Elastic => "elastic",
            AugmentKind::Scratches => "scratches",
        }
    }
}

impl fmt::Display for AugmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AugmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AugmentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownAugmentation(s.to_string()))
    }
}

/// Activation probability per operation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Probabilities {
    pub brightness_contrast_gamma: f64,
    pub blur: f64,
    pub jpeg: f64,
    pub erosion: f64,
    pub dilation: f64,
    pub rotation_shear: f64,
    pub perlin_noise: f64,
    pub gaussian_noise: f64,
    pub elastic: f64,
    pub scratches: f64,
}

impl Default for Probabilities {
    fn default() -> Self {
        Probabilities {
            brightness_contrast_gamma: 0.9,
            blur: 0.5,
            jpeg: 0.5,
            erosion: 0.08,
            dilation: 0.08,
            rotation_shear: 0.6,
            perlin_noise: 0.25,
            gaussian_noise: 0.25,
            elastic: 0.15,
            scratches: 0.05,
        }
    }
}

impl Probabilities {
    pub fn get(&self, kind: AugmentKind) -> f64 {
        *self.slot(kind)
    }

    pub fn set(&mut self, kind: AugmentKind, p: f64) {
        *self.slot_mut(kind) = p;
    }

    pub fn uniform(p: f64) -> Self {
        let mut out = Self::default();
        for k in AugmentKind::ALL {
            out.set(k, p);
        }
        out
    }

    fn slot(&self, kind: AugmentKind) -> &f64 {
        match kind {
            AugmentKind::BrightnessContrastGamma => &self.brightness_contrast_gamma,
            AugmentKind::Blur => &self.blur,
            AugmentKind::Jpeg => &self.jpeg,
            AugmentKind::Erosion => &self.erosion,
            AugmentKind::Dilation => &self.dilation,
            AugmentKind::RotationShear => &self.rotation_shear,
            AugmentKind::PerlinNoise => &self.perlin_noise,
            AugmentKind::GaussianNoise => &self.gaussian_noise,
            AugmentKind::Elastic => &self.elastic,
            AugmentKind::Scratches => &self.scratches,
        }
    }

    fn slot_mut(&mut self, kind: AugmentKind) -> &mut f64 {
        match kind {
            AugmentKind::BrightnessContrastGamma => &mut self.brightness_contrast_gamma,
            AugmentKind::Blur => &mut self.blur,
            AugmentKind::Jpeg => &mut self.jpeg,
            AugmentKind::Erosion => &mut self.erosion,
            AugmentKind::Dilation => &mut self.dilation,
            AugmentKind::RotationShear => &mut self.rotation_shear,
            AugmentKind::PerlinNoise => &mut self.perlin_noise,
            AugmentKind::GaussianNoise => &mut self.gaussian_noise,
            AugmentKind::Elastic => &mut self.elastic,
            AugmentKind::Scratches => &mut self.scratches,
        }
    }
}

/// Inclusive `[lo, hi]` range a parameter is drawn from uniformly.
pub type Range = [f64; 2];

fn draw(rng: &mut impl Rng, r: Range) -> f64 {
    r[0] + (r[1] - r[0]) * rng.random::<f64>()
}

fn draw_int(rng: &mut impl Rng, r: Range) -> usize {
    let (lo, hi) = (r[0].round() as i64, r[1].round() as i64);
    rng.random_range(lo.min(hi)..=hi.max(lo)).max(0) as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentParams {
    pub brightness: Range,
    pub contrast: Range,
    pub gamma: Range,
    pub blur_sigma: Range,
    pub jpeg_quality: Range,
    pub rotation_degrees: Range,
    pub shear: Range,
    pub perlin_amplitude: Range,
    pub perlin_octaves: Range,
    pub gaussian_sigma: Range,
    pub elastic_alpha: Range,
    pub elastic_sigma: Range,
    pub scratch_count: Range,
    pub scratch_thickness: Range,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            brightness: [-0.15, 0.15],
            contrast: [0.7, 1.3],
            gamma: [0.7, 1.4],
            blur_sigma: [0.3, 1.2],
            jpeg_quality: [40.0, 90.0],
            rotation_degrees: [-2.0, 2.0],
            shear: [-0.05, 0.05],
            perlin_amplitude: [0.05, 0.15],
            perlin_octaves: [2.0, 3.0],
            gaussian_sigma: [0.01, 0.05],
            elastic_alpha: [4.0, 10.0],
            elastic_sigma: [4.0, 8.0],
            scratch_count: [1.0, 3.0],
            scratch_thickness: [1.0, 2.0],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub probabilities: Probabilities,
    pub params: AugmentParams,
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        for k in AugmentKind::ALL {
            let p = self.probabilities.get(k);
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("probability for {k} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

/// Seed for one sample in one epoch, independent of processing order.
pub fn sample_seed(global_seed: u64, sample_id: &str, epoch: u64) -> u64 {
    let mut bytes = Vec::with_capacity(sample_id.len() + 16);
    bytes.extend_from_slice(&global_seed.to_le_bytes());
    bytes.extend_from_slice(&epoch.to_le_bytes());
    bytes.extend_from_slice(sample_id.as_bytes());
    fnv1a(&bytes)
}

/// Runs the pipeline with a fresh generator seeded from `seed`.
pub fn augment_seeded(image: &Tensor<f32>, cfg: &AugmentConfig, seed: u64) -> Result<(Tensor<f32>, Vec<AugmentKind>)> {
    apply_pipeline(image, cfg, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Walks the operations in table order; each fires iff an independent
/// uniform draw falls below its probability. Returns the result and the
/// operations that fired.
pub fn apply_pipeline(
    image: &Tensor<f32>,
    cfg: &AugmentConfig,
    rng: &mut impl Rng,
) -> Result<(Tensor<f32>, Vec<AugmentKind>)> {
    check_image(image)?;
    let mut out = image.clone();
    let mut fired = Vec::new();
    for kind in AugmentKind::ALL {
        if rng.random::<f64>() < cfg.probabilities.get(kind) {
            out = augment_op(kind, &out, &cfg.params, rng)?;
            fired.push(kind);
        }
    }
    Ok((out, fired))
}

/// Applies one operation with parameters drawn from `params`.
pub fn augment_op(kind: AugmentKind, image: &Tensor<f32>, params: &AugmentParams, rng: &mut impl Rng) -> Result<Tensor<f32>> {
    let (h, w) = check_image(image)?;
    let src = Plane {
        h,
        w,
        data: image.data().to_vec(),
    };
    let out = match kind {
        AugmentKind::BrightnessContrastGamma => {
            let (b, c, g) = (draw(rng, params.brightness), draw(rng, params.contrast), draw(rng, params.gamma));
            brightness_contrast_gamma(&src, b, c, g)
        }
        AugmentKind::Blur => gaussian_blur(&src, draw(rng, params.blur_sigma), 2),
        AugmentKind::Jpeg => block_dct_quantize(&src, draw(rng, params.jpeg_quality)),
        AugmentKind::Erosion => erode(&src),
        AugmentKind::Dilation => dilate(&src),
        AugmentKind::RotationShear => {
            let (a, s) = (draw(rng, params.rotation_degrees), draw(rng, params.shear));
            rotate_shear(&src, a, s)
        }
        AugmentKind::PerlinNoise => {
            let (amp, oct) = (draw(rng, params.perlin_amplitude), draw_int(rng, params.perlin_octaves));
            value_noise(&src, amp, oct.max(1), rng)
        }
        AugmentKind::GaussianNoise => gaussian_noise(&src, draw(rng, params.gaussian_sigma), rng),
        AugmentKind::Elastic => {
            let (alpha, sigma) = (draw(rng, params.elastic_alpha), draw(rng, params.elastic_sigma));
            elastic(&src, alpha, sigma, rng)
        }
        AugmentKind::Scratches => {
            let n = draw_int(rng, params.scratch_count);
            scratches(&src, n, params.scratch_thickness, rng)
        }
    };
    out.into_tensor()
}

fn check_image(image: &Tensor<f32>) -> Result<(usize, usize)> {
    match image.shape() {
        [1, h, w] if *h > 0 && *w > 0 => Ok((*h, *w)),
        s => Err(Error::Dimension(format!("augmentation expects a [1, H, W] image, got {s:?}"))),
    }
}

/// Row-major single-channel image used by the operations.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

impl Plane {
    fn get_clamped(&self, y: i64, x: i64) -> f32 {
        let y = y.clamp(0, self.h as i64 - 1) as usize;
        let x = x.clamp(0, self.w as i64 - 1) as usize;
        self.data[y * self.w + x]
    }

    /// Bilinear sample; positions outside the image read as white.
    fn sample(&self, y: f64, x: f64) -> f32 {
        let (y0, x0) = (y.floor(), x.floor());
        let (fy, fx) = (y - y0, x - x0);
        let px = |yy: f64, xx: f64| -> f64 {
            if yy < 0.0 || xx < 0.0 || yy >= self.h as f64 || xx >= self.w as f64 {
                1.0
            } else {
                self.data[yy as usize * self.w + xx as usize] as f64
            }
        };
        let mut v = 0.0;
        for (dy, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
            for (dx, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
                let weight = wy * wx;
                if weight != 0.0 {
                    v += weight * px(y0 + dy, x0 + dx);
                }
            }
        }
        v as f32
    }

    fn map(&self, f: impl Fn(f32) -> f32) -> Plane {
        Plane {
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn into_tensor(self) -> Result<Tensor<f32>> {
        let data = self.data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Tensor::new(&[1, self.h, self.w], data)
    }
}

pub fn brightness_contrast_gamma(p: &Plane, shift: f64, contrast: f64, gamma: f64) -> Plane {
    p.map(|v| {
        let g = (v.clamp(0.0, 1.0) as f64).powf(gamma);
        (((g - 0.5) * contrast + 0.5 + shift).clamp(0.0, 1.0)) as f32
    })
}

fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let k: Vec<f64> = (-(radius as i64)..=radius as i64)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian smoothing with edge replication.
fn smooth(p: &Plane, sigma: f64, radius: usize) -> Plane {
    if sigma <= 0.0 || radius == 0 {
        return p.clone();
    }
    let k = gaussian_kernel(sigma, radius);
    let r = radius as i64;
    let mut tmp = p.clone();
    for y in 0..p.h {
        for x in 0..p.w {
            let s: f64 = k
                .iter()
                .enumerate()
                .map(|(i, &kv)| kv * p.get_clamped(y as i64, x as i64 + i as i64 - r) as f64)
                .sum();
            tmp.data[y * p.w + x] = s as f32;
        }
    }
    let mut out = tmp.clone();
    for y in 0..p.h {
        for x in 0..p.w {
            let s: f64 = k
                .iter()
                .enumerate()
                .map(|(i, &kv)| kv * tmp.get_clamped(y as i64 + i as i64 - r, x as i64) as f64)
                .sum();
            out.data[y * p.w + x] = s as f32;
        }
    }
    out
}

/// Gaussian blur; the kernel radius is at most `max_radius`.
pub fn gaussian_blur(p: &Plane, sigma: f64, max_radius: usize) -> Plane {
    let radius = ((2.0 * sigma).ceil() as usize).min(max_radius);
    smooth(p, sigma, radius)
}

const LUMA_QUANT: [f64; 64] = [
    16., 11., 10., 16., 24., 40., 51., 61., 12., 12., 14., 19., 26., 58., 60., 55., 14., 13., 16., 24., 40., 57., 69.,
    56., 14., 17., 22., 29., 51., 87., 80., 62., 18., 22., 37., 56., 68., 109., 103., 77., 24., 35., 55., 64., 81.,
    104., 113., 92., 49., 64., 78., 87., 103., 121., 120., 101., 72., 92., 95., 98., 112., 100., 103., 99.,
];

/// Blocky compression noise: 8×8 orthonormal DCT, quantization with the
/// standard luminance table scaled to `quality` (1..100), inverse DCT.
pub fn block_dct_quantize(p: &Plane, quality: f64) -> Plane {
    let q = quality.clamp(1.0, 100.0);
    let scale = if q < 50.0 { 5000.0 / q } else { 200.0 - 2.0 * q };
    let table: Vec<f64> = LUMA_QUANT.iter().map(|&t| ((t * scale + 50.0) / 100.0).floor().max(1.0)).collect();
    let basis: Vec<f64> = (0..64)
        .map(|i| {
            let (u, x) = (i / 8, i % 8);
            let c = if u == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
            c * ((2 * x + 1) as f64 * u as f64 * PI / 16.0).cos()
        })
        .collect();
    let mut out = p.clone();
    let mut block = [0.0f64; 64];
    let mut coef = [0.0f64; 64];
    for by in (0..p.h).step_by(8) {
        for bx in (0..p.w).step_by(8) {
            for i in 0..64 {
                block[i] = p.get_clamped((by + i / 8) as i64, (bx + i % 8) as i64) as f64 * 255.0 - 128.0;
            }
            for u in 0..8 {
                for v in 0..8 {
                    let mut s = 0.0;
                    for y in 0..8 {
                        for x in 0..8 {
                            s += basis[u * 8 + y] * basis[v * 8 + x] * block[y * 8 + x];
                        }
                    }
                    let t = table[u * 8 + v];
                    coef[u * 8 + v] = (s / t).round() * t;
                }
            }
            for y in 0..8 {
                for x in 0..8 {
                    let (yy, xx) = (by + y, bx + x);
                    if yy >= p.h || xx >= p.w {
                        continue;
                    }
                    let mut s = 0.0;
                    for u in 0..8 {
                        for v in 0..8 {
                            s += basis[u * 8 + y] * basis[v * 8 + x] * coef[u * 8 + v];
                        }
                    }
                    out.data[yy * p.w + xx] = (((s + 128.0) / 255.0).clamp(0.0, 1.0)) as f32;
                }
            }
        }
    }
    out
}

fn filter3(p: &Plane, pick: impl Fn(f32, f32) -> f32, init: f32) -> Plane {
    let mut out = p.clone();
    for y in 0..p.h as i64 {
        for x in 0..p.w as i64 {
            let mut acc = init;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    acc = pick(acc, p.get_clamped(y + dy, x + dx));
                }
            }
            out.data[y as usize * p.w + x as usize] = acc;
        }
    }
    out
}

/// Thins dark ink: a 3×3 maximum filter on the white-background image.
pub fn erode(p: &Plane) -> Plane {
    filter3(p, f32::max, f32::MIN)
}

/// Thickens dark ink: a 3×3 minimum filter on the white-background image.
pub fn dilate(p: &Plane) -> Plane {
    filter3(p, f32::min, f32::MAX)
}

/// Rotation by `degrees` combined with horizontal shear about the image
/// centre, resampled bilinearly with white fill.
pub fn rotate_shear(p: &Plane, degrees: f64, shear: f64) -> Plane {
    let t = degrees.to_radians();
    let (c, s) = (t.cos(), t.sin());
    // forward = R · [[1, shear], [0, 1]]
    let (a, b, cc, d) = (c, c * shear - s, s, s * shear + c);
    let det = a * d - b * cc;
    let (ia, ib, ic, id) = (d / det, -b / det, -cc / det, a / det);
    let (cy, cx) = ((p.h as f64 - 1.0) / 2.0, (p.w as f64 - 1.0) / 2.0);
    let mut out = p.clone();
    for y in 0..p.h {
        for x in 0..p.w {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let sx = ia * dx + ib * dy + cx;
            let sy = ic * dx + id * dy + cy;
            out.data[y * p.w + x] = p.sample(sy, sx);
        }
    }
    out
}

/// Adds a smooth multi-octave value-noise field with peak magnitude `amplitude`.
pub fn value_noise(p: &Plane, amplitude: f64, octaves: usize, rng: &mut impl Rng) -> Plane {
    let mut field = vec![0.0f64; p.h * p.w];
    let mut cell = 32.0f64;
    let mut weight = 1.0;
    for _ in 0..octaves {
        let gh = (p.h as f64 / cell).ceil() as usize + 2;
        let gw = (p.w as f64 / cell).ceil() as usize + 2;
        let grid: Vec<f64> = (0..gh * gw).map(|_| rng.random_range(-1.0..=1.0)).collect();
        for y in 0..p.h {
            let fy = y as f64 / cell;
            let (gy, ty) = (fy.floor() as usize, smoothstep(fy.fract()));
            for x in 0..p.w {
                let fx = x as f64 / cell;
                let (gx, tx) = (fx.floor() as usize, smoothstep(fx.fract()));
                let g = |yy: usize, xx: usize| grid[yy * gw + xx];
                let top = g(gy, gx) * (1.0 - tx) + g(gy, gx + 1) * tx;
                let bottom = g(gy + 1, gx) * (1.0 - tx) + g(gy + 1, gx + 1) * tx;
                field[y * p.w + x] += weight * (top * (1.0 - ty) + bottom * ty);
            }
        }
        cell /= 2.0;
        weight /= 2.0;
    }
    let peak = field.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let k = if peak > 0.0 { amplitude / peak } else { 0.0 };
    Plane {
        h: p.h,
        w: p.w,
        data: p.data.iter().zip(&field).map(|(&v, &n)| (v as f64 + k * n) as f32).collect(),
    }
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

pub fn gaussian_noise(p: &Plane, sigma: f64, rng: &mut impl Rng) -> Plane {
    if sigma <= 0.0 {
        return p.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    Plane {
        h: p.h,
        w: p.w,
        data: p.data.iter().map(|&v| (v as f64 + normal.sample(rng)) as f32).collect(),
    }
}

/// Elastic warp: a uniform random displacement field, Gaussian-smoothed with
/// `sigma` and rescaled so its largest component is `alpha` pixels.
pub fn elastic(p: &Plane, alpha: f64, sigma: f64, rng: &mut impl Rng) -> Plane {
    let radius = (3.0 * sigma).ceil() as usize;
    let field = |rng: &mut dyn rand::RngCore| {
        let raw = Plane {
            h: p.h,
            w: p.w,
            data: (0..p.h * p.w).map(|_| rng.random_range(-1.0f32..=1.0)).collect(),
        };
        let sm = smooth(&raw, sigma, radius);
        let peak = sm.data.iter().fold(0.0f32, |m, v| m.max(v.abs()));
        let k = if peak > 0.0 { alpha as f32 / peak } else { 0.0 };
        sm.data.into_iter().map(|v| v * k).collect::<Vec<f32>>()
    };
    let dx = field(rng);
    let dy = field(rng);
    let mut out = p.clone();
    for y in 0..p.h {
        for x in 0..p.w {
            let i = y * p.w + x;
            out.data[i] = p.sample(y as f64 + dy[i] as f64, x as f64 + dx[i] as f64);
        }
    }
    out
}

/// Draws `count` thin straight segments, each uniformly light or dark.
pub fn scratches(p: &Plane, count: usize, thickness: Range, rng: &mut impl Rng) -> Plane {
    let mut out = p.clone();
    for _ in 0..count {
        let (x0, y0) = (rng.random_range(0.0..p.w as f64), rng.random_range(0.0..p.h as f64));
        let angle = rng.random_range(0.0..PI);
        let len = rng.random_range(0.2..=0.6) * p.w.max(p.h) as f64;
        let (x1, y1) = (x0 + len * angle.cos(), y0 + len * angle.sin());
        let half = draw(rng, thickness) / 2.0;
        let value: f32 = if rng.random::<bool>() {
            rng.random_range(0.85..=1.0)
        } else {
            rng.random_range(0.0..=0.3)
        };
        let steps = (2.0 * len).ceil() as usize + 1;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            let (cx, cy) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
            let r = half.ceil() as i64;
            for yy in (cy.round() as i64 - r)..=(cy.round() as i64 + r) {
                for xx in (cx.round() as i64 - r)..=(cx.round() as i64 + r) {
                    if yy < 0 || xx < 0 || yy >= p.h as i64 || xx >= p.w as i64 {
                        continue;
                    }
                    let d = ((yy as f64 - cy).powi(2) + (xx as f64 - cx).powi(2)).sqrt();
                    if d <= half.max(0.5) {
                        out.data[yy as usize * p.w + xx as usize] = value;
                    }
                }
            }
        }
    }
    out
}
