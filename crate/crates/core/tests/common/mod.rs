#![allow(dead_code)]

use omrf_core::ctc::ctc_loss;
use omrf_core::nn::{
    log_softmax, log_softmax_backward, maxpool2d, maxpool2d_backward, relu, relu_backward, BatchNorm2d,
    BottleneckBlock, Conv2d, ConvSpec, EncoderConfig, Linear, Mode,
};
use omrf_core::rnn::{gru_sequence, gru_sequence_backward, gru_step, gru_step_backward, BiGru, GruParams};
use omrf_core::train::{Model, ModelConfig};
use omrf_core::{NamedTensors, ParamKind, Parameters, Real, Result, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut impl Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// Fixed pseudo-random weights for turning a layer output into a scalar.
pub fn projection<T: Real>(shape: &[usize]) -> Tensor<T> {
    Tensor::from_fn(shape, |i| T::of((1.3 * i as f64 + 0.7).sin()))
}

pub fn project<T: Real>(y: &Tensor<T>) -> f64 {
    let r = projection::<T>(y.shape());
    y.data().iter().zip(r.data()).map(|(a, b)| a.as_f64() * b.as_f64()).sum()
}

/// Adds uniform noise to every trainable tensor.
pub fn jitter<T: Real, P: Parameters<T>>(p: &mut P, scale: f64, rng: &mut impl Rng) {
    p.visit_mut("", &mut |_, kind, t| {
        if kind == ParamKind::Weight {
            for v in t.data_mut() {
                *v += T::of(rng.random_range(-scale..scale));
            }
        }
    });
}

fn weights<T: Real, P: Parameters<T>>(p: &P) -> Vec<(String, Vec<f64>)> {
    let mut out = Vec::new();
    p.visit("", &mut |name, kind, t| {
        if kind == ParamKind::Weight {
            out.push((name.to_string(), t.data().iter().map(|v| v.as_f64()).collect()));
        }
    });
    out
}

/// Copies every tensor of `src` into the same-named tensor of `dst`.
pub fn cast_into<A: Real, B: Real, P: Parameters<A>, Q: Parameters<B>>(src: &P, dst: &mut Q) {
    let mut values = Vec::new();
    src.visit("", &mut |_, _, t| values.push(t.cast::<B>()));
    let mut i = 0;
    dst.visit_mut("", &mut |name, _, t| {
        assert_eq!(t.shape(), values[i].shape(), "{name}");
        *t = values[i].clone();
        i += 1;
    });
    assert_eq!(i, values.len());
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`. A tensor whose gradient is negligible next to
/// the gradient of the whole unit (`global`) is measured against `global`
/// instead, since its true value may be exactly zero.
pub fn rel_error(a: &[f64], b: &[f64], global: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = norm(a).max(norm(b));
    if scale >= 1e-2 * global {
        diff / scale
    } else if global > 0.0 {
        diff / global
    } else {
        0.0
    }
}

/// A differentiable unit under test with a scalar loss.
pub trait Case {
    type Layer<T: Real>: Parameters<T> + Clone;
    const NAME: &'static str;
    /// Whether the input gradient is part of the check.
    const INPUT: bool = true;
    fn build(rng: &mut ChaCha8Rng) -> (Self::Layer<f64>, Tensor<f64>);
    fn fresh<T: Real>(layer: &Self::Layer<f64>) -> Self::Layer<T>;
    fn loss<T: Real>(layer: &Self::Layer<T>, x: &Tensor<T>) -> Result<f64>;
    fn grad<T: Real>(layer: &Self::Layer<T>, x: &Tensor<T>) -> Result<(Self::Layer<T>, Tensor<T>)>;
}

#[derive(Clone, Debug)]
pub struct CaseReport {
    pub name: &'static str,
    /// Worst per-tensor relative error of the double-precision gradients
    /// against central differences.
    pub double: f64,
    /// Worst per-tensor relative error of the single-precision gradients
    /// against the double-precision ones.
    pub single: f64,
    /// Tensor with the largest error.
    pub worst: String,
}

pub const DOUBLE_TOL: f64 = 1e-6;
pub const SINGLE_TOL: f64 = 1e-4;

impl CaseReport {
    pub fn passed(&self) -> bool {
        self.double < DOUBLE_TOL && self.single < SINGLE_TOL
    }
}

/// Central difference of `f` at zero. When a step straddles a kink of a
/// piecewise-smooth function, shrinking it changes the estimate; the
/// smallest step whose estimate agrees with the next larger one wins.
pub fn derivative(mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut cd = |h: f64| (f(h) - f(-h)) / (2.0 * h);
    let mut prev = cd(1e-5);
    for h in [1e-6, 1e-7] {
        let next = cd(h);
        if (next - prev).abs() <= 1e-7 * prev.abs().max(next.abs()).max(1.0) {
            return next;
        }
        prev = next;
    }
    prev
}

/// Sets element `k` of the `ti`-th trainable tensor.
fn set_weight<P: Parameters<f64>>(p: &mut P, ti: usize, k: usize, value: f64) {
    let mut i = 0;
    p.visit_mut("", &mut |_, kind, t| {
        if kind == ParamKind::Weight {
            if i == ti {
                t.data_mut()[k] = value;
            }
            i += 1;
        }
    });
}

pub fn run_case<C: Case>(seed: u64) -> CaseReport {
    let mut r = rng(seed);
    let (mut layer, x) = C::build(&mut r);
    // Both precisions start from values representable in single precision.
    layer.visit_mut("", &mut |_, _, t| *t = t.cast::<f32>().cast::<f64>());
    let x = x.cast::<f32>().cast::<f64>();
    let (g, dx) = C::grad(&layer, &x).unwrap();
    let mut double: f64 = 0.0;

    let analytic = weights(&g);
    let original = weights(&layer);
    let mut probe = layer.clone();
    let mut numeric: Vec<Vec<f64>> = Vec::new();
    for (ti, (_, values)) in original.iter().enumerate() {
        let mut col = Vec::with_capacity(values.len());
        for (k, &v) in values.iter().enumerate() {
            col.push(derivative(|delta| {
                set_weight(&mut probe, ti, k, v + delta);
                C::loss(&probe, &x).unwrap()
            }));
            set_weight(&mut probe, ti, k, v);
        }
        numeric.push(col);
    }
    let mut num_input = Vec::new();
    if C::INPUT {
        let mut xp = x.clone();
        for k in 0..x.len() {
            num_input.push(derivative(|delta| {
                xp.data_mut()[k] = x.data()[k] + delta;
                C::loss(&layer, &xp).unwrap()
            }));
            xp.data_mut()[k] = x.data()[k];
        }
    }
    let mut worst = String::new();
    let mut worst_err = -1.0;
    let mut note = |name: &str, e: f64| {
        if e > worst_err {
            worst_err = e;
            worst = name.to_string();
        }
    };
    let global = norm(&numeric.concat()).max(norm(&num_input));
    for ((name, a), n) in analytic.iter().zip(&numeric) {
        let e = rel_error(a, n, global);
        assert!(e.is_finite(), "{}: {name}", C::NAME);
        note(name, e);
        double = double.max(e);
    }
    if C::INPUT {
        let e = rel_error(dx.data(), &num_input, global);
        note("input", e);
        double = double.max(e);
    }

    let layer32: C::Layer<f32> = C::fresh(&layer);
    let (g32, dx32) = C::grad(&layer32, &x.cast::<f32>()).unwrap();
    let mut single: f64 = 0.0;
    for ((name, a32), (_, a64)) in weights(&g32).iter().zip(&analytic) {
        let e = rel_error(a32, a64, global);
        note(name, e);
        single = single.max(e);
    }
    if C::INPUT {
        let d32: Vec<f64> = dx32.data().iter().map(|v| v.as_f64()).collect();
        let e = rel_error(&d32, dx.data(), global);
        note("input", e);
        single = single.max(e);
    }
    CaseReport {
        name: C::NAME,
        double,
        single,
        worst,
    }
}

fn fresh_by_cast<T: Real, P: Parameters<f64>, Q: Parameters<T>>(src: &P, mut dst: Q) -> Q {
    cast_into(src, &mut dst);
    dst
}

pub struct ConvCase;
impl Case for ConvCase {
    type Layer<T: Real> = Conv2d<T>;
    const NAME: &'static str = "conv2d";
    fn build(rng: &mut ChaCha8Rng) -> (Conv2d<f64>, Tensor<f64>) {
        let mut c = Conv2d::new(ConvSpec::spatial(2, 3, (2, 1)), rng).unwrap();
        jitter(&mut c, 0.2, rng);
        (c, uniform(&[2, 2, 6, 5], -1.0, 1.0, rng))
    }
    fn fresh<T: Real>(l: &Conv2d<f64>) -> Conv2d<T> {
        fresh_by_cast(l, Conv2d::zeros(ConvSpec::spatial(2, 3, (2, 1))).unwrap())
    }
    fn loss<T: Real>(l: &Conv2d<T>, x: &Tensor<T>) -> Result<f64> {
        Ok(project(&l.forward(x)?))
    }
    fn grad<T: Real>(l: &Conv2d<T>, x: &Tensor<T>) -> Result<(Conv2d<T>, Tensor<T>)> {
        let y = l.forward(x)?;
        let mut g = l.zeros_like();
        let dx = l.backward(x, &projection(y.shape()), &mut g)?;
        Ok((g, dx))
    }
}

pub struct PointwiseConvCase;
impl Case for PointwiseConvCase {
    type Layer<T: Real> = Conv2d<T>;
    const NAME: &'static str = "conv2d_1x1";
    fn build(rng: &mut ChaCha8Rng) -> (Conv2d<f64>, Tensor<f64>) {
        let mut c = Conv2d::new(ConvSpec::pointwise(3, 2), rng).unwrap();
        jitter(&mut c, 0.2, rng);
        (c, uniform(&[2, 3, 3, 4], -1.0, 1.0, rng))
    }
    fn fresh<T: Real>(l: &Conv2d<f64>) -> Conv2d<T> {
        fresh_by_cast(l, Conv2d::zeros(ConvSpec::pointwise(3, 2)).unwrap())
    }
    fn loss<T: Real>(l: &Conv2d<T>, x: &Tensor<T>) -> Result<f64> {
        ConvCase::loss(l, x)
    }
    fn grad<T: Real>(l: &Conv2d<T>, x: &Tensor<T>) -> Result<(Conv2d<T>, Tensor<T>)> {
        ConvCase::grad(l, x)
    }
}

pub struct BatchNormCase;
impl Case for BatchNormCase {
    type Layer<T: Real> = BatchNorm2d<T>;
    const NAME: &'static str = "batchnorm";
    fn build(rng: &mut ChaCha8Rng) -> (BatchNorm2d<f64>, Tensor<f64>) {
        let mut b = BatchNorm2d::new(3);
        jitter(&mut b, 0.3, rng);
        (b, uniform(&[2, 3, 3, 4], -1.0, 2.0, rng))
    }
    fn fresh<T: Real>(l: &BatchNorm2d<f64>) -> BatchNorm2d<T> {
        fresh_by_cast(l, BatchNorm2d::new(3))
    }
    fn loss<T: Real>(l: &BatchNorm2d<T>, x: &Tensor<T>) -> Result<f64> {
        Ok(project(&l.clone().forward(x, Mode::Train)?.0))
    }
    fn grad<T: Real>(l: &BatchNorm2d<T>, x: &Tensor<T>) -> Result<(BatchNorm2d<T>, Tensor<T>)> {
        let (y, cache) = l.clone().forward(x, Mode::Train)?;
        let mut g = l.zeros_like();
        let dx = l.backward(&cache, &projection(y.shape()), &mut g)?;
        Ok((g, dx))
    }
}

pub struct BatchNormEvalCase;
impl Case for BatchNormEvalCase {
    type Layer<T: Real> = BatchNorm2d<T>;
    const NAME: &'static str = "batchnorm_eval";
    fn build(rng: &mut ChaCha8Rng) -> (BatchNorm2d<f64>, Tensor<f64>) {
        let (mut b, x) = BatchNormCase::build(rng);
        b.forward(&uniform(&[4, 3, 2, 2], -1.0, 3.0, rng), Mode::Train).unwrap();
        (b, x)
    }
    fn fresh<T: Real>(l: &BatchNorm2d<f64>) -> BatchNorm2d<T> {
        BatchNormCase::fresh(l)
    }
    fn loss<T: Real>(l: &BatchNorm2d<T>, x: &Tensor<T>) -> Result<f64> {
        Ok(project(&l.clone().forward(x, Mode::Eval)?.0))
    }
    fn grad<T: Real>(l: &BatchNorm2d<T>, x: &Tensor<T>) -> Result<(BatchNorm2d<T>, Tensor<T>)> {
        let (y, cache) = l.clone().forward(x, Mode::Eval)?;
        let mut g = l.zeros_like();
        let dx = l.backward(&cache, &projection(y.shape()), &mut g)?;
        Ok((g, dx))
    }
}

/// Inputs bounded away from the kink.
fn away_from_zero(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let m = rng.random_range(0.1..1.0);
        if rng.random_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

pub struct ReluCase;
impl Case for ReluCase {
    type Layer<T: Real> = NamedTensors<T>;
    const NAME: &'static str = "relu";
    fn build(rng: &mut ChaCha8Rng) -> (NamedTensors<f64>, Tensor<f64>) {
        (NamedTensors::default(), away_from_zero(&[2, 2, 3, 3], rng))
    }
    fn fresh<T: Real>(_: &NamedTensors<f64>) -> NamedTensors<T> {
        NamedTensors::default()
    }
    fn loss<T: Real>(_: &NamedTensors<T>, x: &Tensor<T>) -> Result<f64> {
        Ok(project(&relu(x)))
    }
    fn grad<T: Real>(_: &NamedTensors<T>, x: &Tensor<T>) -> Result<(NamedTensors<T>, Tensor<T>)> {
        Ok((NamedTensors::default(), relu_backward(x, &projection(x.shape()))?))
    }
}

pub struct MaxPoolCase;
impl Case for MaxPoolCase {
    type Layer<T: Real> = NamedTensors<T>;
    const NAME: &'static str = "maxpool";
    fn build(rng: &mut ChaCha8Rng) -> (NamedTensors<f64>, Tensor<f64>) {
        let n = 2 * 2 * 5 * 7;
        let mut values: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
        for i in (1..n).rev() {
            values.swap(i, rng.random_range(0..=i));
        }
        (NamedTensors::default(), Tensor::new(&[2, 2, 5, 7], values).unwrap())
    }
    fn fresh<T: Real>(_: &NamedTensors<f64>) -> NamedTensors<T> {
        NamedTensors::default()
    }
    fn loss<T: Real>(_: &NamedTensors<T>, x: &Tensor<T>) -> Result<f64> {
        Ok(project(&maxpool2d(x, (2, 2))?.0))
    }
    fn grad<T: Real>(_: &NamedTensors<T>, x: &Tensor<T>) -> Result<(NamedTensors<T>, Tensor<T>)> {
        let (y, cache) = maxpool2d(x, (2, 2))?;
        Ok((NamedTensors::default(), maxpool2d_backward(&cache, &projection(y.shape()))?))
    }
}

pub struct BlockCase;
impl Case for BlockCase {
    type Layer<T: Real> = BottleneckBlock<T>;
    const NAME: &'static str = "bottleneck_block";
    fn build(rng: &mut ChaCha8Rng) -> (BottleneckBlock<f64>, Tensor<f64>) {
        let mut b = BottleneckBlock::new(2, 4, 2, (2, 1), rng).unwrap();
        jitter(&mut b, 0.3, rng);
        (b, uniform(&[2, 2, 5, 4], -1.0, 1.0, rng))
    }
    fn fresh<T: Real>(l: &BottleneckBlock<f64>) -> BottleneckBlock<T> {
        let mut r = rng(0);
        fresh_by_cast(l, BottleneckBlock::new(2, 4, 2, (2, 1), &mut r).unwrap())
    }
    fn loss<T: Real>(l: &BottleneckBlock<T>, x: &Tensor<T>) -> Result<f64> {
        Ok(project(&l.clone().forward(x, Mode::Train)?.0))
    }
    fn grad<T: Real>(l: &BottleneckBlock<T>, x: &Tensor<T>) -> Result<(BottleneckBlock<T>, Tensor<T>)> {
        let (y, cache) = l.clone().forward(x, Mode::Train)?;
        let mut g = l.zeros_like();
        let dx = l.backward(&cache, &projection(y.shape()), &mut g)?;
        Ok((g, dx))
    }
}

pub struct LinearCase;
impl Case for LinearCase {
    type Layer<T: Real> = Linear<T>;
    const NAME: &'static str = "linear";
    fn build(rng: &mut ChaCha8Rng) -> (Linear<f64>, Tensor<f64>) {
        let mut l = Linear::new(3, 4, rng);
        jitter(&mut l, 0.2, rng);
        (l, uniform(&[5, 3], -1.0, 1.0, rng))
    }
    fn fresh<T: Real>(l: &Linear<f64>) -> Linear<T> {
        fresh_by_cast(l, Linear::new(3, 4, &mut rng(0)))
    }
    fn loss<T: Real>(l: &Linear<T>, x: &Tensor<T>) -> Result<f64> {
        Ok(project(&l.forward(x)?))
    }
    fn grad<T: Real>(l: &Linear<T>, x: &Tensor<T>) -> Result<(Linear<T>, Tensor<T>)> {
        let y = l.forward(x)?;
        let mut g = l.zeros_like();
        let dx = l.backward(x, &projection(y.shape()), &mut g)?;
        Ok((g, dx))
    }
}

pub struct LogSoftmaxCase;
impl Case for LogSoftmaxCase {
    type Layer<T: Real> = NamedTensors<T>;
    const NAME: &'static str = "log_softmax";
    fn build(rng: &mut ChaCha8Rng) -> (NamedTensors<f64>, Tensor<f64>) {
        (NamedTensors::default(), uniform(&[4, 5], -2.0, 2.0, rng))
    }
    fn fresh<T: Real>(_: &NamedTensors<f64>) -> NamedTensors<T> {
        NamedTensors::default()
    }
    fn loss<T: Real>(_: &NamedTensors<T>, x: &Tensor<T>) -> Result<f64> {
        Ok(project(&log_softmax(x)?))
    }
    fn grad<T: Real>(_: &NamedTensors<T>, x: &Tensor<T>) -> Result<(NamedTensors<T>, Tensor<T>)> {
        let y = log_softmax(x)?;
        Ok((NamedTensors::default(), log_softmax_backward(&y, &projection(y.shape()))?))
    }
}

const GRU_IN: usize = 3;
const GRU_HID: usize = 4;

pub struct GruStepCase;
impl Case for GruStepCase {
    type Layer<T: Real> = GruParams<T>;
    const NAME: &'static str = "gru_step";
    /// Input holds `x` followed by the previous state.
    fn build(rng: &mut ChaCha8Rng) -> (GruParams<f64>, Tensor<f64>) {
        let mut p = GruParams::new(GRU_IN, GRU_HID, rng);
        jitter(&mut p, 0.2, rng);
        (p, uniform(&[1, GRU_IN + GRU_HID], -1.0, 1.0, rng))
    }
    fn fresh<T: Real>(l: &GruParams<f64>) -> GruParams<T> {
        fresh_by_cast(l, GruParams::zeros(GRU_IN, GRU_HID))
    }
    fn loss<T: Real>(p: &GruParams<T>, x: &Tensor<T>) -> Result<f64> {
        let (xi, h) = x.data().split_at(GRU_IN);
        let out = gru_step(xi, h, p)?;
        Ok(project(&Tensor::new(&[1, GRU_HID], out)?))
    }
    fn grad<T: Real>(p: &GruParams<T>, x: &Tensor<T>) -> Result<(GruParams<T>, Tensor<T>)> {
        let (xi, h) = x.data().split_at(GRU_IN);
        let mut g = p.zeros_like();
        let d_h = projection::<T>(&[1, GRU_HID]);
        let (dx, dh) = gru_step_backward(xi, h, d_h.data(), p, &mut g)?;
        Ok((g, Tensor::new(x.shape(), [dx, dh].concat())?))
    }
}

pub struct GruSequenceCase;
impl Case for GruSequenceCase {
    type Layer<T: Real> = GruParams<T>;
    const NAME: &'static str = "gru_sequence";
    fn build(rng: &mut ChaCha8Rng) -> (GruParams<f64>, Tensor<f64>) {
        let mut p = GruParams::new(GRU_IN, GRU_HID, rng);
        jitter(&mut p, 0.2, rng);
        (p, uniform(&[6, GRU_IN], -1.0, 1.0, rng))
    }
    fn fresh<T: Real>(l: &GruParams<f64>) -> GruParams<T> {
        GruStepCase::fresh(l)
    }
    fn loss<T: Real>(p: &GruParams<T>, x: &Tensor<T>) -> Result<f64> {
        Ok(project(&gru_sequence(x, p, None)?.0))
    }
    fn grad<T: Real>(p: &GruParams<T>, x: &Tensor<T>) -> Result<(GruParams<T>, Tensor<T>)> {
        let (y, cache) = gru_sequence(x, p, None)?;
        let mut g = p.zeros_like();
        let (dx, _) = gru_sequence_backward(&cache, &projection(y.shape()), p, &mut g)?;
        Ok((g, dx))
    }
}

pub struct BiGruCase;
impl Case for BiGruCase {
    type Layer<T: Real> = BiGru<T>;
    const NAME: &'static str = "bigru";
    fn build(rng: &mut ChaCha8Rng) -> (BiGru<f64>, Tensor<f64>) {
        let mut b = BiGru::new(GRU_IN, 2, 2, rng);
        jitter(&mut b, 0.2, rng);
        (b, uniform(&[5, GRU_IN], -1.0, 1.0, rng))
    }
    fn fresh<T: Real>(l: &BiGru<f64>) -> BiGru<T> {
        fresh_by_cast(l, BiGru::new(GRU_IN, 2, 2, &mut rng(0)))
    }
    fn loss<T: Real>(b: &BiGru<T>, x: &Tensor<T>) -> Result<f64> {
        Ok(project(&b.forward(x)?.0))
    }
    fn grad<T: Real>(b: &BiGru<T>, x: &Tensor<T>) -> Result<(BiGru<T>, Tensor<T>)> {
        let (y, cache) = b.forward(x)?;
        let mut g = b.zeros_like();
        let dx = b.backward(&cache, &projection(y.shape()), &mut g)?;
        Ok((g, dx))
    }
}

const CTC_TARGET: [usize; 3] = [0, 1, 1];

pub struct CtcCase;
impl Case for CtcCase {
    type Layer<T: Real> = NamedTensors<T>;
    const NAME: &'static str = "ctc";
    /// Input is the pre-softmax logits.
    fn build(rng: &mut ChaCha8Rng) -> (NamedTensors<f64>, Tensor<f64>) {
        (NamedTensors::default(), uniform(&[7, 4], -2.0, 2.0, rng))
    }
    fn fresh<T: Real>(_: &NamedTensors<f64>) -> NamedTensors<T> {
        NamedTensors::default()
    }
    fn loss<T: Real>(_: &NamedTensors<T>, x: &Tensor<T>) -> Result<f64> {
        Ok(ctc_loss(&log_softmax(x)?, &CTC_TARGET)?.loss)
    }
    fn grad<T: Real>(_: &NamedTensors<T>, x: &Tensor<T>) -> Result<(NamedTensors<T>, Tensor<T>)> {
        Ok((NamedTensors::default(), ctc_loss(&log_softmax(x)?, &CTC_TARGET)?.grad))
    }
}

pub fn micro_config() -> ModelConfig {
    ModelConfig {
        encoder: EncoderConfig {
            channels: vec![2; 5],
            ..EncoderConfig::default()
        },
        gru_layers: 2,
        gru_hidden: 2,
        vocab_size: 3,
    }
}

pub const MICRO_WIDTHS: [usize; 2] = [32, 28];

pub fn micro_targets() -> Vec<Vec<usize>> {
    vec![vec![0, 1, 2], vec![2, 2]]
}

pub struct MicroModelCase;
impl Case for MicroModelCase {
    type Layer<T: Real> = Model<T>;
    const NAME: &'static str = "micro_model";
    const INPUT: bool = false;
    fn build(rng: &mut ChaCha8Rng) -> (Model<f64>, Tensor<f64>) {
        let mut m = Model::new(micro_config(), rng).unwrap();
        jitter(&mut m, 0.3, rng);
        (m, uniform(&[2, 1, 128, 32], 0.0, 1.0, rng))
    }
    fn fresh<T: Real>(l: &Model<f64>) -> Model<T> {
        fresh_by_cast(l, Model::new(micro_config(), &mut rng(0)).unwrap())
    }
    fn loss<T: Real>(m: &Model<T>, x: &Tensor<T>) -> Result<f64> {
        let (out, _) = m.clone().forward(x, &MICRO_WIDTHS, Mode::Train)?;
        let mut total = 0.0;
        for (i, t) in micro_targets().iter().enumerate() {
            total += ctc_loss(&out.item(i), t)?.loss;
        }
        Ok(total / MICRO_WIDTHS.len() as f64)
    }
    fn grad<T: Real>(m: &Model<T>, x: &Tensor<T>) -> Result<(Model<T>, Tensor<T>)> {
        let r = m.clone().loss_and_grad(x, &MICRO_WIDTHS, &micro_targets(), Mode::Train)?;
        Ok((r.grad, x.zeros_like()))
    }
}

/// Every case, in a fixed order.
pub fn gradient_suite() -> Vec<CaseReport> {
    vec![
        run_case::<ConvCase>(1),
        run_case::<PointwiseConvCase>(2),
        run_case::<BatchNormCase>(3),
        run_case::<BatchNormEvalCase>(4),
        run_case::<ReluCase>(5),
        run_case::<MaxPoolCase>(6),
        run_case::<BlockCase>(7),
        run_case::<LinearCase>(8),
        run_case::<LogSoftmaxCase>(9),
        run_case::<GruStepCase>(10),
        run_case::<GruSequenceCase>(11),
        run_case::<BiGruCase>(12),
        run_case::<CtcCase>(13),
        run_case::<MicroModelCase>(14),
    ]
}
