use crate::error::{Error, Result};
use crate::nn::Mode;
use crate::params::{join, ParamKind, Parameters};
use crate::tensor::{Real, Tensor};

pub const BN_EPS: f64 = 1e-5;
/// Weight of the previous running statistic in each update.
pub const BN_MOMENTUM: f64 = 0.9;

/// Per-channel batch normalization over (N, H, W).
#[derive(Clone, Debug)]
pub struct BatchNorm2d<T: Real> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct BatchNormCache<T: Real> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
    mode: Mode,
}

impl<T: Real> BatchNorm2d<T> {
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            gamma: Tensor::full(&[channels], T::one()),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn dims(&self, x: &Tensor<T>) -> Result<(usize, usize, usize)> {
        match *x.shape() {
            [n, c, h, w] if c == self.channels() => Ok((n, c, h * w)),
            _ => Err(Error::Dimension(format!(
                "batchnorm expects [N, {}, H, W], got {:?}",
                self.channels(),
                x.shape()
            ))),
        }
    }

    /// Train mode normalizes with batch statistics and folds them into the
    /// running estimates; eval mode uses the running estimates.
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, BatchNormCache<T>)> {
        let (n, c, hw) = self.dims(x)?;
        let count = n * hw;
        if count == 0 {
            return Err(Error::EmptyBatch(x.shape().to_vec()));
        }
        let data = x.data();
        let mut xhat = Tensor::zeros(x.shape());
        let mut out = Tensor::zeros(x.shape());
        let mut inv_std = vec![T::zero(); c];
        let eps = T::of(BN_EPS);
        let momentum = T::of(BN_MOMENTUM);
        for ch in 0..c {
            let plane = |b: usize| (b * c + ch) * hw..(b * c + ch + 1) * hw;
            let (mean, var) = match mode {
                Mode::Train => {
                    let total = count as f64;
                    let mean64 = (0..n).flat_map(|b| data[plane(b)].iter()).map(|v| v.as_f64()).sum::<f64>() / total;
                    let var64 = (0..n)
                        .flat_map(|b| data[plane(b)].iter())
                        .map(|v| (v.as_f64() - mean64).powi(2))
                        .sum::<f64>()
                        / total;
                    let (mean, var) = (T::of(mean64), T::of(var64));
                    let rm = &mut self.running_mean.data_mut()[ch];
                    *rm = momentum * *rm + (T::one() - momentum) * mean;
                    let rv = &mut self.running_var.data_mut()[ch];
                    *rv = momentum * *rv + (T::one() - momentum) * var;
                    (mean, var)
                }
                Mode::Eval => (self.running_mean.data()[ch], self.running_var.data()[ch]),
            };
            let is = T::one() / (var + eps).sqrt();
            inv_std[ch] = is;
            let (g, bt) = (self.gamma.data()[ch], self.beta.data()[ch]);
            for b in 0..n {
                let r = plane(b);
                for i in r {
                    let xh = (data[i] - mean) * is;
                    xhat.data_mut()[i] = xh;
                    out.data_mut()[i] = g * xh + bt;
                }
            }
        }
        Ok((out, BatchNormCache { xhat, inv_std, mode }))
    }

    pub fn backward(&self, cache: &BatchNormCache<T>, d_out: &Tensor<T>, grad: &mut Self) -> Result<Tensor<T>> {
        let (n, c, hw) = self.dims(d_out)?;
        if d_out.shape() != cache.xhat.shape() {
            return Err(Error::Dimension("batchnorm gradient shape mismatch".into()));
        }
        let count = (n * hw) as f64;
        let dy = d_out.data();
        let xhat = cache.xhat.data();
        let mut dx = Tensor::zeros(d_out.shape());
        for ch in 0..c {
            let idx = || (0..n).flat_map(move |b| (b * c + ch) * hw..(b * c + ch + 1) * hw);
            let sum_dy: f64 = idx().map(|i| dy[i].as_f64()).sum();
            let sum_dy_xhat: f64 = idx().map(|i| dy[i].as_f64() * xhat[i].as_f64()).sum();
            grad.gamma.data_mut()[ch] += T::of(sum_dy_xhat);
            grad.beta.data_mut()[ch] += T::of(sum_dy);
            let g = self.gamma.data()[ch];
            let is = cache.inv_std[ch];
            match cache.mode {
                Mode::Train => {
                    let k = g.as_f64() * is.as_f64() / count;
                    for i in idx() {
                        let v = count * dy[i].as_f64() - sum_dy - xhat[i].as_f64() * sum_dy_xhat;
                        dx.data_mut()[i] = T::of(k * v);
                    }
                }
                Mode::Eval => {
                    for i in idx() {
                        dx.data_mut()[i] = g * is * dy[i];
                    }
                }
            }
        }
        Ok(dx)
    }
}

impl<T: Real> Parameters<T> for BatchNorm2d<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &Tensor<T>)) {
        f(&join(prefix, "gamma"), ParamKind::Weight, &self.gamma);
        f(&join(prefix, "beta"), ParamKind::Weight, &self.beta);
        f(&join(prefix, "running_mean"), ParamKind::Buffer, &self.running_mean);
        f(&join(prefix, "running_var"), ParamKind::Buffer, &self.running_var);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &mut Tensor<T>)) {
        f(&join(prefix, "gamma"), ParamKind::Weight, &mut self.gamma);
        f(&join(prefix, "beta"), ParamKind::Weight, &mut self.beta);
        f(&join(prefix, "running_mean"), ParamKind::Buffer, &mut self.running_mean);
        f(&join(prefix, "running_var"), ParamKind::Buffer, &mut self.running_var);
    }
}
