use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{join, ParamKind, Parameters};
use crate::tensor::{gemm, Real, Tensor};

/// Affine map `y = x·W + b` applied to the last axis.
#[derive(Clone, Debug)]
pub struct Linear<T: Real> {
    /// (d_in, d_out)
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Linear<T> {
    /// Uniform ±sqrt(1/fan_in) initialization for both weight and bias.
    pub fn new(d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        let bound = (1.0 / d_in as f64).sqrt();
        Linear {
            weight: Tensor::from_fn(&[d_in, d_out], |_| T::of(rng.random_range(-bound..bound))),
            bias: Tensor::from_fn(&[d_out], |_| T::of(rng.random_range(-bound..bound))),
        }
    }

    pub fn d_in(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn d_out(&self) -> usize {
        self.weight.shape()[1]
    }

    fn rows(&self, x: &Tensor<T>) -> Result<usize> {
        match x.shape().last() {
            Some(&d) if d == self.d_in() => Ok(x.len() / d),
            _ => Err(Error::Dimension(format!(
                "linear expects [*, {}], got {:?}",
                self.d_in(),
                x.shape()
            ))),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let m = self.rows(x)?;
        let (k, n) = (self.d_in(), self.d_out());
        let mut shape = x.shape().to_vec();
        *shape.last_mut().unwrap() = n;
        let mut out = Tensor::zeros(&shape);
        for row in out.data_mut().chunks_mut(n) {
            row.copy_from_slice(self.bias.data());
        }
        gemm(false, false, m, n, k, T::one(), x.data(), self.weight.data(), T::one(), out.data_mut());
        Ok(out)
    }

    pub fn backward(&self, x: &Tensor<T>, d_out: &Tensor<T>, grad: &mut Self) -> Result<Tensor<T>> {
        let m = self.rows(x)?;
        let (k, n) = (self.d_in(), self.d_out());
        if d_out.len() != m * n {
            return Err(Error::Dimension("linear gradient shape mismatch".into()));
        }
        gemm(true, false, k, n, m, T::one(), x.data(), d_out.data(), T::one(), grad.weight.data_mut());
        for row in d_out.data().chunks(n) {
            for (b, &g) in grad.bias.data_mut().iter_mut().zip(row) {
                *b += g;
            }
        }
        let mut dx = Tensor::zeros(x.shape());
        gemm(false, true, m, k, n, T::one(), d_out.data(), self.weight.data(), T::zero(), dx.data_mut());
        Ok(dx)
    }
}

impl<T: Real> Parameters<T> for Linear<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &Tensor<T>)) {
        f(&join(prefix, "weight"), ParamKind::Weight, &self.weight);
        f(&join(prefix, "bias"), ParamKind::Weight, &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &mut Tensor<T>)) {
        f(&join(prefix, "weight"), ParamKind::Weight, &mut self.weight);
        f(&join(prefix, "bias"), ParamKind::Weight, &mut self.bias);
    }
}
