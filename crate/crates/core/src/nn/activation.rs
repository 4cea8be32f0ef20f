use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient passes where the forward input was strictly positive.
pub fn relu_backward<T: Real>(x: &Tensor<T>, d_out: &Tensor<T>) -> Result<Tensor<T>> {
    x.zip_map(d_out, "relu_backward", |v, g| if v > T::zero() { g } else { T::zero() })
}

fn rows<T: Real>(x: &Tensor<T>) -> Result<usize> {
    match x.shape().last() {
        Some(&v) if v > 0 => Ok(v),
        _ => Err(Error::Dimension(format!(
            "log_softmax needs a non-empty last axis, got {:?}",
            x.shape()
        ))),
    }
}

/// Row-wise log-softmax over the last axis, stabilized by max subtraction.
pub fn log_softmax<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let v = rows(x)?;
    let mut out = x.clone();
    for row in out.data_mut().chunks_mut(v) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + row.iter().map(|&a| (a - max).exp()).sum::<T>().ln();
        row.iter_mut().for_each(|a| *a -= lse);
    }
    Ok(out)
}

/// Backward of [`log_softmax`] given its output `y`.
pub fn log_softmax_backward<T: Real>(y: &Tensor<T>, d_out: &Tensor<T>) -> Result<Tensor<T>> {
    let v = rows(y)?;
    if y.shape() != d_out.shape() {
        return Err(Error::Dimension("log_softmax gradient shape mismatch".into()));
    }
    let mut dx = d_out.clone();
    for (dr, yr) in dx.data_mut().chunks_mut(v).zip(y.data().chunks(v)) {
        let s: T = dr.iter().copied().sum();
        for (d, &l) in dr.iter_mut().zip(yr) {
            *d -= l.exp() * s;
        }
    }
    Ok(dx)
}
