use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Non-overlapping max-pooling. Trailing rows/columns that do not fill a
/// whole window are dropped, so the output extent is `floor(H/p_h)` by
/// `floor(W/p_w)`.
#[derive(Clone, Debug)]
pub struct PoolCache {
    input_shape: Vec<usize>,
    /// Flat input index of the maximum for every output element.
    argmax: Vec<usize>,
}

pub fn maxpool2d<T: Real>(x: &Tensor<T>, window: (usize, usize)) -> Result<(Tensor<T>, PoolCache)> {
    let [n, c, h, w] = *x.shape() else {
        return Err(Error::Dimension(format!("maxpool2d expects [N, C, H, W], got {:?}", x.shape())));
    };
    let (ph, pw) = window;
    if ph == 0 || pw == 0 {
        return Err(Error::Config("pool window must be positive".into()));
    }
    let (oh, ow) = (h / ph, w / pw);
    let mut out = Tensor::zeros(&[n, c, oh, ow]);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    let data = x.data();
    let mut o = 0;
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * ph * w + ox * pw;
                for i in 0..ph {
                    for j in 0..pw {
                        let idx = base + (oy * ph + i) * w + ox * pw + j;
                        // strict comparison keeps the first maximum in row-major order
                        if data[idx] > data[best] {
                            best = idx;
                        }
                    }
                }
                out.data_mut()[o] = data[best];
                argmax.push(best);
                o += 1;
            }
        }
    }
    Ok((
        out,
        PoolCache {
            input_shape: x.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn maxpool2d_backward<T: Real>(cache: &PoolCache, d_out: &Tensor<T>) -> Result<Tensor<T>> {
    if d_out.len() != cache.argmax.len() {
        return Err(Error::Dimension("maxpool gradient size mismatch".into()));
    }
    let mut dx = Tensor::zeros(&cache.input_shape);
    for (&src, &g) in cache.argmax.iter().zip(d_out.data()) {
        dx.data_mut()[src] += g;
    }
    Ok(dx)
}
