//! Gated recurrent units and the two-layer bidirectional stack.
//!
//! Cell convention (reset applied to the state before the hidden matmul):
//!
//! ```text
//! z  = σ(x·W_z + h·U_z + b_z)
//! r  = σ(x·W_r + h·U_r + b_r)
//! h̃  = tanh(x·W_h + (r ⊙ h)·U_h + b_h)
//! h' = (1 − z) ⊙ h + z ⊙ h̃
//! ```

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{join, ParamKind, Parameters};
use crate::tensor::{gemm, Real, Tensor};

#[derive(Clone, Debug)]
pub struct GruParams<T: Real> {
    /// (d_in, hidden)
    pub w_z: Tensor<T>,
    pub w_r: Tensor<T>,
    pub w_h: Tensor<T>,
    /// (hidden, hidden)
    pub u_z: Tensor<T>,
    pub u_r: Tensor<T>,
    pub u_h: Tensor<T>,
    pub b_z: Tensor<T>,
    pub b_r: Tensor<T>,
    pub b_h: Tensor<T>,
}

impl<T: Real> GruParams<T> {
    pub fn zeros(d_in: usize, hidden: usize) -> Self {
        let w = || Tensor::zeros(&[d_in, hidden]);
        let u = || Tensor::zeros(&[hidden, hidden]);
        let b = || Tensor::zeros(&[hidden]);
        GruParams {
            w_z: w(),
            w_r: w(),
            w_h: w(),
            u_z: u(),
            u_r: u(),
            u_h: u(),
            b_z: b(),
            b_r: b(),
            b_h: b(),
        }
    }

    /// Uniform ±sqrt(1/hidden) for every block.
    pub fn new(d_in: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(d_in, hidden);
        let bound = (1.0 / hidden as f64).sqrt();
        p.visit_mut("", &mut |_, _, t| {
            for v in t.data_mut() {
                *v = T::of(rng.random_range(-bound..bound));
            }
        });
        p
    }

    pub fn d_in(&self) -> usize {
        self.w_z.shape()[0]
    }

    pub fn hidden(&self) -> usize {
        self.w_z.shape()[1]
    }
}

impl<T: Real> Parameters<T> for GruParams<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &Tensor<T>)) {
        for (name, t) in [
            ("w_z", &self.w_z),
            ("w_r", &self.w_r),
            ("w_h", &self.w_h),
            ("u_z", &self.u_z),
            ("u_r", &self.u_r),
            ("u_h", &self.u_h),
            ("b_z", &self.b_z),
            ("b_r", &self.b_r),
            ("b_h", &self.b_h),
        ] {
            f(&join(prefix, name), ParamKind::Weight, t);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &mut Tensor<T>)) {
        for (name, t) in [
            ("w_z", &mut self.w_z),
            ("w_r", &mut self.w_r),
            ("w_h", &mut self.w_h),
            ("u_z", &mut self.u_z),
            ("u_r", &mut self.u_r),
            ("u_h", &mut self.u_h),
            ("b_z", &mut self.b_z),
            ("b_r", &mut self.b_r),
            ("b_h", &mut self.b_h),
        ] {
            f(&join(prefix, name), ParamKind::Weight, t);
        }
    }
}

fn sigmoid<T: Real>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

/// Everything the backward pass needs from one left-to-right scan.
#[derive(Clone, Debug)]
pub struct GruCache<T: Real> {
    xs: Tensor<T>,
    /// Row t holds the state entering step t.
    h_prev: Tensor<T>,
    z: Tensor<T>,
    r: Tensor<T>,
    cand: Tensor<T>,
}

/// `xs·W + b` for every row.
fn project<T: Real>(xs: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Vec<T> {
    let (t, d) = (xs.shape()[0], xs.shape()[1]);
    let h = w.shape()[1];
    let mut out: Vec<T> = b.data().iter().copied().cycle().take(t * h).collect();
    gemm(false, false, t, h, d, T::one(), xs.data(), w.data(), T::one(), &mut out);
    out
}

/// Runs the cell left-to-right over `xs` (`[T, d_in]`) from `h0` (zeros if `None`).
pub fn gru_sequence<T: Real>(
    xs: &Tensor<T>,
    p: &GruParams<T>,
    h0: Option<&[T]>,
) -> Result<(Tensor<T>, GruCache<T>)> {
    let [steps, d] = *xs.shape() else {
        return Err(Error::Dimension(format!("gru expects [T, D], got {:?}", xs.shape())));
    };
    if d != p.d_in() {
        return Err(Error::Dimension(format!("gru input width {d} != {}", p.d_in())));
    }
    if steps == 0 {
        return Err(Error::EmptySequence);
    }
    let hid = p.hidden();
    let mut h: Vec<T> = match h0 {
        Some(v) if v.len() == hid => v.to_vec(),
        Some(v) => return Err(Error::Dimension(format!("initial state of {} for hidden {hid}", v.len()))),
        None => vec![T::zero(); hid],
    };
    let xz = project(xs, &p.w_z, &p.b_z);
    let xr = project(xs, &p.w_r, &p.b_r);
    let xh = project(xs, &p.w_h, &p.b_h);

    let mut out = Tensor::zeros(&[steps, hid]);
    let mut h_prev = Tensor::zeros(&[steps, hid]);
    let mut z = Tensor::zeros(&[steps, hid]);
    let mut r = Tensor::zeros(&[steps, hid]);
    let mut cand = Tensor::zeros(&[steps, hid]);
    let mut az = vec![T::zero(); hid];
    let mut ar = vec![T::zero(); hid];
    let mut ah = vec![T::zero(); hid];
    let mut rh = vec![T::zero(); hid];
    for t in 0..steps {
        let row = t * hid..(t + 1) * hid;
        h_prev.data_mut()[row.clone()].copy_from_slice(&h);
        az.copy_from_slice(&xz[row.clone()]);
        ar.copy_from_slice(&xr[row.clone()]);
        gemm(false, false, 1, hid, hid, T::one(), &h, p.u_z.data(), T::one(), &mut az);
        gemm(false, false, 1, hid, hid, T::one(), &h, p.u_r.data(), T::one(), &mut ar);
        for j in 0..hid {
            az[j] = sigmoid(az[j]);
            ar[j] = sigmoid(ar[j]);
            rh[j] = ar[j] * h[j];
        }
        ah.copy_from_slice(&xh[row.clone()]);
        gemm(false, false, 1, hid, hid, T::one(), &rh, p.u_h.data(), T::one(), &mut ah);
        for j in 0..hid {
            ah[j] = ah[j].tanh();
            h[j] = (T::one() - az[j]) * h[j] + az[j] * ah[j];
        }
        z.data_mut()[row.clone()].copy_from_slice(&az);
        r.data_mut()[row.clone()].copy_from_slice(&ar);
        cand.data_mut()[row.clone()].copy_from_slice(&ah);
        out.data_mut()[row].copy_from_slice(&h);
    }
    Ok((
        out,
        GruCache {
            xs: xs.clone(),
            h_prev,
            z,
            r,
            cand,
        },
    ))
}

/// Backward-through-time. Accumulates parameter gradients into `grad` and
/// returns `(d_xs, d_h0)`.
pub fn gru_sequence_backward<T: Real>(
    cache: &GruCache<T>,
    d_out: &Tensor<T>,
    p: &GruParams<T>,
    grad: &mut GruParams<T>,
) -> Result<(Tensor<T>, Vec<T>)> {
    let [steps, d] = *cache.xs.shape() else {
        unreachable!("cache holds a matrix");
    };
    let hid = p.hidden();
    if d_out.shape() != [steps, hid] {
        return Err(Error::Dimension(format!(
            "gru output gradient {:?} != [{steps}, {hid}]",
            d_out.shape()
        )));
    }
    let mut daz = vec![T::zero(); steps * hid];
    let mut dar = vec![T::zero(); steps * hid];
    let mut dah = vec![T::zero(); steps * hid];
    let mut rh = vec![T::zero(); steps * hid];
    let mut carry = vec![T::zero(); hid];
    let mut dh = vec![T::zero(); hid];
    let mut drh = vec![T::zero(); hid];
    for t in (0..steps).rev() {
        let row = t * hid..(t + 1) * hid;
        let hp = &cache.h_prev.data()[row.clone()];
        let z = &cache.z.data()[row.clone()];
        let r = &cache.r.data()[row.clone()];
        let c = &cache.cand.data()[row.clone()];
        for j in 0..hid {
            dh[j] = d_out.data()[t * hid + j] + carry[j];
        }
        for j in 0..hid {
            let k = t * hid + j;
            dah[k] = dh[j] * z[j] * (T::one() - c[j] * c[j]);
            rh[k] = r[j] * hp[j];
        }
        gemm(false, true, 1, hid, hid, T::one(), &dah[row.clone()], p.u_h.data(), T::zero(), &mut drh);
        for j in 0..hid {
            let k = t * hid + j;
            let dz = dh[j] * (c[j] - hp[j]);
            daz[k] = dz * z[j] * (T::one() - z[j]);
            dar[k] = drh[j] * hp[j] * r[j] * (T::one() - r[j]);
            carry[j] = dh[j] * (T::one() - z[j]) + drh[j] * r[j];
        }
        gemm(false, true, 1, hid, hid, T::one(), &daz[row.clone()], p.u_z.data(), T::one(), &mut carry);
        gemm(false, true, 1, hid, hid, T::one(), &dar[row], p.u_r.data(), T::one(), &mut carry);
    }

    let xs = cache.xs.data();
    let hp = cache.h_prev.data();
    let one = T::one();
    for (gw, gu, gb, da, state) in [
        (&mut grad.w_z, &mut grad.u_z, &mut grad.b_z, &daz, hp),
        (&mut grad.w_r, &mut grad.u_r, &mut grad.b_r, &dar, hp),
        (&mut grad.w_h, &mut grad.u_h, &mut grad.b_h, &dah, &rh[..]),
    ] {
        gemm(true, false, d, hid, steps, one, xs, da, one, gw.data_mut());
        gemm(true, false, hid, hid, steps, one, state, da, one, gu.data_mut());
        for row in da.chunks(hid) {
            for (b, &g) in gb.data_mut().iter_mut().zip(row) {
                *b += g;
            }
        }
    }
    let mut dx = Tensor::zeros(&[steps, d]);
    gemm(false, true, steps, d, hid, one, &daz, p.w_z.data(), T::zero(), dx.data_mut());
    gemm(false, true, steps, d, hid, one, &dar, p.w_r.data(), one, dx.data_mut());
    gemm(false, true, steps, d, hid, one, &dah, p.w_h.data(), one, dx.data_mut());
    Ok((dx, carry))
}

/// One cell update.
pub fn gru_step<T: Real>(x: &[T], h_prev: &[T], p: &GruParams<T>) -> Result<Vec<T>> {
    let xs = Tensor::new(&[1, x.len()], x.to_vec())?;
    Ok(gru_sequence(&xs, p, Some(h_prev))?.0.into_data())
}

/// Backward of [`gru_step`]: returns `(d_x, d_h_prev)`.
pub fn gru_step_backward<T: Real>(
    x: &[T],
    h_prev: &[T],
    d_h: &[T],
    p: &GruParams<T>,
    grad: &mut GruParams<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    let xs = Tensor::new(&[1, x.len()], x.to_vec())?;
    let (_, cache) = gru_sequence(&xs, p, Some(h_prev))?;
    let dy = Tensor::new(&[1, d_h.len()], d_h.to_vec())?;
    let (dx, dh) = gru_sequence_backward(&cache, &dy, p, grad)?;
    Ok((dx.into_data(), dh))
}

fn reverse_rows<T: Real>(t: &Tensor<T>) -> Tensor<T> {
    let w = t.shape()[1];
    let data: Vec<T> = t.data().chunks(w).rev().flatten().copied().collect();
    Tensor::new(t.shape(), data).expect("same shape")
}

#[derive(Clone, Debug)]
pub struct BiGruLayer<T: Real> {
    pub forward: GruParams<T>,
    pub backward: GruParams<T>,
}

/// Stack of bidirectional layers; each emits `[T, 2H]` (forward half first).
#[derive(Clone, Debug)]
pub struct BiGru<T: Real> {
    pub layers: Vec<BiGruLayer<T>>,
}

#[derive(Clone, Debug)]
pub struct BiGruCache<T: Real> {
    layers: Vec<(GruCache<T>, GruCache<T>)>,
}

impl<T: Real> BiGru<T> {
    pub fn new(d_in: usize, hidden: usize, num_layers: usize, rng: &mut impl Rng) -> Self {
        let layers = (0..num_layers)
            .map(|i| {
                let d = if i == 0 { d_in } else { 2 * hidden };
                BiGruLayer {
                    forward: GruParams::new(d, hidden, rng),
                    backward: GruParams::new(d, hidden, rng),
                }
            })
            .collect();
        BiGru { layers }
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].forward.hidden()
    }

    pub fn output_dim(&self) -> usize {
        2 * self.hidden()
    }

    pub fn forward(&self, xs: &Tensor<T>) -> Result<(Tensor<T>, BiGruCache<T>)> {
        let mut cur = xs.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (fwd, fc) = gru_sequence(&cur, &layer.forward, None)?;
            let (bwd_rev, bc) = gru_sequence(&reverse_rows(&cur), &layer.backward, None)?;
            let bwd = reverse_rows(&bwd_rev);
            let h = layer.forward.hidden();
            let steps = cur.shape()[0];
            let mut out = Tensor::zeros(&[steps, 2 * h]);
            for t in 0..steps {
                let dst = &mut out.data_mut()[t * 2 * h..(t + 1) * 2 * h];
                dst[..h].copy_from_slice(&fwd.data()[t * h..(t + 1) * h]);
                dst[h..].copy_from_slice(&bwd.data()[t * h..(t + 1) * h]);
            }
            caches.push((fc, bc));
            cur = out;
        }
        Ok((cur, BiGruCache { layers: caches }))
    }

    pub fn backward(&self, cache: &BiGruCache<T>, d_out: &Tensor<T>, grad: &mut Self) -> Result<Tensor<T>> {
        let mut d = d_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let h = layer.forward.hidden();
            let steps = d.shape()[0];
            let mut d_fwd = Tensor::zeros(&[steps, h]);
            let mut d_bwd = Tensor::zeros(&[steps, h]);
            for t in 0..steps {
                let src = &d.data()[t * 2 * h..(t + 1) * 2 * h];
                d_fwd.data_mut()[t * h..(t + 1) * h].copy_from_slice(&src[..h]);
                d_bwd.data_mut()[t * h..(t + 1) * h].copy_from_slice(&src[h..]);
            }
            let (fc, bc) = &cache.layers[i];
            let g = &mut grad.layers[i];
            let (mut dx, _) = gru_sequence_backward(fc, &d_fwd, &layer.forward, &mut g.forward)?;
            let (dx_rev, _) = gru_sequence_backward(bc, &reverse_rows(&d_bwd), &layer.backward, &mut g.backward)?;
            dx.accumulate(&reverse_rows(&dx_rev))?;
            d = dx;
        }
        Ok(d)
    }
}

impl<T: Real> Parameters<T> for BiGru<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &Tensor<T>)) {
        for (i, l) in self.layers.iter().enumerate() {
            l.forward.visit(&join(prefix, &format!("layer{i}.fwd")), f);
            l.backward.visit(&join(prefix, &format!("layer{i}.bwd")), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &mut Tensor<T>)) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.forward.visit_mut(&join(prefix, &format!("layer{i}.fwd")), f);
            l.backward.visit_mut(&join(prefix, &format!("layer{i}.bwd")), f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_give_zero_state() {
        let p = GruParams::<f64>::zeros(3, 4);
        assert_eq!(gru_step(&[1.0, -2.0, 0.5], &[0.0; 4], &p).unwrap(), vec![0.0; 4]);
        let xs = Tensor::from_fn(&[6, 3], |i| i as f64);
        let (out, _) = gru_sequence(&xs, &p, None).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_update_gate_keeps_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = GruParams::<f64>::new(3, 4, &mut rng);
        p.b_z.fill(-1e6);
        let h = [0.3, -0.7, 0.1, 0.9];
        let out = gru_step(&[5.0, -5.0, 2.0], &h, &p).unwrap();
        for (a, b) in out.iter().zip(&h) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn single_step_sequence_equals_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = GruParams::<f64>::new(3, 5, &mut rng);
        let x = [0.2, -0.4, 0.9];
        let (seq, _) = gru_sequence(&Tensor::new(&[1, 3], x.to_vec()).unwrap(), &p, None).unwrap();
        assert_eq!(seq.data(), &gru_step(&x, &[0.0; 5], &p).unwrap()[..]);
    }

    #[test]
    fn state_stays_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = GruParams::<f64>::new(4, 6, &mut rng).zeros_like();
        let mut p2 = p.clone();
        p2.visit_mut("", &mut |_, _, t| t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-4.0..4.0)));
        let xs = Tensor::from_fn(&[30, 4], |_| rng.random_range(-10.0..10.0));
        let (out, _) = gru_sequence(&xs, &p2, None).unwrap();
        assert!(out.data().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let p = GruParams::<f32>::zeros(2, 2);
        assert!(matches!(gru_sequence(&Tensor::zeros(&[0, 2]), &p, None), Err(Error::EmptySequence)));
    }

    #[test]
    fn backward_half_is_reversed_forward_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params = GruParams::<f64>::new(3, 4, &mut rng);
        let net = BiGru {
            layers: vec![BiGruLayer {
                forward: params.clone(),
                backward: params.clone(),
            }],
        };
        let xs = Tensor::from_fn(&[7, 3], |_| rng.random_range(-1.0..1.0));
        let (out, _) = net.forward(&xs).unwrap();
        let (rev, _) = gru_sequence(&reverse_rows(&xs), &params, None).unwrap();
        let rev = reverse_rows(&rev);
        for t in 0..7 {
            assert_eq!(&out.data()[t * 8 + 4..t * 8 + 8], &rev.data()[t * 4..t * 4 + 4]);
        }
    }

    #[test]
    fn stack_output_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = BiGru::<f32>::new(20, 256, 2, &mut rng);
        let (out, _) = net.forward(&Tensor::zeros(&[5, 20])).unwrap();
        assert_eq!(out.shape(), &[5, 512]);
        assert_eq!(net.layers[1].forward.d_in(), 512);
    }
}
