//! Connectionist Temporal Classification.
//!
//! Inputs are `[T, C]` per-frame log-probabilities where the last class
//! `C - 1` is the blank. The forward–backward recursion runs in log space
//! (f64) over the blank-interleaved label sequence of length `2L + 1`.

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Largest path count [`ctc_brute_force`] will enumerate.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

#[derive(Clone, Debug)]
pub struct CtcOutput<T: Real> {
    /// Negative log-likelihood of the target.
    pub loss: f64,
    /// Gradient of `loss` with respect to the pre-softmax logits:
    /// `softmax − γ`, where γ is the per-frame symbol posterior.
    pub grad: Tensor<T>,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn dims<T: Real>(log_probs: &Tensor<T>) -> Result<(usize, usize)> {
    match *log_probs.shape() {
        [t, c] if c >= 1 => Ok((t, c)),
        _ => Err(Error::Dimension(format!(
            "ctc expects [T, C] log-probabilities, got {:?}",
            log_probs.shape()
        ))),
    }
}

/// Frames needed to emit `target`: one per label plus a blank between
/// each pair of equal neighbours.
pub fn min_frames(target: &[usize]) -> usize {
    target.len() + target.windows(2).filter(|w| w[0] == w[1]).count()
}

fn check_labels(target: &[usize], classes: usize) -> Result<()> {
    let blank = classes - 1;
    match target.iter().find(|&&l| l >= blank) {
        Some(&label) => Err(Error::InvalidLabel { label, classes, blank }),
        None => Ok(()),
    }
}

/// Log-space α and β lattices, `[T][2L+1]`. β excludes the emission at its
/// own frame so that `α_t(s) + β_t(s)` is the log-mass of paths through `(t, s)`.
pub(crate) struct Lattice {
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub ext: Vec<usize>,
    pub log_likelihood: f64,
}

pub(crate) fn lattice<T: Real>(log_probs: &Tensor<T>, target: &[usize]) -> Result<Lattice> {
    let (frames, classes) = dims(log_probs)?;
    check_labels(target, classes)?;
    let required = min_frames(target);
    if frames < required || frames == 0 {
        return Err(Error::InfeasibleTarget {
            frames,
            target_len: target.len(),
            required: required.max(1),
        });
    }
    let blank = classes - 1;
    let lp = |t: usize, k: usize| log_probs.data()[t * classes + k].as_f64();
    let mut ext = Vec::with_capacity(2 * target.len() + 1);
    ext.push(blank);
    for &l in target {
        ext.push(l);
        ext.push(blank);
    }
    let s_len = ext.len();
    // skip transition s-2 -> s allowed only onto a label differing from s-2
    let can_skip = |s: usize| s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];

    let ninf = f64::NEG_INFINITY;
    let mut alpha = vec![vec![ninf; s_len]; frames];
    alpha[0][0] = lp(0, blank);
    if s_len > 1 {
        alpha[0][1] = lp(0, ext[1]);
    }
    for t in 1..frames {
        for s in 0..s_len {
            let mut a = alpha[t - 1][s];
            if s >= 1 {
                a = log_add(a, alpha[t - 1][s - 1]);
            }
            if can_skip(s) {
                a = log_add(a, alpha[t - 1][s - 2]);
            }
            alpha[t][s] = if a == ninf { ninf } else { a + lp(t, ext[s]) };
        }
    }

    let mut beta = vec![vec![ninf; s_len]; frames];
    beta[frames - 1][s_len - 1] = 0.0;
    if s_len > 1 {
        beta[frames - 1][s_len - 2] = 0.0;
    }
    for t in (0..frames - 1).rev() {
        for s in 0..s_len {
            let mut b = beta[t + 1][s] + lp(t + 1, ext[s]);
            if s + 1 < s_len {
                b = log_add(b, beta[t + 1][s + 1] + lp(t + 1, ext[s + 1]));
            }
            if s + 2 < s_len && can_skip(s + 2) {
                b = log_add(b, beta[t + 1][s + 2] + lp(t + 1, ext[s + 2]));
            }
            beta[t][s] = b;
        }
    }

    let last = &alpha[frames - 1];
    let log_likelihood = if s_len > 1 {
        log_add(last[s_len - 1], last[s_len - 2])
    } else {
        last[0]
    };
    Ok(Lattice {
        alpha,
        beta,
        ext,
        log_likelihood,
    })
}

/// CTC negative log-likelihood and its gradient with respect to the logits
/// that produced `log_probs` through a log-softmax.
pub fn ctc_loss<T: Real>(log_probs: &Tensor<T>, target: &[usize]) -> Result<CtcOutput<T>> {
    let (frames, classes) = dims(log_probs)?;
    let lat = lattice(log_probs, target)?;
    let ll = lat.log_likelihood;
    let mut grad = Tensor::zeros(&[frames, classes]);
    let mut occupancy = vec![f64::NEG_INFINITY; classes];
    for t in 0..frames {
        occupancy.fill(f64::NEG_INFINITY);
        for (s, &k) in lat.ext.iter().enumerate() {
            occupancy[k] = log_add(occupancy[k], lat.alpha[t][s] + lat.beta[t][s]);
        }
        let row = &mut grad.data_mut()[t * classes..(t + 1) * classes];
        for k in 0..classes {
            let p = log_probs.data()[t * classes + k].as_f64().exp();
            let gamma = if occupancy[k] == f64::NEG_INFINITY {
                0.0
            } else {
                (occupancy[k] - ll).exp()
            };
            row[k] = T::of(p - gamma);
        }
    }
    Ok(CtcOutput { loss: -ll, grad })
}

/// Reference loss by enumerating every frame-level path. Returns `+∞` when
/// no path collapses to `target`.
pub fn ctc_brute_force<T: Real>(log_probs: &Tensor<T>, target: &[usize]) -> Result<f64> {
    let (frames, classes) = dims(log_probs)?;
    check_labels(target, classes)?;
    if target.len() > frames {
        return Ok(f64::INFINITY);
    }
    let size = (classes as f64).powi(frames as i32);
    if size > BRUTE_FORCE_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            size,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let blank = classes - 1;
    let mut path = vec![0usize; frames];
    let mut total = 0.0f64;
    loop {
        if collapse(&path, blank) == target {
            let lp: f64 = path
                .iter()
                .enumerate()
                .map(|(t, &k)| log_probs.data()[t * classes + k].as_f64())
                .sum();
            total += lp.exp();
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == frames {
                return Ok(if total > 0.0 { -total.ln() } else { f64::INFINITY });
            }
            path[i] += 1;
            if path[i] < classes {
                break;
            }
            path[i] = 0;
            i += 1;
        }
    }
}

/// Merge adjacent repeats, then drop blanks.
pub fn collapse(path: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &k in path {
        if Some(k) != prev && k != blank {
            out.push(k);
        }
        prev = Some(k);
    }
    out
}

/// Best-path decoding; argmax ties resolve to the lowest class id.
pub fn ctc_greedy_decode<T: Real>(log_probs: &Tensor<T>) -> Result<Vec<usize>> {
    let (_, classes) = dims(log_probs)?;
    let best: Vec<usize> = log_probs
        .data()
        .chunks(classes)
        .map(|row| {
            let mut arg = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[arg] {
                    arg = k;
                }
            }
            arg
        })
        .collect();
    Ok(collapse(&best, classes - 1))
}
