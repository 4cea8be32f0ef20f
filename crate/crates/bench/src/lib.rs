//! Seeded inputs shared by the benchmarks.

use omrf_core::data::SynthSpec;
use omrf_core::nn::log_softmax;
use omrf_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(shape: &[usize], rng: &mut impl Rng) -> Tensor<f32> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// `[t, classes]` log-probabilities and a target of `len` labels.
pub fn ctc_case(t: usize, classes: usize, len: usize, rng: &mut impl Rng) -> (Tensor<f32>, Vec<usize>) {
    let logits = Tensor::<f32>::from_fn(&[t, classes], |_| rng.random_range(-3.0..3.0));
    let target = (0..len).map(|_| rng.random_range(0..classes - 1)).collect();
    (log_softmax(&logits).expect("rank-2 logits"), target)
}

/// A ground-truth token sequence and a copy with a few random edits.
pub fn token_pair(len: usize, edits: usize, rng: &mut impl Rng) -> (Vec<String>, Vec<String>) {
    let gt: Vec<String> = (0..len).map(|_| SynthSpec::semantic_token(rng.random_range(0..32))).collect();
    let mut pred = gt.clone();
    for _ in 0..edits {
        let at = rng.random_range(0..pred.len().max(1));
        match rng.random_range(0..3) {
            0 if !pred.is_empty() => {
                pred.remove(at);
            }
            1 => pred.insert(at.min(pred.len()), "barline".into()),
            _ if !pred.is_empty() => pred[at] = "clef-G2".into(),
            _ => {}
        }
    }
    (gt, pred)
}
