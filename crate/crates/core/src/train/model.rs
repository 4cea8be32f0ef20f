use rand::Rng;
use rayon::prelude::*;

use super::config::ModelConfig;
use crate::ctc::ctc_loss;
use crate::error::{Error, Result};
use crate::nn::encoder::EncoderCache;
use crate::nn::{log_softmax, Encoder, Linear, Mode};
use crate::params::{join, ParamKind, Parameters};
use crate::rnn::{BiGru, BiGruCache};
use crate::tensor::{Real, Tensor};

/// Convolutional encoder, bidirectional GRU stack and a frame-shared output
/// layer producing per-frame log-probabilities over `V + 1` classes.
#[derive(Clone, Debug)]
pub struct Model<T: Real> {
    pub config: ModelConfig,
    pub encoder: Encoder<T>,
    pub rnn: BiGru<T>,
    pub output: Linear<T>,
}

/// Per-item log-probabilities. Item `i` owns `lengths[i]` valid frames; the
/// rest of its rows in `log_probs` hold a uniform distribution.
#[derive(Clone, Debug)]
pub struct ForwardOutput<T: Real> {
    /// `[N, T_max, V + 1]`
    pub log_probs: Tensor<T>,
    pub lengths: Vec<usize>,
}

impl<T: Real> ForwardOutput<T> {
    /// `[T_i, V + 1]` log-probabilities of the valid frames of item `i`.
    pub fn item(&self, i: usize) -> Tensor<T> {
        let [_, t_max, c] = *self.log_probs.shape() else {
            unreachable!("forward output is rank 3")
        };
        let t = self.lengths[i];
        let start = i * t_max * c;
        Tensor::new(&[t, c], self.log_probs.data()[start..start + t * c].to_vec()).expect("valid slice")
    }
}

#[derive(Clone, Debug)]
struct ItemCache<T: Real> {
    rnn: BiGruCache<T>,
    rnn_out: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct ModelCache<T: Real> {
    encoder: EncoderCache<T>,
    seq_shape: Vec<usize>,
    items: Vec<ItemCache<T>>,
}

impl<T: Real> Model<T> {
    pub fn new(config: ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let encoder = Encoder::new(config.encoder.clone(), rng)?;
        let rnn = BiGru::new(config.encoder.feature_dim(), config.gru_hidden, config.gru_layers, rng);
        let output = Linear::new(rnn.output_dim(), config.num_classes(), rng);
        Ok(Model {
            config,
            encoder,
            rnn,
            output,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes()
    }

    /// Valid output frames for an input of the given pixel width.
    pub fn frames(&self, width: usize) -> usize {
        self.config.encoder.time_steps(width)
    }

    /// `images` is `[N, 1, H, W_max]`; `widths` holds each item's true width.
    pub fn forward(
        &mut self,
        images: &Tensor<T>,
        widths: &[usize],
        mode: Mode,
    ) -> Result<(ForwardOutput<T>, ModelCache<T>)> {
        let n = images.shape().first().copied().unwrap_or(0);
        if widths.len() != n || n == 0 {
            return Err(Error::Dimension(format!("{} widths for a batch of {n}", widths.len())));
        }
        let (seq, enc_cache) = self.encoder.forward(images, mode)?;
        let [_, t_max, f] = *seq.shape() else {
            unreachable!("encoder emits rank 3")
        };
        let lengths: Vec<usize> = widths.iter().map(|&w| self.frames(w).min(t_max)).collect();
        if let Some(i) = lengths.iter().position(|&t| t == 0) {
            return Err(Error::WidthTooSmall {
                width: widths[i],
                min: self.config.encoder.min_width(),
            });
        }
        let (rnn, output) = (&self.rnn, &self.output);
        let items: Vec<(ItemCache<T>, Tensor<T>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let rows = &seq.data()[i * t_max * f..(i * t_max + lengths[i]) * f];
                let input = Tensor::new(&[lengths[i], f], rows.to_vec())?;
                let (rnn_out, rnn_cache) = rnn.forward(&input)?;
                let lp = log_softmax(&output.forward(&rnn_out)?)?;
                Ok((
                    ItemCache {
                        rnn: rnn_cache,
                        rnn_out,
                    },
                    lp,
                ))
            })
            .collect::<Result<_>>()?;

        let c = self.num_classes();
        let uniform = T::of(-(c as f64).ln());
        let mut log_probs = Tensor::full(&[n, t_max, c], uniform);
        let mut caches = Vec::with_capacity(n);
        for (i, (cache, lp)) in items.into_iter().enumerate() {
            let start = i * t_max * c;
            log_probs.data_mut()[start..start + lp.len()].copy_from_slice(lp.data());
            caches.push(cache);
        }
        Ok((
            ForwardOutput { log_probs, lengths },
            ModelCache {
                encoder: enc_cache,
                seq_shape: seq.shape().to_vec(),
                items: caches,
            },
        ))
    }

    /// Backpropagates per-item logit gradients (`[T_i, V + 1]` each) and
    /// returns the parameter gradient. Item contributions are summed in item
    /// order, so the result does not depend on the thread count.
    pub fn backward(&self, cache: &ModelCache<T>, d_logits: &[Tensor<T>]) -> Result<Self> {
        if d_logits.len() != cache.items.len() {
            return Err(Error::Dimension("one logit gradient per batch item is required".into()));
        }
        let per_item: Vec<(BiGru<T>, Linear<T>, Tensor<T>)> = cache
            .items
            .par_iter()
            .zip(d_logits)
            .map(|(item, d)| {
                let mut g_rnn = self.rnn.zeros_like();
                let mut g_out = self.output.zeros_like();
                let d_rnn = self.output.backward(&item.rnn_out, d, &mut g_out)?;
                let dx = self.rnn.backward(&item.rnn, &d_rnn, &mut g_rnn)?;
                Ok((g_rnn, g_out, dx))
            })
            .collect::<Result<_>>()?;

        let mut grad = self.zeros_like();
        let [_, t_max, f] = *cache.seq_shape else {
            unreachable!("sequence is rank 3")
        };
        let mut d_seq = Tensor::zeros(&cache.seq_shape);
        for (i, (g_rnn, g_out, dx)) in per_item.iter().enumerate() {
            add_into(&mut grad.rnn, g_rnn);
            add_into(&mut grad.output, g_out);
            let start = i * t_max * f;
            d_seq.data_mut()[start..start + dx.len()].copy_from_slice(dx.data());
        }
        self.encoder.backward(&cache.encoder, &d_seq, &mut grad.encoder)?;
        Ok(grad)
    }

    /// Mean CTC loss over the batch and its parameter gradient. Items whose
    /// target cannot fit into their frames contribute [`INFEASIBLE_LOSS`]
    /// and no gradient.
    pub fn loss_and_grad(
        &mut self,
        images: &Tensor<T>,
        widths: &[usize],
        targets: &[Vec<usize>],
        mode: Mode,
    ) -> Result<LossAndGrad<T>> {
        let (out, cache) = self.forward(images, widths, mode)?;
        let n = targets.len();
        if n != out.lengths.len() {
            return Err(Error::Dimension("one target per batch item is required".into()));
        }
        let scale = T::of(1.0 / n as f64);
        let mut total = 0.0;
        let mut infeasible = 0;
        let mut d_logits = Vec::with_capacity(n);
        for (i, target) in targets.iter().enumerate() {
            let lp = out.item(i);
            match ctc_loss(&lp, target) {
                Ok(o) => {
                    total += o.loss;
                    d_logits.push(o.grad.scale(scale));
                }
                Err(Error::InfeasibleTarget { .. }) => {
                    total += INFEASIBLE_LOSS;
                    infeasible += 1;
                    d_logits.push(lp.zeros_like());
                }
                Err(e) => return Err(e),
            }
        }
        let loss = total / n as f64;
        let grad = self.backward(&cache, &d_logits)?;
        Ok(LossAndGrad {
            loss,
            grad,
            infeasible,
        })
    }
}

/// Loss charged for a batch item whose target is longer than its frames allow.
pub const INFEASIBLE_LOSS: f64 = 1e4;

pub struct LossAndGrad<T: Real> {
    pub loss: f64,
    pub grad: Model<T>,
    pub infeasible: usize,
}

fn add_into<T: Real, P: Parameters<T>>(dst: &mut P, src: &P) {
    let mut srcs: Vec<Tensor<T>> = Vec::new();
    src.visit("", &mut |_, _, t| srcs.push(t.clone()));
    let mut i = 0;
    dst.visit_mut("", &mut |_, _, t| {
        t.accumulate(&srcs[i]).expect("gradient shapes agree");
        i += 1;
    });
}

impl<T: Real> Parameters<T> for Model<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &Tensor<T>)) {
        self.encoder.visit(&join(prefix, "encoder"), f);
        self.rnn.visit(&join(prefix, "rnn"), f);
        self.output.visit(&join(prefix, "output"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &mut Tensor<T>)) {
        self.encoder.visit_mut(&join(prefix, "encoder"), f);
        self.rnn.visit_mut(&join(prefix, "rnn"), f);
        self.output.visit_mut(&join(prefix, "output"), f);
    }
}
