use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use super::checkpoint::{save_checkpoint, Checkpoint};
use super::config::TrainConfig;
use super::model::Model;
use crate::augment::{augment_seeded, sample_seed};
use crate::ctc::ctc_greedy_decode;
use crate::data::{fnv1a, make_batch, shuffled_batches, Batch, Sample, Vocabulary};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_pairs, MetricsReport, Pair};
use crate::nn::Mode;
use crate::optim::Adam;
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepStats {
    pub iteration: u64,
    pub loss: f64,
    pub lr: f64,
    pub infeasible: usize,
}

/// One optimization step at `iteration` (0-based) with the scheduled rate.
pub fn train_step<T: Real>(
    model: &mut Model<T>,
    adam: &mut Adam<T>,
    batch: &Batch,
    iteration: u64,
    config: &TrainConfig,
) -> Result<StepStats> {
    let images: Tensor<T> = batch.images.cast();
    let r = model.loss_and_grad(&images, &batch.widths, &batch.targets, Mode::Train)?;
    if !r.loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            loss: r.loss,
            ids: batch.ids.join(", "),
        });
    }
    if r.infeasible > 0 {
        warn!("iteration {iteration}: {} item(s) with infeasible targets", r.infeasible);
    }
    let lr = config.schedule().lr(iteration);
    adam.update(model, &r.grad, lr)?;
    Ok(StepStats {
        iteration,
        loss: r.loss,
        lr,
        infeasible: r.infeasible,
    })
}

/// Ground-truth and predicted token sequences with the metrics over them.
#[derive(Clone, Debug, Serialize)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub predictions: Vec<(String, Vec<String>)>,
    pub seconds: f64,
}

/// Greedy CTC decoding of each sample, one at a time, in eval mode.
pub fn predict(model: &mut Model<f32>, samples: &[Sample], vocab: &Vocabulary) -> Result<Vec<(String, Vec<String>)>> {
    samples
        .iter()
        .map(|s| {
            let images = s.image.reshape(&[1, 1, s.image.shape()[1], s.width()])?;
            let (out, _) = model.forward(&images, &[s.width()], Mode::Eval)?;
            let ids = ctc_greedy_decode(&out.item(0))?;
            Ok((s.id.clone(), vocab.decode(&ids)))
        })
        .collect()
}

pub fn evaluate(model: &mut Model<f32>, samples: &[Sample], vocab: &Vocabulary) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::Metric("cannot evaluate an empty split".into()));
    }
    let start = Instant::now();
    let predictions = predict(model, samples, vocab)?;
    let pairs: Vec<Pair> = samples
        .iter()
        .zip(&predictions)
        .map(|(s, (_, pred))| (vocab.decode(&s.target), pred.clone()))
        .collect();
    let report = evaluate_pairs(&pairs, vocab.encoding())?;
    Ok(Evaluation {
        report,
        predictions,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// A line of the training log: `iter loss lr seconds`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogLine {
    pub iteration: u64,
    pub loss: f64,
    pub lr: f64,
    pub seconds: f64,
}

impl std::fmt::Display for LogLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {:.6} {:.3e} {:.2}", self.iteration, self.loss, self.lr, self.seconds)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainSummary {
    pub iterations: u64,
    pub losses: Vec<f64>,
    pub log: Vec<LogLine>,
    pub best_val_syer: Option<f64>,
    pub best_checkpoint: Option<PathBuf>,
    pub seconds: f64,
}

/// Iteration-based training loop. Batches come from a fresh seeded shuffle
/// every epoch; augmentation (when enabled) uses a per-sample seed derived
/// from the run seed, the sample id and the epoch, so results do not depend
/// on the thread count.
pub struct Trainer {
    pub model: Model<f32>,
    pub adam: Adam<f32>,
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    pub iteration: u64,
    pub out_dir: Option<PathBuf>,
}

impl Trainer {
    pub fn new(model: Model<f32>, config: TrainConfig, vocab: Vocabulary) -> Self {
        Trainer {
            model,
            adam: Adam::new(config.adam),
            config,
            vocab,
            iteration: 0,
            out_dir: None,
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        Ok(Trainer {
            model: ckpt.build_model()?,
            adam: ckpt.build_adam()?,
            config: ckpt.train.clone(),
            vocab: ckpt.vocabulary.clone(),
            iteration: ckpt.iteration,
            out_dir: None,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::capture(&self.model, &self.adam, &self.vocab, &self.config, self.iteration)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_checkpoint(path, &self.checkpoint())
    }

    fn batch_for(&self, train: &[Sample], indices: &[usize], epoch: u64) -> Result<Batch> {
        let picked: Vec<&Sample> = indices.iter().map(|&i| &train[i]).collect();
        if !self.config.augment {
            return make_batch(&picked);
        }
        let cfg = &self.config.augmentation;
        let seed = self.config.seed;
        let augmented: Vec<Sample> = picked
            .par_iter()
            .map(|s| {
                let (image, _) = augment_seeded(&s.image, cfg, sample_seed(seed, &s.id, epoch))?;
                Ok(Sample {
                    id: s.id.clone(),
                    image,
                    target: s.target.clone(),
                })
            })
            .collect::<Result<_>>()?;
        make_batch(&augmented.iter().collect::<Vec<_>>())
    }

    /// Trains until `config.max_iters`, evaluating on `val` every
    /// `config.eval_every` iterations and keeping the checkpoint with the
    /// lowest validation SyER as `best.ckpt` in the output directory.
    pub fn run(&mut self, train: &[Sample], val: &[Sample]) -> Result<TrainSummary> {
        if train.is_empty() {
            return Err(Error::Metric("training split is empty".into()));
        }
        let start = Instant::now();
        let per_epoch = train.len().div_ceil(self.config.batch_size) as u64;
        let mut summary = TrainSummary {
            iterations: 0,
            losses: Vec::new(),
            log: Vec::new(),
            best_val_syer: None,
            best_checkpoint: None,
            seconds: 0.0,
        };
        while self.iteration < self.config.max_iters {
            let epoch = self.iteration / per_epoch;
            let shuffle_seed = fnv1a(&[self.config.seed.to_le_bytes(), epoch.to_le_bytes()].concat());
            let order = shuffled_batches(train.len(), self.config.batch_size, shuffle_seed);
            let skip = (self.iteration % per_epoch) as usize;
            for indices in order.iter().skip(skip) {
                if self.iteration >= self.config.max_iters {
                    break;
                }
                let batch = self.batch_for(train, indices, epoch)?;
                let stats = train_step(&mut self.model, &mut self.adam, &batch, self.iteration, &self.config)?;
                self.iteration += 1;
                summary.losses.push(stats.loss);
                let line = LogLine {
                    iteration: self.iteration,
                    loss: stats.loss,
                    lr: stats.lr,
                    seconds: start.elapsed().as_secs_f64(),
                };
                if self.config.log_every > 0 && self.iteration % self.config.log_every == 0 {
                    info!("{line}");
                    summary.log.push(line);
                }
                let eval_due = self.config.eval_every > 0 && self.iteration % self.config.eval_every == 0;
                if eval_due && !val.is_empty() {
                    self.evaluate_and_keep_best(val, &mut summary)?;
                }
            }
        }
        if let Some(dir) = &self.out_dir {
            self.save(&dir.join("last.ckpt"))?;
        }
        summary.iterations = self.iteration;
        summary.seconds = start.elapsed().as_secs_f64();
        Ok(summary)
    }

    fn evaluate_and_keep_best(&mut self, val: &[Sample], summary: &mut TrainSummary) -> Result<()> {
        let eval = evaluate(&mut self.model, val, &self.vocab)?;
        let syer = eval.report.syer;
        info!(
            "eval iter {} val_seer {:.3} val_syer {:.3} ({:.1}s)",
            self.iteration, eval.report.seer, syer, eval.seconds
        );
        if summary.best_val_syer.is_none_or(|b| syer < b) {
            summary.best_val_syer = Some(syer);
            if let Some(dir) = &self.out_dir {
                let path = dir.join("best.ckpt");
                self.save(&path)?;
                summary.best_checkpoint = Some(path);
            }
        }
        Ok(())
    }
}
