//! Binary checkpoint format:
//!
//! ```text
//! "OMRF" | u32 version | u32 metadata length | metadata (UTF-8 JSON) | f32 payload
//! ```
//!
//! All integers and floats are little-endian. The metadata lists every tensor
//! by name and shape in payload order.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, TrainConfig};
use super::model::Model;
use crate::data::Vocabulary;
use crate::error::{Error, Result};
use crate::metrics::Encoding;
use crate::optim::Adam;
use crate::params::Parameters;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"OMRF";
pub const FORMAT_VERSION: u32 = 1;

const ADAM_PREFIX: &str = "adam";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    shape: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Metadata {
    model: ModelConfig,
    train: TrainConfig,
    encoding: Encoding,
    vocabulary: Vec<String>,
    iteration: u64,
    adam_step: u64,
    tensors: Vec<TensorMeta>,
}

/// Everything needed to resume training or run inference.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub vocabulary: Vocabulary,
    pub iteration: u64,
    pub adam_step: u64,
    /// Model tensors (weights and buffers) followed by optimizer moments.
    pub tensors: Vec<(String, Tensor<f32>)>,
}

impl Checkpoint {
    pub fn capture(
        model: &Model<f32>,
        adam: &Adam<f32>,
        vocabulary: &Vocabulary,
        train: &TrainConfig,
        iteration: u64,
    ) -> Self {
        let mut tensors = Vec::new();
        model.visit("", &mut |name, _, t| tensors.push((name.to_string(), t.clone())));
        adam.visit(ADAM_PREFIX, &mut |name, _, t| tensors.push((name.to_string(), t.clone())));
        Checkpoint {
            model: model.config.clone(),
            train: train.clone(),
            vocabulary: vocabulary.clone(),
            iteration,
            adam_step: adam.step,
            tensors,
        }
    }

    /// Copies saved tensors into `model`, refusing on any name or shape mismatch.
    pub fn load_into(&self, model: &mut Model<f32>) -> Result<()> {
        let mut expected = Vec::new();
        model.visit("", &mut |name, _, t| expected.push((name.to_string(), t.shape().to_vec())));
        let saved: Vec<&(String, Tensor<f32>)> =
            self.tensors.iter().filter(|(n, _)| !n.starts_with("adam.")).collect();
        if saved.len() != expected.len() {
            return Err(Error::CheckpointMismatch(format!(
                "checkpoint holds {} model tensors, model has {}",
                saved.len(),
                expected.len()
            )));
        }
        for ((name, shape), (sname, t)) in expected.iter().zip(&saved) {
            if name != sname || shape.as_slice() != t.shape() {
                return Err(Error::CheckpointMismatch(format!(
                    "`{name}` {shape:?} vs saved `{sname}` {:?}",
                    t.shape()
                )));
            }
        }
        let mut i = 0;
        model.visit_mut("", &mut |_, _, t| {
            *t = saved[i].1.clone();
            i += 1;
        });
        Ok(())
    }

    /// Rebuilds the model described by the stored configuration.
    pub fn build_model(&self) -> Result<Model<f32>> {
        let mut model = Model::new(self.model.clone(), &mut ChaCha8Rng::seed_from_u64(0))?;
        self.load_into(&mut model)?;
        Ok(model)
    }

    pub fn build_adam(&self) -> Result<Adam<f32>> {
        let prefix = format!("{ADAM_PREFIX}.m.");
        let mut moments = Vec::new();
        for (name, m) in &self.tensors {
            let Some(param) = name.strip_prefix(&prefix) else {
                continue;
            };
            let v_name = format!("{ADAM_PREFIX}.v.{param}");
            let v = self
                .tensors
                .iter()
                .find(|(n, _)| *n == v_name)
                .map(|(_, t)| t.clone())
                .ok_or_else(|| Error::CheckpointMismatch(format!("missing second moment for `{param}`")))?;
            moments.push((param.to_string(), m.clone(), v));
        }
        Ok(Adam::restore(self.train.adam, self.adam_step, moments))
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let meta = Metadata {
        model: ckpt.model.clone(),
        train: ckpt.train.clone(),
        encoding: ckpt.vocabulary.encoding(),
        vocabulary: ckpt.vocabulary.tokens().to_vec(),
        iteration: ckpt.iteration,
        adam_step: ckpt.adam_step,
        tensors: ckpt
            .tensors
            .iter()
            .map(|(name, t)| TensorMeta {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&meta)?;
    let payload: usize = ckpt.tensors.iter().map(|(_, t)| t.len()).sum();
    let mut bytes = Vec::with_capacity(12 + json.len() + 4 * payload);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&json);
    for (_, t) in &ckpt.tensors {
        for v in t.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::Checkpoint("truncated header".into()))
}

fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic bytes)".into()));
    }
    let version = read_u32(bytes, 4)?;
    if version != FORMAT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let meta_len = read_u32(bytes, 8)? as usize;
    let meta_bytes = bytes
        .get(12..12 + meta_len)
        .ok_or_else(|| Error::Checkpoint("truncated metadata".into()))?;
    let meta: Metadata = serde_json::from_slice(meta_bytes)?;
    let mut payload = &bytes[12 + meta_len..];
    let expected: usize = meta.tensors.iter().map(|t| t.shape.iter().product::<usize>() * 4).sum();
    if payload.len() != expected {
        return Err(Error::Checkpoint(format!(
            "payload holds {} bytes, metadata describes {expected}",
            payload.len()
        )));
    }
    let mut tensors = Vec::with_capacity(meta.tensors.len());
    for tm in meta.tensors {
        let n: usize = tm.shape.iter().product();
        let (head, rest) = payload.split_at(4 * n);
        let data = head
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        tensors.push((tm.name, Tensor::new(&tm.shape, data)?));
        payload = rest;
    }
    Ok(Checkpoint {
        model: meta.model,
        train: meta.train,
        vocabulary: Vocabulary::from_list(meta.vocabulary, meta.encoding)?,
        iteration: meta.iteration,
        adam_step: meta.adam_step,
        tensors,
    })
}
