//! Corpus loading, vocabulary, image preprocessing, batching and a synthetic
//! staff generator.

mod synth;
mod vocab;

use std::fs;
use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use image::{GrayImage, ImageBuffer, Luma};
use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ctc::min_frames;
use crate::error::{Error, Result};
use crate::metrics::Encoding;
use crate::tensor::Tensor;

pub use synth::{synth_generate, synth_sample, SynthSpec, SYNTH_PITCHES, SYNTH_TYPES};
pub use vocab::Vocabulary;

pub const IMAGE_HEIGHT: usize = 128;
pub const MIN_IMAGE_WIDTH: usize = 16;
pub const DEFAULT_BATCH_SIZE: usize = 16;
pub const PAD_VALUE: f32 = 1.0;
/// Horizontal downsampling between input pixels and output frames.
pub const FRAME_STRIDE: usize = 4;

const IMAGE_EXTENSIONS: [&str; 2] = ["png", "pgm"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusEntry {
    pub id: String,
    pub image_path: PathBuf,
    pub tokens: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub encoding: Encoding,
    pub entries: Vec<CorpusEntry>,
    /// Images without a readable, non-empty token file.
    pub skipped: usize,
}

impl Corpus {
    pub fn build_vocab(&self) -> Vocabulary {
        Vocabulary::build(self.entries.iter().map(|e| e.tokens.as_slice()), self.encoding)
    }
}

/// Scans `root` recursively for `<id>.png`/`<id>.pgm` images with a sibling
/// `<id>.<encoding>` token file. Entries are sorted by image path.
pub fn load_corpus(root: &Path, encoding: Encoding) -> Result<Corpus> {
    if !root.is_dir() {
        return Err(Error::MissingRoot(root.to_path_buf()));
    }
    let mut images: Vec<PathBuf> = walkdir::WalkDir::new(root)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| {
            p.extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| IMAGE_EXTENSIONS.contains(&x))
        })
        .collect();
    images.sort();

    let mut entries = Vec::with_capacity(images.len());
    let mut skipped = 0;
    for image_path in images {
        let token_path = image_path.with_extension(encoding.extension());
        let tokens = match fs::read_to_string(&token_path) {
            Ok(text) => text.split_whitespace().map(String::from).collect::<Vec<_>>(),
            Err(e) => {
                warn!("skipping {}: {}: {e}", image_path.display(), token_path.display());
                skipped += 1;
                continue;
            }
        };
        if tokens.is_empty() {
            warn!("skipping {}: empty token file", image_path.display());
            skipped += 1;
            continue;
        }
        let id = image_path
            .strip_prefix(root)
            .unwrap_or(&image_path)
            .with_extension("")
            .to_string_lossy()
            .replace('\\', "/");
        entries.push(CorpusEntry {
            id,
            image_path,
            tokens,
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptyCorpus(root.to_path_buf()));
    }
    Ok(Corpus {
        encoding,
        entries,
        skipped,
    })
}

pub fn load_image(path: &Path) -> Result<GrayImage> {
    image::open(path)
        .map(|img| img.to_luma8())
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Width after scaling an `width`×`height` image to the fixed height.
pub fn scaled_width(width: usize, height: usize) -> usize {
    ((width * IMAGE_HEIGHT) as f64 / height as f64).round() as usize
}

/// Bilinear resize to height 128 with the aspect ratio kept, values in
/// `[0, 1]` (white ≈ 1). Returns a `[1, 128, W']` tensor.
pub fn preprocess_image(raw: &GrayImage) -> Result<Tensor<f32>> {
    let (w, h) = (raw.width() as usize, raw.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::ImageTooNarrow {
            width: 0,
            min: MIN_IMAGE_WIDTH,
        });
    }
    let new_w = scaled_width(w, h);
    if new_w < MIN_IMAGE_WIDTH {
        return Err(Error::ImageTooNarrow {
            width: new_w,
            min: MIN_IMAGE_WIDTH,
        });
    }
    let unit: ImageBuffer<Luma<f32>, Vec<f32>> =
        ImageBuffer::from_fn(w as u32, h as u32, |x, y| Luma([raw.get_pixel(x, y)[0] as f32 / 255.0]));
    let resized = if (new_w, h) == (w, IMAGE_HEIGHT) {
        unit
    } else {
        imageops::resize(&unit, new_w as u32, IMAGE_HEIGHT as u32, FilterType::Triangle)
    };
    let data = resized.into_raw().into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Tensor::new(&[1, IMAGE_HEIGHT, new_w], data)
}

/// Converts a `[1, H, W]` tensor back to an 8-bit image.
pub fn tensor_to_image(t: &Tensor<f32>) -> Result<GrayImage> {
    let [1, h, w] = t.shape() else {
        return Err(Error::Dimension(format!("expected [1, H, W], got {:?}", t.shape())));
    };
    let bytes = t.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    GrayImage::from_raw(*w as u32, *h as u32, bytes)
        .ok_or_else(|| Error::Dimension("image buffer size mismatch".into()))
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub id: String,
    pub image: Tensor<f32>,
    pub target: Vec<usize>,
}

impl Sample {
    pub fn width(&self) -> usize {
        self.image.shape()[2]
    }
}

/// Loads and preprocesses every entry in parallel. Entries whose image cannot
/// be read, is too narrow, or whose target does not fit into the available
/// frames are skipped with a warning; the skip count is returned.
pub fn load_samples(corpus: &Corpus, vocab: &Vocabulary) -> (Vec<Sample>, usize) {
    let results: Vec<Option<Sample>> = corpus
        .entries
        .par_iter()
        .map(|entry| match prepare(entry, vocab) {
            Ok(s) => Some(s),
            Err(e) => {
                warn!("skipping {}: {e}", entry.id);
                None
            }
        })
        .collect();
    let skipped = results.iter().filter(|r| r.is_none()).count();
    (results.into_iter().flatten().collect(), skipped)
}

fn prepare(entry: &CorpusEntry, vocab: &Vocabulary) -> Result<Sample> {
    let image = preprocess_image(&load_image(&entry.image_path)?)?;
    let target = vocab.encode(&entry.tokens)?;
    let frames = image.shape()[2] / FRAME_STRIDE;
    let required = min_frames(&target);
    if frames < required {
        return Err(Error::InfeasibleTarget {
            frames,
            target_len: target.len(),
            required,
        });
    }
    Ok(Sample {
        id: entry.id.clone(),
        image,
        target,
    })
}

#[derive(Clone, Debug)]
pub struct Batch {
    pub ids: Vec<String>,
    /// `[N, 1, 128, W_max]`, right-padded with white.
    pub images: Tensor<f32>,
    pub widths: Vec<usize>,
    pub targets: Vec<Vec<usize>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Valid output frames per item.
    pub fn frames(&self) -> Vec<usize> {
        self.widths.iter().map(|w| w / FRAME_STRIDE).collect()
    }
}

pub fn make_batch(samples: &[&Sample]) -> Result<Batch> {
    if samples.is_empty() {
        return Err(Error::Dimension("cannot batch zero samples".into()));
    }
    let height = samples[0].image.shape()[1];
    if samples.iter().any(|s| s.image.ndim() != 3 || s.image.shape()[..2] != [1, height]) {
        return Err(Error::Dimension("batch images must share shape [1, H, _]".into()));
    }
    let w_max = samples.iter().map(|s| s.width()).max().unwrap_or(0);
    let n = samples.len();
    let mut images = Tensor::full(&[n, 1, height, w_max], PAD_VALUE);
    let data = images.data_mut();
    for (i, s) in samples.iter().enumerate() {
        let w = s.width();
        for (y, row) in s.image.data().chunks_exact(w).enumerate() {
            let start = (i * height + y) * w_max;
            data[start..start + w].copy_from_slice(row);
        }
    }
    Ok(Batch {
        ids: samples.iter().map(|s| s.id.clone()).collect(),
        images,
        widths: samples.iter().map(|s| s.width()).collect(),
        targets: samples.iter().map(|s| s.target.clone()).collect(),
    })
}

/// Index batches of at most `batch_size` over a seeded shuffle of `0..n`.
pub fn shuffled_batches(n: usize, batch_size: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// 64-bit FNV-1a; stable across platforms and releases.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "all" => Err(Error::Config("`all` is not a single split".into())),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

/// Train/validation percentages; the remainder is the test split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitRatios {
    pub train: u32,
    pub val: u32,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 80, val: 10 }
    }
}

impl SplitRatios {
    pub fn split_of(&self, id: &str) -> Split {
        let bucket = (fnv1a(id.as_bytes()) % 100) as u32;
        if bucket < self.train {
            Split::Train
        } else if bucket < self.train + self.val {
            Split::Val
        } else {
            Split::Test
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, w: usize, fill: f32) -> Sample {
        Sample {
            id: id.into(),
            image: Tensor::full(&[1, IMAGE_HEIGHT, w], fill),
            target: vec![0],
        }
    }

    #[test]
    fn halving_and_identity_resize() {
        let t = preprocess_image(&GrayImage::from_pixel(512, 256, Luma([255]))).unwrap();
        assert_eq!(t.shape(), &[1, 128, 256]);
        let raw = GrayImage::from_fn(300, 128, |x, y| Luma([((x + y) % 256) as u8]));
        let t = preprocess_image(&raw).unwrap();
        assert_eq!(t.shape(), &[1, 128, 300]);
        assert_eq!(t.at(&[0, 5, 7]), 12.0 / 255.0);
    }

    #[test]
    fn checkerboard_range() {
        let raw = GrayImage::from_fn(97, 61, |x, y| Luma([if (x + y) % 2 == 0 { 0 } else { 255 }]));
        let t = preprocess_image(&raw).unwrap();
        let (lo, hi) = t.data().iter().fold((f32::MAX, f32::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(lo >= 0.0 && hi <= 1.0);
        assert!((t.shape()[2] as f64 - 97.0 * 128.0 / 61.0).abs() <= 1.0);
    }

    #[test]
    fn narrow_image_rejected() {
        let err = preprocess_image(&GrayImage::new(10, 128)).unwrap_err();
        assert!(matches!(err, Error::ImageTooNarrow { width: 10, min: 16 }));
    }

    #[test]
    fn batch_padding() {
        let (a, b) = (sample("a", 100, 0.0), sample("b", 120, 0.0));
        let batch = make_batch(&[&a, &b]).unwrap();
        assert_eq!(batch.images.shape(), &[2, 1, 128, 120]);
        assert_eq!(batch.frames(), vec![25, 30]);
        assert_eq!(batch.images.at(&[0, 0, 5, 99]), 0.0);
        assert_eq!(batch.images.at(&[0, 0, 5, 100]), 1.0);
        assert_eq!(batch.images.at(&[1, 0, 5, 119]), 0.0);
        let single = make_batch(&[&a]).unwrap();
        assert!(single.images.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn splits_are_deterministic_and_roughly_proportional() {
        let r = SplitRatios::default();
        let ids: Vec<String> = (0..2000).map(|i| format!("sample-{i:05}")).collect();
        let train = ids.iter().filter(|id| r.split_of(id) == Split::Train).count();
        assert!((1450..=1750).contains(&train), "{train}");
        assert!(ids.iter().all(|id| r.split_of(id) == r.split_of(id)));
    }

    #[test]
    fn shuffle_covers_everything() {
        let b = shuffled_batches(37, 16, 9);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![16, 16, 5]);
        let mut all: Vec<usize> = b.concat();
        all.sort();
        assert_eq!(all, (0..37).collect::<Vec<_>>());
        assert_eq!(b, shuffled_batches(37, 16, 9));
    }

    #[test]
    fn corpus_skips_orphan_images() {
        let dir = tempfile::tempdir().unwrap();
        synth_generate(dir.path(), 3, 2, &SynthSpec::default()).unwrap();
        let c = load_corpus(dir.path(), Encoding::Semantic).unwrap();
        assert_eq!(c.entries.len(), 3);
        assert!(c.entries.windows(2).all(|w| w[0].image_path < w[1].image_path));
        fs::remove_file(dir.path().join("synth-00001.semantic")).unwrap();
        let c = load_corpus(dir.path(), Encoding::Semantic).unwrap();
        assert_eq!((c.entries.len(), c.skipped), (2, 1));
        assert!(matches!(load_corpus(&dir.path().join("nope"), Encoding::Semantic), Err(Error::MissingRoot(_))));
        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(load_corpus(empty.path(), Encoding::Semantic), Err(Error::EmptyCorpus(_))));
    }

    #[test]
    fn samples_load_and_encode() {
        let dir = tempfile::tempdir().unwrap();
        synth_generate(dir.path(), 4, 5, &SynthSpec::default()).unwrap();
        let c = load_corpus(dir.path(), Encoding::Agnostic).unwrap();
        let v = c.build_vocab();
        let (samples, skipped) = load_samples(&c, &v);
        assert_eq!((samples.len(), skipped), (4, 0));
        assert!(samples.iter().all(|s| s.image.shape()[1] == IMAGE_HEIGHT && s.target.iter().all(|&t| t < v.len())));
    }
}
