use std::fs;
use std::path::Path;

use image::{GrayImage, Luma};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::IMAGE_HEIGHT;
use crate::error::{Error, Result};

pub const SYNTH_TYPES: [&str; 4] = ["quarter", "half", "whole", "eighth"];
pub const SYNTH_PITCHES: [&str; 8] = ["E4", "F4", "G4", "A4", "B4", "C5", "D5", "E5"];
const AGNOSTIC_POSITIONS: [&str; 8] = ["L1", "S1", "L2", "S2", "L3", "S3", "L4", "S4"];

const STAFF_BOTTOM: i64 = 84;
const LINE_SPACING: i64 = 10;
const GLYPH_WIDTH: i64 = 12;
const MARGIN: i64 = 8;
const MAX_VOCAB: usize = SYNTH_TYPES.len() * SYNTH_PITCHES.len();

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub vocab_size: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub min_gap: u32,
    pub max_gap: u32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            vocab_size: 16,
            min_tokens: 3,
            max_tokens: 7,
            min_gap: 8,
            max_gap: 16,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.vocab_size > MAX_VOCAB {
            return Err(Error::Config(format!("synthetic vocabulary must be in 1..={MAX_VOCAB}")));
        }
        if self.min_tokens == 0 || self.min_tokens > self.max_tokens || self.min_gap > self.max_gap {
            return Err(Error::Config("invalid synthetic token or gap range".into()));
        }
        Ok(())
    }

    /// Token `id` is glyph kind `id % 4` at staff position `id / 4`.
    pub fn semantic_token(id: usize) -> String {
        format!("note-{}_{}", SYNTH_PITCHES[id / 4], SYNTH_TYPES[id % 4])
    }

    pub fn agnostic_token(id: usize) -> String {
        format!("note.{}-{}", SYNTH_TYPES[id % 4], AGNOSTIC_POSITIONS[id / 4])
    }
}

/// Renders one staff holding the glyphs for `ids`, left to right.
pub fn synth_sample(ids: &[usize], rng: &mut impl Rng, spec: &SynthSpec) -> GrayImage {
    let gaps: Vec<i64> = ids.iter().map(|_| rng.random_range(spec.min_gap..=spec.max_gap) as i64).collect();
    let content: i64 = gaps.iter().map(|g| g + GLYPH_WIDTH).sum();
    let width = (2 * MARGIN + content)
        .max(super::MIN_IMAGE_WIDTH as i64)
        .max(4 * ids.len() as i64);
    let mut img = GrayImage::from_pixel(width as u32, IMAGE_HEIGHT as u32, Luma([255]));
    for k in 0..5 {
        let y = STAFF_BOTTOM - k * LINE_SPACING;
        for x in 0..width {
            img.put_pixel(x as u32, y as u32, Luma([0]));
        }
    }
    let mut x = MARGIN;
    for (&id, gap) in ids.iter().zip(&gaps) {
        x += gap / 2;
        let cx = x + GLYPH_WIDTH / 2;
        let cy = STAFF_BOTTOM - (id / 4) as i64 * LINE_SPACING / 2;
        draw_glyph(&mut img, id % 4, cx, cy);
        x += GLYPH_WIDTH + gap - gap / 2;
    }
    img
}

fn draw_glyph(img: &mut GrayImage, kind: usize, cx: i64, cy: i64) {
    let r = 5i64;
    for dy in -12..=12i64 {
        for dx in -6..=6i64 {
            let d2 = dx * dx + dy * dy;
            let ink = match kind {
                0 => d2 <= r * r,
                1 => (r - 2) * (r - 2) < d2 && d2 <= r * r,
                2 => dx.abs() <= 2 && dy.abs() <= 9,
                _ => dy >= -5 && dy <= 5 && dx >= -5 && dx <= -5 + (dy + 5),
            };
            let (x, y) = (cx + dx, cy + dy);
            if ink && x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
                img.put_pixel(x as u32, y as u32, Luma([0]));
            }
        }
    }
}

/// Writes `n` synthetic samples under `out_dir` as `synth-NNNNN.png` with
/// `.semantic` and `.agnostic` token files. Token ids are dealt from
/// repeatedly reshuffled decks so that every id in `0..vocab_size` appears
/// once at least `vocab_size` tokens have been emitted. Returns sample ids.
pub fn synth_generate(out_dir: &Path, n: usize, seed: u64, spec: &SynthSpec) -> Result<Vec<String>> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lengths: Vec<usize> = (0..n).map(|_| rng.random_range(spec.min_tokens..=spec.max_tokens)).collect();
    let mut k = 0;
    while lengths.iter().sum::<usize>() < spec.vocab_size && lengths.iter().any(|&l| l < spec.max_tokens) {
        if lengths[k % n] < spec.max_tokens {
            lengths[k % n] += 1;
        }
        k += 1;
    }

    let mut deck: Vec<usize> = Vec::new();
    let mut ids = Vec::with_capacity(n);
    for (i, &len) in lengths.iter().enumerate() {
        let mut tokens = Vec::with_capacity(len);
        for _ in 0..len {
            if deck.is_empty() {
                deck = (0..spec.vocab_size).collect();
                deck.shuffle(&mut rng);
            }
            tokens.push(deck.pop().unwrap_or(0));
        }
        let img = synth_sample(&tokens, &mut rng, spec);
        let id = format!("synth-{i:05}");
        let png = out_dir.join(format!("{id}.png"));
        img.save(&png).map_err(|source| Error::Image { path: png.clone(), source })?;
        for (ext, f) in [
            ("semantic", SynthSpec::semantic_token as fn(usize) -> String),
            ("agnostic", SynthSpec::agnostic_token),
        ] {
            let path = out_dir.join(format!("{id}.{ext}"));
            let line = tokens.iter().map(|&t| f(t)).collect::<Vec<_>>().join(" ") + "\n";
            fs::write(&path, line).map_err(|e| Error::io(&path, e))?;
        }
        ids.push(id);
    }
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{load_corpus, FRAME_STRIDE};
    use crate::metrics::Encoding;

    #[test]
    fn deterministic_bytes() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let spec = SynthSpec::default();
        synth_generate(a.path(), 10, 7, &spec).unwrap();
        synth_generate(b.path(), 10, 7, &spec).unwrap();
        let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert_eq!(names.len(), 30);
        for name in names {
            assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
        }
    }

    #[test]
    fn widths_and_vocab_coverage() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            vocab_size: 32,
            ..SynthSpec::default()
        };
        synth_generate(dir.path(), 6, 1, &spec).unwrap();
        let corpus = load_corpus(dir.path(), Encoding::Semantic).unwrap();
        assert_eq!(corpus.build_vocab().len(), 32);
        for e in &corpus.entries {
            let img = crate::data::load_image(&e.image_path).unwrap();
            let w = img.width() as usize;
            assert_eq!(img.height() as usize, IMAGE_HEIGHT);
            assert!(w >= 16 && w >= 4 * e.tokens.len());
            assert!(w / FRAME_STRIDE >= 2 * e.tokens.len());
        }
    }

    #[test]
    fn oversized_vocab_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            vocab_size: 33,
            ..SynthSpec::default()
        };
        assert!(synth_generate(dir.path(), 1, 0, &spec).is_err());
    }
}
