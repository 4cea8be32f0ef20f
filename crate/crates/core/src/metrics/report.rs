use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use super::edit::{edit_distance, AlignOp, EditOps};
use super::tokens::{parse_token, Category, Encoding};
use crate::error::{Error, Result};

/// A ground-truth / prediction token-sequence pair.
pub type Pair = (Vec<String>, Vec<String>);

pub fn align_all(pairs: &[Pair]) -> Vec<EditOps<String>> {
    pairs.par_iter().map(|(gt, pred)| edit_distance(gt, pred)).collect()
}

/// Returns `(SeER%, SyER%)`.
pub fn sequence_metrics(pairs: &[Pair]) -> Result<(f64, f64)> {
    if pairs.is_empty() {
        return Err(Error::Metric("no sequence pairs".into()));
    }
    let distances: Vec<usize> = pairs
        .par_iter()
        .map(|(gt, pred)| edit_distance(gt, pred).distance)
        .collect();
    rates_from_distances(&distances, pairs.iter().map(|(gt, _)| gt.len()))
}

fn rates_from_distances(distances: &[usize], gt_lens: impl Iterator<Item = usize>) -> Result<(f64, f64)> {
    let total_gt: usize = gt_lens.sum();
    if total_gt == 0 {
        return Err(Error::Metric("all ground-truth sequences are empty".into()));
    }
    let wrong = distances.iter().filter(|&&d| d > 0).count();
    let seer = 100.0 * wrong as f64 / distances.len() as f64;
    let syer = 100.0 * distances.iter().sum::<usize>() as f64 / total_gt as f64;
    Ok((seer, syer))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoteAccuracy {
    pub pitch: f64,
    pub note_type: f64,
    pub note: f64,
}

/// Pitch, type and full-note accuracy over ground-truth note-bearing tokens.
/// A deleted note, or one aligned to a non-note, counts as wrong in all three.
pub fn note_accuracies(alignments: &[EditOps<String>], encoding: Encoding) -> Result<NoteAccuracy> {
    let (mut total, mut pitch_ok, mut type_ok, mut both_ok) = (0usize, 0usize, 0usize, 0usize);
    for ops in alignments {
        for op in &ops.alignment {
            let (gt, pred) = match op {
                AlignOp::Match(s) => (s, Some(s)),
                AlignOp::Substitute { gt, pred } => (gt, Some(pred)),
                AlignOp::Delete(s) => (s, None),
                AlignOp::Insert(_) => continue,
            };
            let g = parse_token(gt, encoding);
            if !g.category.carries_pitch() {
                continue;
            }
            total += 1;
            let Some(p) = pred.map(|p| parse_token(p, encoding)) else {
                continue;
            };
            let pitch = p.pitch.is_some() && p.pitch == g.pitch;
            let ty = p.note_type.is_some() && p.note_type == g.note_type;
            pitch_ok += usize::from(pitch);
            type_ok += usize::from(ty);
            both_ok += usize::from(pitch && ty);
        }
    }
    if total == 0 {
        return Err(Error::Metric("ground truth contains no notes".into()));
    }
    let pct = |k: usize| 100.0 * k as f64 / total as f64;
    Ok(NoteAccuracy {
        pitch: pct(pitch_ok),
        note_type: pct(type_ok),
        note: pct(both_ok),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OmrNedRow {
    pub category: String,
    pub insertions: u64,
    pub deletions: u64,
    pub predicted: u64,
    pub ground_truth: u64,
    pub omr_ned: f64,
    pub error_share: f64,
}

impl OmrNedRow {
    /// Builds a row from raw counts; `total_errors` is ΣI+ΣD over all rows.
    pub fn from_counts(category: impl Into<String>, i: u64, d: u64, n1: u64, n2: u64, total_errors: u64) -> Self {
        OmrNedRow {
            category: category.into(),
            insertions: i,
            deletions: d,
            predicted: n1,
            ground_truth: n2,
            omr_ned: omr_ned(i, d, n1, n2),
            error_share: if total_errors == 0 {
                0.0
            } else {
                100.0 * (i + d) as f64 / total_errors as f64
            },
        }
    }
}

/// `100·(I+D)/(N1+N2)`, zero when both counts are zero.
pub fn omr_ned(i: u64, d: u64, n1: u64, n2: u64) -> f64 {
    if n1 + n2 == 0 {
        0.0
    } else {
        100.0 * (i + d) as f64 / (n1 + n2) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OmrNedReport {
    pub rows: Vec<OmrNedRow>,
    pub overall: f64,
}

#[derive(Default, Clone, Copy)]
struct Counts {
    i: u64,
    d: u64,
    n1: u64,
    n2: u64,
}

/// Per-category insertion/deletion analysis. A substitution counts as a
/// deletion in the ground-truth token's category plus an insertion in the
/// predicted token's category. Rows are sorted by category name.
pub fn omr_ned_report(alignments: &[EditOps<String>], encoding: Encoding) -> OmrNedReport {
    let mut counts: BTreeMap<Category, Counts> = BTreeMap::new();
    let cat = |t: &str| parse_token(t, encoding).category;
    for ops in alignments {
        for op in &ops.alignment {
            match op {
                AlignOp::Match(s) => {
                    let c = counts.entry(cat(s)).or_default();
                    c.n1 += 1;
                    c.n2 += 1;
                }
                AlignOp::Substitute { gt, pred } => {
                    let g = counts.entry(cat(gt)).or_default();
                    g.n2 += 1;
                    g.d += 1;
                    let p = counts.entry(cat(pred)).or_default();
                    p.n1 += 1;
                    p.i += 1;
                }
                AlignOp::Delete(s) => {
                    let c = counts.entry(cat(s)).or_default();
                    c.n2 += 1;
                    c.d += 1;
                }
                AlignOp::Insert(s) => {
                    let c = counts.entry(cat(s)).or_default();
                    c.n1 += 1;
                    c.i += 1;
                }
            }
        }
    }
    let total: Counts = counts.values().fold(Counts::default(), |a, c| Counts {
        i: a.i + c.i,
        d: a.d + c.d,
        n1: a.n1 + c.n1,
        n2: a.n2 + c.n2,
    });
    let errors = total.i + total.d;
    let mut rows: Vec<OmrNedRow> = counts
        .into_iter()
        .map(|(k, c)| OmrNedRow::from_counts(k.name(), c.i, c.d, c.n1, c.n2, errors))
        .collect();
    rows.sort_by(|a, b| a.category.cmp(&b.category));
    OmrNedReport {
        rows,
        overall: omr_ned(total.i, total.d, total.n1, total.n2),
    }
}

impl fmt::Display for OmrNedReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<16} {:>8} {:>8} {:>10} {:>10} {:>10} {:>8}",
            "Category", "I", "D", "N1", "N2", "OMR-NED%", "Errors%"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<16} {:>8} {:>8} {:>10} {:>10} {:>10.2} {:>8.2}",
                r.category, r.insertions, r.deletions, r.predicted, r.ground_truth, r.omr_ned, r.error_share
            )?;
        }
        write!(f, "{:<16} {:>60.2}", "Overall", self.overall)
    }
}

/// Every evaluation number for one set of pairs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub sequences: usize,
    pub seer: f64,
    pub syer: f64,
    pub notes: Option<NoteAccuracy>,
    pub omr_ned: OmrNedReport,
}

pub fn evaluate_pairs(pairs: &[Pair], encoding: Encoding) -> Result<MetricsReport> {
    if pairs.is_empty() {
        return Err(Error::Metric("no sequence pairs".into()));
    }
    let alignments = align_all(pairs);
    let distances: Vec<usize> = alignments.iter().map(|a| a.distance).collect();
    let (seer, syer) = rates_from_distances(&distances, pairs.iter().map(|(gt, _)| gt.len()))?;
    Ok(MetricsReport {
        sequences: pairs.len(),
        seer,
        syer,
        notes: note_accuracies(&alignments, encoding).ok(),
        omr_ned: omr_ned_report(&alignments, encoding),
    })
}

impl MetricsReport {
    /// Flat `key=value` lines, stable across runs.
    pub fn summary_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("sequences={}", self.sequences),
            format!("seer={:.4}", self.seer),
            format!("syer={:.4}", self.syer),
        ];
        match self.notes {
            Some(n) => {
                lines.push(format!("pitch_acc={:.4}", n.pitch));
                lines.push(format!("type_acc={:.4}", n.note_type));
                lines.push(format!("note_acc={:.4}", n.note));
            }
            None => lines.push("note_acc=n/a".into()),
        }
        lines.push(format!("omr_ned={:.4}", self.omr_ned.overall));
        lines
    }
}
