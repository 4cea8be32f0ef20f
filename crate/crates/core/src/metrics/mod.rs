//! Edit-distance alignment, sequence/symbol error rates, note accuracies and
//! the per-category insertion/deletion (OMR-NED) analysis.

mod edit;
mod report;
mod tokens;

pub use edit::{edit_distance, AlignOp, EditOps};
pub use report::{
    align_all, evaluate_pairs, note_accuracies, omr_ned, omr_ned_report, sequence_metrics, MetricsReport,
    NoteAccuracy, OmrNedReport, OmrNedRow, Pair,
};
pub use tokens::{parse_token, Category, Encoding, NoteFields};
