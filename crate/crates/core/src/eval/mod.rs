//! Technical assessment: pair verification, store stress timing and the
//! synthetic glyph corpus used for desk-scale fixtures.

pub mod audio;
mod bench;
mod dbbench;
mod fixtures;
mod glyph;
mod pairs;
pub mod storecheck;

use thiserror::Error;

pub use bench::{detection_benchmark, identity_benchmark, DetectionReport, IdentityReport, EVAL_JITTER_BASE};
pub use dbbench::{bench_db, DbBenchReport, LatencyStats};
pub use fixtures::{face_window, reference_detector, training_windows};
pub use glyph::{generate_background, generate_face_glyph, GlyphParams, Jitter, Placement, MIN_CANVAS};
pub use pairs::{
    accuracy_at, eval_pairs, parse_pairs, sweep, PairEntry, PairList, PairResult, RocPoint, VerificationReport,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("pair list line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing image {}", .0.display())]
    MissingImage(std::path::PathBuf),
    #[error("cannot decode {}: {source}", path.display())]
    Decode {
        path: std::path::PathBuf,
        source: crate::ingestion::DecodeError,
    },
    #[error("no pair could be scored (faces not detected)")]
    NoUsablePairs,
    #[error(transparent)]
    Vision(#[from] crate::vision::VisionError),
    #[error(transparent)]
    Store(#[from] crate::store::StoreError),
}
