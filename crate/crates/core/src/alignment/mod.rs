//! Span-pair alignment: dataset construction, the twin-encoder scorer,
//! overlap and similarity baselines, and binary metrics.

mod baseline;
mod eval;
mod model;
mod pairs;

pub use baseline::{fit_threshold, jaccard_baseline, similarity_baseline, threshold_candidates};
pub use eval::{evaluate_alignment, random_alignment_baseline, BinaryReport, LengthMismatch};
pub use model::{score_pair, train_alignment, AlignmentModel, AlignmentModelConfig, MODEL_FILE};
pub use pairs::{build_pair_dataset, is_excluded, PairDatasetError, SpanPairInstance, SpanRef, EXCLUDED_LABEL_PAIRS};
