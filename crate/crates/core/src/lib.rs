//! Empathetic-alignment toolkit: appraisal span classification, Target to
//! Observer span alignment, corpus-scale labeling and the statistical
//! analyses built on top of them.

pub mod alignment;
pub mod analysis;
pub mod appraisal;
pub mod data;
pub mod ingest;
pub mod nn;
pub mod num;
pub mod persist;
pub mod pipeline;
pub mod synth;
pub mod text;

pub use data::{AppraisalLabel, GoldInstance, Role, Span, TargetObserverPair};

/// Sentence classifier at training precision.
pub type AppraisalClassifier = appraisal::AppraisalModel<f32>;
/// Twin-encoder alignment scorer at training precision.
pub type AlignmentClassifier = alignment::AlignmentModel<f32>;
/// Appraisal metrics as floating point.
pub type AppraisalReport = appraisal::EvalReport<f64>;
/// Alignment metrics as floating point.
pub type AlignmentReport = alignment::BinaryReport<f64>;
