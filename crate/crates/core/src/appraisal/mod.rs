//! Sentence-level appraisal classification: label projection, training,
//! inference, baselines and metrics.

mod eval;
mod model;
mod projection;

pub use eval::{evaluate_appraisal, evaluate_labels, f1_score, report_from_confusion, EvalError, EvalReport, LabelMetrics};
pub use model::{
    default_verbalizers, predict_appraisals, train_appraisal, AppraisalHead, AppraisalModel, AppraisalModelConfig, ModelMode,
    SentencePrediction, MODEL_FILE,
};
pub use projection::{fold_label, project_corpus, project_spans_to_sentences, SentenceInstance};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::AppraisalLabel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Uniform over the nine model classes.
    Random { seed: u64 },
    /// Always the given label.
    Majority { label: AppraisalLabel },
}

impl Baseline {
    /// Majority baseline for the modal training label; ties go to the
    /// earlier model class. `None` for an empty training set.
    pub fn majority_of(train: &[SentenceInstance]) -> Option<Self> {
        let mut counts = [0usize; 9];
        for s in train {
            counts[fold_label(s.gold_label).model_class_index().expect("model class")] += 1;
        }
        let best = (0..9).rev().max_by_key(|&c| counts[c])?;
        (counts[best] > 0).then_some(Baseline::Majority { label: AppraisalLabel::MODEL_CLASSES[best] })
    }
}

pub fn baseline_predict(n: usize, strategy: Baseline) -> Vec<AppraisalLabel> {
    match strategy {
        Baseline::Majority { label } => vec![label; n],
        Baseline::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| AppraisalLabel::MODEL_CLASSES[rng.random_range(0..9)]).collect()
        }
    }
}
