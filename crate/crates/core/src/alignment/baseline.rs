use std::collections::BTreeSet;

use super::eval::evaluate_alignment;
use crate::nn::{cosine, HashedEncoder};
use crate::num::Real;
use crate::text::word_tokens;

/// Jaccard index of the lowercased alphanumeric word sets; 0 when both are
/// empty.
pub fn jaccard_baseline(target_text: &str, observer_text: &str) -> f64 {
    let a: BTreeSet<String> = word_tokens(target_text).into_iter().collect();
    let b: BTreeSet<String> = word_tokens(observer_text).into_iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Cosine similarity of the two encodings mapped to [0, 1] as `(1 + cos) / 2`.
pub fn similarity_baseline<T: Real>(target_text: &str, observer_text: &str, encoder: &HashedEncoder<T>) -> f64 {
    let c = cosine(&encoder.encode(target_text), &encoder.encode(observer_text)).as_f64();
    ((1.0 + c) / 2.0).clamp(0.0, 1.0)
}

/// Candidate thresholds: midpoints between consecutive sorted unique scores,
/// or the score itself when all scores are equal.
pub fn threshold_candidates(scores: &[f64]) -> Vec<f64> {
    let mut unique: Vec<f64> = scores.iter().copied().filter(|s| !s.is_nan()).collect();
    unique.sort_by(f64::total_cmp);
    unique.dedup();
    match unique.len() {
        0 => Vec::new(),
        1 => unique,
        _ => unique.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect(),
    }
}

/// Threshold with the highest binary F1 under `score >= threshold`; ties go
/// to the lower threshold. `None` when there are no scores.
pub fn fit_threshold(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "one label per score");
    let mut best: Option<(f64, f64)> = None;
    for t in threshold_candidates(scores) {
        let preds: Vec<bool> = scores.iter().map(|&s| s >= t).collect();
        let f1 = evaluate_alignment::<f64>(&preds, labels).expect("equal lengths").f1;
        if best.is_none_or(|(bf, _)| f1 > bf) {
            best = Some((f1, t));
        }
    }
    best.map(|(_, t)| t)
}
