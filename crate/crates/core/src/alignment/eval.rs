use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution};
use serde::{Deserialize, Serialize};

use crate::num::{safe_div, Field};

/// Binary metrics for the aligned class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryReport<T> {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: u64,
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{predictions} predictions for {gold} gold labels")]
pub struct LengthMismatch {
    pub predictions: usize,
    pub gold: usize,
}

pub fn evaluate_alignment<T: Field>(predictions: &[bool], gold: &[bool]) -> Result<BinaryReport<T>, LengthMismatch> {
    if predictions.len() != gold.len() {
        return Err(LengthMismatch { predictions: predictions.len(), gold: gold.len() });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &g) in predictions.iter().zip(gold) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let precision = safe_div(T::from_count(tp), T::from_count(tp + fp));
    let recall = safe_div(T::from_count(tp), T::from_count(tp + fn_));
    let f1 = crate::appraisal::f1_score(precision, recall);
    Ok(BinaryReport { true_positives: tp, false_positives: fp, false_negatives: fn_, true_negatives: tn, precision, recall, f1 })
}

/// Random predictions drawn with the positive rate of `gold`.
pub fn random_alignment_baseline(gold: &[bool], seed: u64) -> Vec<bool> {
    let rate = gold.iter().filter(|&&g| g).count() as f64 / gold.len().max(1) as f64;
    let coin = Bernoulli::new(rate).expect("rate in [0, 1]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gold.iter().map(|_| coin.sample(&mut rng)).collect()
}
