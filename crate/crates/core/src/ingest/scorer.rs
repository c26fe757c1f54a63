use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::filter::FilterScores;
use crate::data::{read_jsonl, CodecError};
use crate::text::word_tokens;

/// Scores a candidate pair for the empathy pre-filter. Implementations must
/// be deterministic for a fixed model state.
pub trait EmpathyScorer: Send + Sync {
    fn score(&self, target_text: &str, observer_text: &str) -> FilterScores;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerTask {
    Distress,
    Condolence,
    Empathy,
}

/// One labeled fixture line. `label` is 0/1 for distress and condolence and a
/// 1..=5 rating for empathy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScorerExample {
    pub task: ScorerTask,
    pub text: String,
    pub label: f64,
}

const BUILTIN_FIXTURE: &str = include_str!("../../data/scorer_fixture.jsonl");

/// Logistic regression over word-presence features.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BowLogistic {
    pub weights: BTreeMap<String, f64>,
    pub bias: f64,
}

fn features(text: &str) -> Vec<String> {
    let mut toks = word_tokens(text);
    toks.sort();
    toks.dedup();
    toks
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl BowLogistic {
    /// Full-batch gradient descent on cross-entropy with soft targets in
    /// [0, 1]. Deterministic: no sampling is involved.
    pub fn fit(examples: &[(String, f64)], epochs: usize, learning_rate: f64, l2: f64) -> Self {
        let feats: Vec<Vec<String>> = examples.iter().map(|(t, _)| features(t)).collect();
        let mut model = BowLogistic::default();
        for f in feats.iter().flatten() {
            model.weights.entry(f.clone()).or_insert(0.0);
        }
        let n = examples.len().max(1) as f64;
        for _ in 0..epochs {
            let mut grad: BTreeMap<&str, f64> = BTreeMap::new();
            let mut grad_bias = 0.0;
            for (f, (_, y)) in feats.iter().zip(examples) {
                let err = model.prob_of(f) - y;
                grad_bias += err;
                for tok in f {
                    *grad.entry(tok.as_str()).or_insert(0.0) += err * Self::scale(f.len());
                }
            }
            for (tok, w) in model.weights.iter_mut() {
                let g = grad.get(tok.as_str()).copied().unwrap_or(0.0) / n + l2 * *w;
                *w -= learning_rate * g;
            }
            model.bias -= learning_rate * grad_bias / n;
        }
        model
    }

    fn scale(n_features: usize) -> f64 {
        1.0 / (n_features.max(1) as f64).sqrt()
    }

    fn prob_of(&self, feats: &[String]) -> f64 {
        let s = Self::scale(feats.len());
        let z: f64 = self.bias + feats.iter().filter_map(|t| self.weights.get(t)).map(|w| w * s).sum::<f64>();
        sigmoid(z)
    }

    pub fn probability(&self, text: &str) -> f64 {
        self.prob_of(&features(text))
    }
}

/// Lightweight stand-in for the external distress/condolence/empathy
/// classifiers: three bag-of-words logistic models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LexiconScorer {
    pub distress: BowLogistic,
    pub condolence: BowLogistic,
    pub empathy: BowLogistic,
}

impl LexiconScorer {
    pub fn train(examples: &[ScorerExample]) -> Self {
        let pick = |task: ScorerTask| -> Vec<(String, f64)> {
            examples
                .iter()
                .filter(|e| e.task == task)
                .map(|e| {
                    let y = match task {
                        ScorerTask::Empathy => ((e.label - 1.0) / 4.0).clamp(0.0, 1.0),
                        _ => e.label.clamp(0.0, 1.0),
                    };
                    (e.text.clone(), y)
                })
                .collect()
        };
        LexiconScorer {
            distress: BowLogistic::fit(&pick(ScorerTask::Distress), 400, 2.0, 1e-3),
            condolence: BowLogistic::fit(&pick(ScorerTask::Condolence), 400, 2.0, 1e-3),
            empathy: BowLogistic::fit(&pick(ScorerTask::Empathy), 400, 2.0, 1e-3),
        }
    }

    pub fn train_from_file(path: &Path) -> Result<Self, CodecError> {
        Ok(Self::train(&read_jsonl::<ScorerExample>(path)?))
    }

    /// Scorer trained on the fixture shipped with the crate.
    pub fn builtin() -> Self {
        let examples: Vec<ScorerExample> = BUILTIN_FIXTURE
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).expect("builtin fixture parses"))
            .collect();
        Self::train(&examples)
    }
}

impl EmpathyScorer for LexiconScorer {
    fn score(&self, target_text: &str, observer_text: &str) -> FilterScores {
        FilterScores {
            p_distress: self.distress.probability(target_text),
            p_condolence: self.condolence.probability(observer_text),
            empathy_rating: 1.0 + 4.0 * self.empathy.probability(observer_text),
        }
    }
}
