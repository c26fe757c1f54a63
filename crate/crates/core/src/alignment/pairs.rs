use std::collections::HashSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{validate_instance, AppraisalLabel, GoldInstance, PairKeyed, Role, ValidationReport};
use crate::text::slice_chars;

/// Label pairs that are never scored, in either role order.
pub const EXCLUDED_LABEL_PAIRS: [(AppraisalLabel, AppraisalLabel); 3] = [
    (AppraisalLabel::Advice, AppraisalLabel::ObjectiveExperience),
    (AppraisalLabel::Advice, AppraisalLabel::Pleasantness),
    (AppraisalLabel::AnticipatedEffort, AppraisalLabel::ObjectiveExperience),
];

pub fn is_excluded(a: AppraisalLabel, b: AppraisalLabel) -> bool {
    EXCLUDED_LABEL_PAIRS.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanRef {
    pub span_id: String,
    pub text: String,
    pub label: AppraisalLabel,
}

/// A candidate (Target span, Observer span) from one pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanPairInstance {
    pub pair_id: String,
    pub target_span: SpanRef,
    pub observer_span: SpanRef,
    pub is_aligned: bool,
}

impl PairKeyed for SpanPairInstance {
    fn pair_key(&self) -> &str {
        &self.pair_id
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PairDatasetError {
    #[error("invalid instance: {0}")]
    Invalid(ValidationReport),
    #[error("corpus has no alignments")]
    NoPositives,
    #[error("need {needed} negatives but only {available} candidates exist")]
    TooFewNegatives { needed: usize, available: usize },
    #[error("negative ratio must be at least 1")]
    Ratio,
}

/// Every aligned span pair becomes a positive; every other Target x Observer
/// span pair of the same document is a negative candidate. Excluded label
/// pairs are dropped from both. Exactly `ratio * positives` negatives are
/// sampled uniformly across the whole corpus. Output is in corpus order,
/// then Target span order, then Observer span order.
pub fn build_pair_dataset(corpus: &[GoldInstance], ratio: usize, seed: u64) -> Result<Vec<SpanPairInstance>, PairDatasetError> {
    if ratio == 0 {
        return Err(PairDatasetError::Ratio);
    }
    let mut candidates = Vec::new();
    for instance in corpus {
        let report = validate_instance(instance);
        if !report.is_valid() {
            return Err(PairDatasetError::Invalid(report));
        }
        let aligned: HashSet<(&str, &str)> =
            instance.alignments.iter().map(|a| (a.target_span_id.as_str(), a.observer_span_id.as_str())).collect();
        let span_ref = |s: &crate::data::Span| SpanRef {
            span_id: s.span_id.clone(),
            text: slice_chars(instance.pair.text(s.role), s.start, s.end).to_string(),
            label: s.label,
        };
        for t in instance.spans_of(Role::Target) {
            for o in instance.spans_of(Role::Observer) {
                if is_excluded(t.label, o.label) {
                    continue;
                }
                candidates.push(SpanPairInstance {
                    pair_id: instance.pair.pair_id.clone(),
                    target_span: span_ref(t),
                    observer_span: span_ref(o),
                    is_aligned: aligned.contains(&(t.span_id.as_str(), o.span_id.as_str())),
                });
            }
        }
    }
    let positives = candidates.iter().filter(|c| c.is_aligned).count();
    if positives == 0 {
        return Err(PairDatasetError::NoPositives);
    }
    let negative_idx: Vec<usize> = (0..candidates.len()).filter(|&i| !candidates[i].is_aligned).collect();
    let needed = ratio * positives;
    if negative_idx.len() < needed {
        return Err(PairDatasetError::TooFewNegatives { needed, available: negative_idx.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; candidates.len()];
    for k in sample(&mut rng, negative_idx.len(), needed) {
        keep[negative_idx[k]] = true;
    }
    Ok(candidates.into_iter().enumerate().filter(|(i, c)| c.is_aligned || keep[*i]).map(|(_, c)| c).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::fixtures::{instance, pair, span};
    use crate::data::{Alignment, Span};
    use crate::AppraisalLabel::*;

    #[test]
    fn exclusion_is_symmetric() {
        for (a, b) in EXCLUDED_LABEL_PAIRS {
            assert!(is_excluded(a, b) && is_excluded(b, a));
        }
        assert!(!is_excluded(Advice, Certainty));
    }

    // Target with 10 spans, Observer with 10 spans, 3 alignments: 100
    // candidates, 97 negatives, of which 33 are kept.
    fn wide(seed_labels: bool) -> GoldInstance {
        let target: String = "abcde ".repeat(10);
        let observer = target.clone();
        let label = if seed_labels { Certainty } else { Trope };
        let mut spans: Vec<Span> = (0..10).map(|k| span("p-q", Role::Target, k, 6 * k, 6 * k + 5, Certainty)).collect();
        spans.extend((0..10).map(|k| span("p-q", Role::Observer, k, 6 * k, 6 * k + 5, label)));
        let alignments = (0..3)
            .map(|k| Alignment { observer_span_id: spans[10 + k].span_id.clone(), target_span_id: spans[k].span_id.clone() })
            .collect();
        GoldInstance { pair: pair("p-q", &target, &observer), spans, alignments, adjudicated_by: "a".into(), phase1_batch: 1 }
    }

    #[test]
    fn downsamples_to_exact_ratio() {
        let out = build_pair_dataset(&[wide(true)], 11, 0).unwrap();
        assert_eq!(out.iter().filter(|p| p.is_aligned).count(), 3);
        assert_eq!(out.iter().filter(|p| !p.is_aligned).count(), 33);
        assert_eq!(out, build_pair_dataset(&[wide(true)], 11, 0).unwrap());
        assert_ne!(out, build_pair_dataset(&[wide(true)], 11, 1).unwrap());
    }

    #[test]
    fn excluded_pairs_dropped_and_errors() {
        let inst = instance("a-b");
        // Target: ObjectiveExperience, Pleasantness; Observer: Advice. Both excluded.
        assert_eq!(build_pair_dataset(&[inst], 11, 0), Err(PairDatasetError::NoPositives));
        assert!(matches!(build_pair_dataset(&[wide(true)], 40, 0), Err(PairDatasetError::TooFewNegatives { needed: 120, .. })));
    }
}
