use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::projection::{fold_label, SentenceInstance};
use crate::data::AppraisalLabel;
use crate::num::{safe_div, Field};

const K: usize = AppraisalLabel::MODEL_CLASSES.len();

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("{predictions} predictions for {gold} gold instances")]
    LengthMismatch { predictions: usize, gold: usize },
    #[error("prediction {index} is for `{predicted}` but gold is `{gold}`")]
    IdMismatch { index: usize, predicted: String, gold: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
    pub support: u64,
}

/// Nine-way sentence classification metrics. `confusion[g][p]` counts gold
/// class `g` predicted as `p`, indexed by [`AppraisalLabel::MODEL_CLASSES`].
/// Classes absent from gold have recall 0 and still count in the macro
/// averages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport<T> {
    pub macro_precision: T,
    pub macro_recall: T,
    pub macro_f1: T,
    pub per_label: BTreeMap<AppraisalLabel, LabelMetrics<T>>,
    pub confusion: Vec<Vec<u64>>,
}

fn class(label: AppraisalLabel) -> usize {
    fold_label(label).model_class_index().expect("folded label is a model class")
}

pub fn f1_score<T: Field>(precision: T, recall: T) -> T {
    let two = T::one() + T::one();
    safe_div(two * precision * recall, precision + recall)
}

/// Metrics from parallel label vectors. Attentional Activity is folded into
/// `NoLabel` on both sides.
pub fn evaluate_labels<T: Field>(predictions: &[AppraisalLabel], gold: &[AppraisalLabel]) -> Result<EvalReport<T>, EvalError> {
    if predictions.len() != gold.len() {
        return Err(EvalError::LengthMismatch { predictions: predictions.len(), gold: gold.len() });
    }
    let mut confusion = vec![vec![0u64; K]; K];
    for (&p, &g) in predictions.iter().zip(gold) {
        confusion[class(g)][class(p)] += 1;
    }
    Ok(report_from_confusion(confusion))
}

pub fn report_from_confusion<T: Field>(confusion: Vec<Vec<u64>>) -> EvalReport<T> {
    let mut per_label = BTreeMap::new();
    let (mut sp, mut sr, mut sf) = (T::zero(), T::zero(), T::zero());
    for (c, &label) in AppraisalLabel::MODEL_CLASSES.iter().enumerate() {
        let tp = confusion[c][c];
        let gold_total: u64 = confusion[c].iter().sum();
        let pred_total: u64 = confusion.iter().map(|row| row[c]).sum();
        let precision = safe_div(T::from_count(tp), T::from_count(pred_total));
        let recall = safe_div(T::from_count(tp), T::from_count(gold_total));
        let f1 = f1_score(precision, recall);
        sp = sp + precision;
        sr = sr + recall;
        sf = sf + f1;
        per_label.insert(label, LabelMetrics { precision, recall, f1, support: gold_total });
    }
    let k = T::from_count(K as u64);
    EvalReport { macro_precision: sp / k, macro_recall: sr / k, macro_f1: sf / k, per_label, confusion }
}

/// Metrics for predictions keyed by sentence id; the ids must match the
/// gold instances position by position.
pub fn evaluate_appraisal<T: Field>(
    predictions: &[(String, AppraisalLabel)],
    gold: &[SentenceInstance],
) -> Result<EvalReport<T>, EvalError> {
    if predictions.len() != gold.len() {
        return Err(EvalError::LengthMismatch { predictions: predictions.len(), gold: gold.len() });
    }
    for (index, ((id, _), g)) in predictions.iter().zip(gold).enumerate() {
        let gid = g.id();
        if *id != gid {
            return Err(EvalError::IdMismatch { index, predicted: id.clone(), gold: gid });
        }
    }
    let p: Vec<_> = predictions.iter().map(|(_, l)| *l).collect();
    let g: Vec<_> = gold.iter().map(|s| s.gold_label).collect();
    evaluate_labels(&p, &g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::AppraisalLabel::*;
    use num_rational::Ratio;
    use proptest::prelude::*;

    type Q = Ratio<i64>;

    // Per-class counts written out directly from the label lists.
    fn brute_force(pred: &[usize], gold: &[usize]) -> (Q, Q, Q, Vec<(Q, Q, Q)>) {
        let mut per = Vec::new();
        for c in 0..K {
            let tp = pred.iter().zip(gold).filter(|(p, g)| **p == c && **g == c).count() as i64;
            let fp = pred.iter().zip(gold).filter(|(p, g)| **p == c && **g != c).count() as i64;
            let fn_ = pred.iter().zip(gold).filter(|(p, g)| **p != c && **g == c).count() as i64;
            let p = if tp + fp == 0 { Q::from_integer(0) } else { Q::new(tp, tp + fp) };
            let r = if tp + fn_ == 0 { Q::from_integer(0) } else { Q::new(tp, tp + fn_) };
            let f = if p + r == Q::from_integer(0) { Q::from_integer(0) } else { Q::from_integer(2) * p * r / (p + r) };
            per.push((p, r, f));
        }
        let n = Q::from_integer(K as i64);
        let mp = per.iter().map(|x| x.0).sum::<Q>() / n;
        let mr = per.iter().map(|x| x.1).sum::<Q>() / n;
        let mf = per.iter().map(|x| x.2).sum::<Q>() / n;
        (mp, mr, mf, per)
    }

    fn labels(idx: &[usize]) -> Vec<AppraisalLabel> {
        idx.iter().map(|&i| AppraisalLabel::MODEL_CLASSES[i]).collect()
    }

    #[test]
    fn perfect_predictions_score_one_on_present_classes() {
        let all: Vec<_> = AppraisalLabel::MODEL_CLASSES.to_vec();
        let r: EvalReport<f64> = evaluate_labels(&all, &all).unwrap();
        assert_eq!(r.macro_f1, 1.0);
    }

    // Twelve instances; counts worked out by hand:
    // Advice tp=2 fp=1 fn=1, Certainty tp=2 fp=1 fn=1, NoLabel tp=3 fp=1 fn=1,
    // Trope tp=0 fp=0 fn=1, Pleasantness tp=1 fp=1 fn=0.
    #[test]
    fn twelve_instance_fixture() {
        let gold =
            [Advice, Advice, Advice, Certainty, Certainty, NoLabel, NoLabel, NoLabel, NoLabel, Trope, Pleasantness, Certainty];
        let pred = [
            Advice,
            Advice,
            NoLabel,
            Certainty,
            Pleasantness,
            NoLabel,
            NoLabel,
            NoLabel,
            Advice,
            Certainty,
            Pleasantness,
            Certainty,
        ];
        let r: EvalReport<Q> = evaluate_labels(&pred, &gold).unwrap();
        let pl = |l: AppraisalLabel| r.per_label[&l];
        assert_eq!(pl(Advice).precision, Q::new(2, 3));
        assert_eq!(pl(Advice).recall, Q::new(2, 3));
        assert_eq!(pl(Certainty).precision, Q::new(2, 3));
        assert_eq!(pl(Certainty).recall, Q::new(2, 3));
        assert_eq!(pl(NoLabel).precision, Q::new(3, 4));
        assert_eq!(pl(NoLabel).recall, Q::new(3, 4));
        assert_eq!(pl(Trope).f1, Q::from_integer(0));
        assert_eq!(pl(Pleasantness).precision, Q::new(1, 2));
        assert_eq!(pl(Pleasantness).recall, Q::from_integer(1));
        assert_eq!(pl(Pleasantness).f1, Q::new(2, 3));
        // F1s: 2/3, 2/3, 3/4, 0, 2/3, and four absent classes at 0.
        assert_eq!(r.macro_f1, (Q::new(2, 3) * 3 + Q::new(3, 4)) / 9);
        assert_eq!(r.confusion.iter().flatten().sum::<u64>(), 12);
    }

    #[test]
    fn mismatches_error() {
        assert!(matches!(evaluate_labels::<f64>(&[Advice], &[]), Err(EvalError::LengthMismatch { .. })));
        let g = SentenceInstance {
            pair_id: "a-b".into(),
            role: crate::data::Role::Target,
            sent_index: 0,
            start: 0,
            end: 1,
            text: "x".into(),
            gold_label: Advice,
            multi_label: false,
        };
        let err = evaluate_appraisal::<f64>(&[("a-b:target:s1".into(), Advice)], &[g]).unwrap_err();
        assert!(matches!(err, EvalError::IdMismatch { index: 0, .. }));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn matches_brute_force_exactly(pairs in prop::collection::vec((0usize..K, 0usize..K), 0..=50)) {
            let pred: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let gold: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let r: EvalReport<Q> = evaluate_labels(&labels(&pred), &labels(&gold)).unwrap();
            let (mp, mr, mf, per) = brute_force(&pred, &gold);
            prop_assert_eq!(r.macro_precision, mp);
            prop_assert_eq!(r.macro_recall, mr);
            prop_assert_eq!(r.macro_f1, mf);
            for (c, l) in AppraisalLabel::MODEL_CLASSES.iter().enumerate() {
                let m = r.per_label[l];
                prop_assert_eq!((m.precision, m.recall, m.f1), per[c]);
            }
        }
    }
}
