use serde::{Deserialize, Serialize};

use crate::data::{validate_instance, AppraisalLabel, GoldInstance, PairKeyed, Role, Span, ValidationReport};
use crate::text::segment_sentences;

/// One sentence with its projected gold label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceInstance {
    pub pair_id: String,
    pub role: Role,
    pub sent_index: usize,
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub gold_label: AppraisalLabel,
    /// The sentence overlapped spans of more than one (folded) label before
    /// the reduction to a single label.
    #[serde(default)]
    pub multi_label: bool,
}

impl SentenceInstance {
    /// `<pair_id>:<target|observer>:s<index>`
    pub fn id(&self) -> String {
        let role = match self.role {
            Role::Target => "target",
            Role::Observer => "observer",
        };
        format!("{}:{role}:s{}", self.pair_id, self.sent_index)
    }
}

impl PairKeyed for SentenceInstance {
    fn pair_key(&self) -> &str {
        &self.pair_id
    }
}

/// Labels the classifier sees: Attentional Activity is not modeled.
pub fn fold_label(label: AppraisalLabel) -> AppraisalLabel {
    match label {
        AppraisalLabel::AttentionalActivity => AppraisalLabel::NoLabel,
        other => other,
    }
}

fn overlap(span: &Span, start: usize, end: usize) -> usize {
    end.min(span.end).saturating_sub(start.max(span.start))
}

/// Reduces span annotations to one label per sentence. The winning span
/// covers the most characters of the sentence; ties go to the earliest
/// start, then the earliest end, then label order, so the result never
/// depends on the order of spans in the input.
pub fn project_spans_to_sentences(instance: &GoldInstance) -> Result<Vec<SentenceInstance>, ValidationReport> {
    let report = validate_instance(instance);
    if !report.is_valid() {
        return Err(report);
    }
    let mut out = Vec::new();
    for role in [Role::Target, Role::Observer] {
        let spans: Vec<&Span> = instance.spans_of(role).collect();
        for (sent_index, sentence) in segment_sentences(instance.pair.text(role)).into_iter().enumerate() {
            let overlapping: Vec<(&Span, usize)> =
                spans.iter().map(|s| (*s, overlap(s, sentence.start, sentence.end))).filter(|(_, n)| *n > 0).collect();
            let best = overlapping
                .iter()
                .min_by_key(|(s, n)| (std::cmp::Reverse(*n), s.start, s.end, s.label))
                .map(|(s, _)| fold_label(s.label))
                .unwrap_or(AppraisalLabel::NoLabel);
            let first = overlapping.first().map(|(s, _)| fold_label(s.label));
            let multi_label = overlapping.iter().any(|(s, _)| Some(fold_label(s.label)) != first);
            out.push(SentenceInstance {
                pair_id: instance.pair.pair_id.clone(),
                role,
                sent_index,
                start: sentence.start,
                end: sentence.end,
                text: sentence.text,
                gold_label: best,
                multi_label,
            });
        }
    }
    Ok(out)
}

/// Projects a whole corpus, Target and Observer sentences pooled.
pub fn project_corpus(corpus: &[GoldInstance]) -> Result<Vec<SentenceInstance>, ValidationReport> {
    let mut out = Vec::new();
    for instance in corpus {
        out.extend(project_spans_to_sentences(instance)?);
    }
    Ok(out)
}
