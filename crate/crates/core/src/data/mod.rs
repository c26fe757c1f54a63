//! Domain model for annotated Target/Observer conversations.
//!
//! Offsets into texts are Unicode code-point offsets (`start` inclusive,
//! `end` exclusive), never byte offsets.

mod codec;
mod split;
mod stats;
mod validate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use codec::{
    read_corpus, read_jsonl, read_pairs, write_corpus, write_jsonl, write_pairs, CodecError, CorpusMeta, OFFSET_UNIT,
    SCHEMA_VERSION,
};
pub use split::{make_splits, PairKeyed, SplitError, Splits};
pub use stats::{compute_stats, CorpusStats, LabelCounts};
pub use validate::{validate_instance, ValidationReport, Violation};

/// Span categories. The first nine are annotatable; `NoLabel` only occurs on
/// sentence-level instances.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AppraisalLabel {
    Pleasantness,
    SituationalControl,
    AnticipatedEffort,
    SelfOtherAgency,
    Certainty,
    AttentionalActivity,
    ObjectiveExperience,
    Advice,
    Trope,
    NoLabel,
}

impl AppraisalLabel {
    pub const ALL: [AppraisalLabel; 10] = [
        AppraisalLabel::Pleasantness,
        AppraisalLabel::SituationalControl,
        AppraisalLabel::AnticipatedEffort,
        AppraisalLabel::SelfOtherAgency,
        AppraisalLabel::Certainty,
        AppraisalLabel::AttentionalActivity,
        AppraisalLabel::ObjectiveExperience,
        AppraisalLabel::Advice,
        AppraisalLabel::Trope,
        AppraisalLabel::NoLabel,
    ];

    /// Labels that may appear on gold spans.
    pub const ANNOTATABLE: [AppraisalLabel; 9] = [
        AppraisalLabel::Pleasantness,
        AppraisalLabel::SituationalControl,
        AppraisalLabel::AnticipatedEffort,
        AppraisalLabel::SelfOtherAgency,
        AppraisalLabel::Certainty,
        AppraisalLabel::AttentionalActivity,
        AppraisalLabel::ObjectiveExperience,
        AppraisalLabel::Advice,
        AppraisalLabel::Trope,
    ];

    /// Classes of the sentence classifier: Attentional Activity is folded
    /// into `NoLabel`.
    pub const MODEL_CLASSES: [AppraisalLabel; 9] = [
        AppraisalLabel::NoLabel,
        AppraisalLabel::Pleasantness,
        AppraisalLabel::AnticipatedEffort,
        AppraisalLabel::Certainty,
        AppraisalLabel::ObjectiveExperience,
        AppraisalLabel::SelfOtherAgency,
        AppraisalLabel::SituationalControl,
        AppraisalLabel::Advice,
        AppraisalLabel::Trope,
    ];

    /// Labels the corpus-scale analyses report on (model output labels
    /// without `NoLabel`).
    pub const ANALYSIS: [AppraisalLabel; 8] = [
        AppraisalLabel::Pleasantness,
        AppraisalLabel::SituationalControl,
        AppraisalLabel::AnticipatedEffort,
        AppraisalLabel::SelfOtherAgency,
        AppraisalLabel::Certainty,
        AppraisalLabel::ObjectiveExperience,
        AppraisalLabel::Advice,
        AppraisalLabel::Trope,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AppraisalLabel::Pleasantness => "Pleasantness",
            AppraisalLabel::SituationalControl => "SituationalControl",
            AppraisalLabel::AnticipatedEffort => "AnticipatedEffort",
            AppraisalLabel::SelfOtherAgency => "SelfOtherAgency",
            AppraisalLabel::Certainty => "Certainty",
            AppraisalLabel::AttentionalActivity => "AttentionalActivity",
            AppraisalLabel::ObjectiveExperience => "ObjectiveExperience",
            AppraisalLabel::Advice => "Advice",
            AppraisalLabel::Trope => "Trope",
            AppraisalLabel::NoLabel => "NoLabel",
        }
    }

    /// Position in [`AppraisalLabel::MODEL_CLASSES`], if the label is a
    /// classifier class.
    pub fn model_class_index(self) -> Option<usize> {
        Self::MODEL_CLASSES.iter().position(|&l| l == self)
    }

    pub fn analysis_index(self) -> Option<usize> {
        Self::ANALYSIS.iter().position(|&l| l == self)
    }
}

impl fmt::Display for AppraisalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown appraisal label `{0}`")]
pub struct UnknownLabel(pub String);

impl FromStr for AppraisalLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AppraisalLabel::ALL.iter().copied().find(|l| l.as_str() == s).ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Target,
    Observer,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Target => "Target",
            Role::Observer => "Observer",
        }
    }

    fn id_tag(self) -> &'static str {
        match self {
            Role::Target => "target",
            Role::Observer => "observer",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairKind {
    #[serde(rename = "post-comment")]
    PostComment,
    #[serde(rename = "comment-comment")]
    CommentComment,
}

/// One Target message and one Observer reply.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "codec::PairWire", from = "codec::PairWire")]
pub struct TargetObserverPair {
    pub pair_id: String,
    pub target_text: String,
    pub observer_text: String,
    pub subreddit: String,
    pub target_author: String,
    pub observer_author: String,
    pub observer_flair: Option<String>,
    pub created_utc_target: i64,
    pub created_utc_observer: i64,
    pub pair_kind: PairKind,
}

impl TargetObserverPair {
    pub fn text(&self, role: Role) -> &str {
        match role {
            Role::Target => &self.target_text,
            Role::Observer => &self.observer_text,
        }
    }

    /// Identifier of the Target message: the part of `pair_id` before the
    /// first `-`, or the whole id when there is none.
    pub fn target_id(&self) -> &str {
        target_id_of(&self.pair_id)
    }
}

pub fn target_id_of(pair_id: &str) -> &str {
    pair_id.split_once('-').map_or(pair_id, |(t, _)| t)
}

/// Canonical pair id for a Target message and an Observer reply.
pub fn pair_id_for(target_id: &str, observer_id: &str) -> String {
    format!("{target_id}-{observer_id}")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub span_id: String,
    pub role: Role,
    pub start: usize,
    pub end: usize,
    pub label: AppraisalLabel,
}

/// `<pair_id>:<role>:<ordinal>`
pub fn span_id(pair_id: &str, role: Role, ordinal: usize) -> String {
    format!("{pair_id}:{}:{ordinal}", role.id_tag())
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Alignment {
    pub observer_span_id: String,
    pub target_span_id: String,
}

/// Finalized annotation for one pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldInstance {
    #[serde(flatten)]
    pub pair: TargetObserverPair,
    pub spans: Vec<Span>,
    pub alignments: Vec<Alignment>,
    pub adjudicated_by: String,
    pub phase1_batch: i64,
}

impl GoldInstance {
    pub fn span(&self, span_id: &str) -> Option<&Span> {
        self.spans.iter().find(|s| s.span_id == span_id)
    }

    pub fn spans_of(&self, role: Role) -> impl Iterator<Item = &Span> {
        self.spans.iter().filter(move |s| s.role == role)
    }
}

impl PairKeyed for GoldInstance {
    fn pair_key(&self) -> &str {
        &self.pair.pair_id
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn pair(id: &str, target: &str, observer: &str) -> TargetObserverPair {
        TargetObserverPair {
            pair_id: id.to_string(),
            target_text: target.to_string(),
            observer_text: observer.to_string(),
            subreddit: "GriefSupport".to_string(),
            target_author: "t_author".to_string(),
            observer_author: "o_author".to_string(),
            observer_flair: None,
            created_utc_target: 1_600_000_000,
            created_utc_observer: 1_600_000_100,
            pair_kind: PairKind::PostComment,
        }
    }

    pub fn span(pair_id: &str, role: Role, ord: usize, start: usize, end: usize, label: AppraisalLabel) -> Span {
        Span { span_id: span_id(pair_id, role, ord), role, start, end, label }
    }

    /// "I lost my dog. It hurts so much." / "I am so sorry. Give it time."
    pub fn instance(id: &str) -> GoldInstance {
        let p = pair(id, "I lost my dog. It hurts so much.", "I am so sorry. Give it time.");
        let spans = vec![
            span(id, Role::Target, 0, 0, 14, AppraisalLabel::ObjectiveExperience),
            span(id, Role::Target, 1, 15, 32, AppraisalLabel::Pleasantness),
            span(id, Role::Observer, 0, 15, 28, AppraisalLabel::Advice),
        ];
        let alignments =
            vec![Alignment { observer_span_id: span_id(id, Role::Observer, 0), target_span_id: span_id(id, Role::Target, 1) }];
        GoldInstance { pair: p, spans, alignments, adjudicated_by: "admin".into(), phase1_batch: 1 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_names_round_trip_case_sensitively() {
        for l in AppraisalLabel::ALL {
            assert_eq!(l.as_str().parse::<AppraisalLabel>().unwrap(), l);
            assert!(l.as_str().to_lowercase().parse::<AppraisalLabel>().is_err() || l.as_str() == l.as_str().to_lowercase());
        }
        assert_eq!(AppraisalLabel::ALL.len(), 10);
        assert!(!AppraisalLabel::ANNOTATABLE.contains(&AppraisalLabel::NoLabel));
    }

    #[test]
    fn span_ids_are_positional() {
        assert_eq!(span_id("abc-def", Role::Observer, 3), "abc-def:observer:3");
        assert_eq!(target_id_of("abc-def"), "abc");
        assert_eq!(target_id_of("solo"), "solo");
    }
}
