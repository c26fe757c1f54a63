use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AppraisalLabel, GoldInstance, Role};

/// One violated invariant, naming the offending span or alignment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EmptyText { role: Role },
    TimestampOrder { target: i64, observer: i64 },
    SpanOutOfBounds { span_id: String, start: usize, end: usize, text_len: usize },
    SpanNoLabel { span_id: String },
    TropeOnTarget { span_id: String },
    DuplicateSpanId { span_id: String },
    DuplicateSpan { span_id: String, duplicate_of: String },
    UnknownSpanReference { span_id: String },
    AlignmentRoleMismatch { observer_span_id: String, target_span_id: String },
    DuplicateAlignment { observer_span_id: String, target_span_id: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyText { role } => write!(f, "{role} text is empty"),
            Violation::TimestampOrder { target, observer } => {
                write!(f, "observer created at {observer} before target at {target}")
            }
            Violation::SpanOutOfBounds { span_id, start, end, text_len } => {
                write!(f, "span {span_id} [{start}, {end}) outside text of length {text_len}")
            }
            Violation::SpanNoLabel { span_id } => write!(f, "span {span_id} carries NoLabel"),
            Violation::TropeOnTarget { span_id } => write!(f, "span {span_id} is a Target Trope"),
            Violation::DuplicateSpanId { span_id } => write!(f, "span id {span_id} used twice"),
            Violation::DuplicateSpan { span_id, duplicate_of } => {
                write!(f, "span {span_id} duplicates {duplicate_of}")
            }
            Violation::UnknownSpanReference { span_id } => write!(f, "alignment references unknown span {span_id}"),
            Violation::AlignmentRoleMismatch { observer_span_id, target_span_id } => {
                write!(f, "alignment {observer_span_id} -> {target_span_id} has wrong roles")
            }
            Violation::DuplicateAlignment { observer_span_id, target_span_id } => {
                write!(f, "alignment {observer_span_id} -> {target_span_id} repeated")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pair_id: String,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pair {}:", self.pair_id)?;
        for v in &self.violations {
            write!(f, " {v};")?;
        }
        Ok(())
    }
}

/// Checks every type invariant of a gold instance. Never fails; an empty
/// report means the instance is valid.
pub fn validate_instance(instance: &GoldInstance) -> ValidationReport {
    let pair = &instance.pair;
    let mut violations = Vec::new();

    for role in [Role::Target, Role::Observer] {
        if pair.text(role).is_empty() {
            violations.push(Violation::EmptyText { role });
        }
    }
    if pair.created_utc_observer < pair.created_utc_target {
        violations.push(Violation::TimestampOrder { target: pair.created_utc_target, observer: pair.created_utc_observer });
    }

    let target_len = pair.target_text.chars().count();
    let observer_len = pair.observer_text.chars().count();
    let mut ids: HashMap<&str, &super::Span> = HashMap::new();
    let mut triples: HashMap<(Role, usize, usize, AppraisalLabel), &str> = HashMap::new();
    for span in &instance.spans {
        let text_len = match span.role {
            Role::Target => target_len,
            Role::Observer => observer_len,
        };
        if span.start >= span.end || span.end > text_len {
            violations.push(Violation::SpanOutOfBounds {
                span_id: span.span_id.clone(),
                start: span.start,
                end: span.end,
                text_len,
            });
        }
        if span.label == AppraisalLabel::NoLabel {
            violations.push(Violation::SpanNoLabel { span_id: span.span_id.clone() });
        }
        if span.label == AppraisalLabel::Trope && span.role == Role::Target {
            violations.push(Violation::TropeOnTarget { span_id: span.span_id.clone() });
        }
        if ids.insert(&span.span_id, span).is_some() {
            violations.push(Violation::DuplicateSpanId { span_id: span.span_id.clone() });
        }
        let key = (span.role, span.start, span.end, span.label);
        if let Some(first) = triples.get(&key) {
            violations.push(Violation::DuplicateSpan { span_id: span.span_id.clone(), duplicate_of: first.to_string() });
        } else {
            triples.insert(key, &span.span_id);
        }
    }

    let mut links = HashSet::new();
    for a in &instance.alignments {
        let obs = ids.get(a.observer_span_id.as_str());
        let tgt = ids.get(a.target_span_id.as_str());
        if obs.is_none() {
            violations.push(Violation::UnknownSpanReference { span_id: a.observer_span_id.clone() });
        }
        if tgt.is_none() {
            violations.push(Violation::UnknownSpanReference { span_id: a.target_span_id.clone() });
        }
        if let (Some(o), Some(t)) = (obs, tgt) {
            if o.role != Role::Observer || t.role != Role::Target {
                violations.push(Violation::AlignmentRoleMismatch {
                    observer_span_id: a.observer_span_id.clone(),
                    target_span_id: a.target_span_id.clone(),
                });
            }
        }
        if !links.insert((&a.observer_span_id, &a.target_span_id)) {
            violations.push(Violation::DuplicateAlignment {
                observer_span_id: a.observer_span_id.clone(),
                target_span_id: a.target_span_id.clone(),
            });
        }
    }

    ValidationReport { pair_id: pair.pair_id.clone(), violations }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::{instance, span};
    use super::super::{span_id, Alignment};
    use super::*;

    #[test]
    fn well_formed_instance_is_valid() {
        let inst = instance("p-1");
        assert_eq!(inst.spans.len(), 3);
        assert_eq!(inst.alignments.len(), 1);
        assert!(validate_instance(&inst).is_valid());
    }

    #[test]
    fn span_past_end_cites_span() {
        let mut inst = instance("p-1");
        inst.spans[2].end = 100;
        let report = validate_instance(&inst);
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(&report.violations[0], Violation::SpanOutOfBounds { span_id, .. } if span_id == "p-1:observer:0"));
    }

    #[test]
    fn target_trope_is_a_violation() {
        let mut inst = instance("p-1");
        inst.spans[0].label = AppraisalLabel::Trope;
        let report = validate_instance(&inst);
        assert_eq!(report.violations, vec![Violation::TropeOnTarget { span_id: "p-1:target:0".into() }]);
    }

    // One failing fixture per invariant.
    #[test]
    fn every_invariant_has_a_failing_fixture() {
        let mut empty = instance("p-1");
        empty.pair.observer_text.clear();
        empty.spans.truncate(2);
        empty.alignments.clear();
        assert!(matches!(validate_instance(&empty).violations[..], [Violation::EmptyText { role: Role::Observer }]));

        let mut early = instance("p-1");
        early.pair.created_utc_observer = early.pair.created_utc_target - 1;
        assert!(matches!(validate_instance(&early).violations[..], [Violation::TimestampOrder { .. }]));

        let mut inverted = instance("p-1");
        inverted.spans[0].start = 14;
        assert!(matches!(validate_instance(&inverted).violations[..], [Violation::SpanOutOfBounds { .. }]));

        let mut nolabel = instance("p-1");
        nolabel.spans[0].label = AppraisalLabel::NoLabel;
        assert!(matches!(validate_instance(&nolabel).violations[..], [Violation::SpanNoLabel { .. }]));

        let mut dup_id = instance("p-1");
        dup_id.spans.push(span("p-1", Role::Target, 0, 0, 5, AppraisalLabel::Certainty));
        assert!(matches!(validate_instance(&dup_id).violations[..], [Violation::DuplicateSpanId { .. }]));

        let mut dup_triple = instance("p-1");
        dup_triple.spans.push(span("p-1", Role::Target, 7, 0, 14, AppraisalLabel::ObjectiveExperience));
        assert!(matches!(validate_instance(&dup_triple).violations[..], [Violation::DuplicateSpan { .. }]));

        let mut unknown = instance("p-1");
        unknown.alignments[0].target_span_id = "nope".into();
        assert!(matches!(validate_instance(&unknown).violations[..], [Violation::UnknownSpanReference { .. }]));

        let mut swapped = instance("p-1");
        swapped.alignments[0] =
            Alignment { observer_span_id: span_id("p-1", Role::Target, 0), target_span_id: span_id("p-1", Role::Target, 1) };
        assert!(matches!(validate_instance(&swapped).violations[..], [Violation::AlignmentRoleMismatch { .. }]));

        let mut repeated = instance("p-1");
        repeated.alignments.push(repeated.alignments[0].clone());
        assert!(matches!(validate_instance(&repeated).violations[..], [Violation::DuplicateAlignment { .. }]));
    }

    #[test]
    fn overlapping_spans_of_different_labels_are_allowed() {
        let mut inst = instance("p-1");
        inst.spans.push(span("p-1", Role::Target, 2, 0, 14, AppraisalLabel::Certainty));
        assert!(validate_instance(&inst).is_valid());
    }

    #[test]
    fn offsets_count_code_points() {
        let mut inst = instance("p-1");
        inst.pair.observer_text = "So sorry 💔 ok".into();
        inst.spans[2].start = 9;
        inst.spans[2].end = 13;
        assert!(validate_instance(&inst).is_valid());
        inst.spans[2].end = 14;
        assert!(!validate_instance(&inst).is_valid());
    }
}
