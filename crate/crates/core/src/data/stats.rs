use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{validate_instance, AppraisalLabel, GoldInstance, Role, ValidationReport};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub target: u64,
    pub observer: u64,
    /// Target spans of this label referenced by at least one alignment.
    pub target_with_alignment: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub by_label: BTreeMap<AppraisalLabel, LabelCounts>,
    pub total_spans: u64,
    pub total_alignments: u64,
    pub total_pairs: u64,
}

impl CorpusStats {
    pub fn label(&self, label: AppraisalLabel) -> LabelCounts {
        self.by_label.get(&label).copied().unwrap_or_default()
    }
}

/// Table-1 style counts. Rejects the corpus with the first failing
/// validation report.
pub fn compute_stats(corpus: &[GoldInstance]) -> Result<CorpusStats, ValidationReport> {
    let mut stats = CorpusStats::default();
    for label in AppraisalLabel::ANNOTATABLE {
        stats.by_label.insert(label, LabelCounts::default());
    }
    for inst in corpus {
        let report = validate_instance(inst);
        if !report.is_valid() {
            return Err(report);
        }
        stats.total_pairs += 1;
        stats.total_alignments += inst.alignments.len() as u64;
        let aligned: HashSet<&str> = inst.alignments.iter().map(|a| a.target_span_id.as_str()).collect();
        for span in &inst.spans {
            stats.total_spans += 1;
            let counts = stats.by_label.entry(span.label).or_default();
            match span.role {
                Role::Target => {
                    counts.target += 1;
                    if aligned.contains(span.span_id.as_str()) {
                        counts.target_with_alignment += 1;
                    }
                }
                Role::Observer => counts.observer += 1,
            }
        }
    }
    Ok(stats)
}
