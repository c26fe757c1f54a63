//! Candidate pair extraction from forum dumps and the empathy pre-filter.

mod dump;
mod filter;
mod scorer;

pub use dump::{extract_pairs, ExtractReport, IngestError};
pub use filter::{
    apply_empathy_filter, count_second_person, decide, DropReason, FilterConfig, FilterDecision, FilterError, FilterScores,
};
pub use scorer::{BowLogistic, EmpathyScorer, LexiconScorer, ScorerExample, ScorerTask};

use crate::data::TargetObserverPair;

/// Outcome of filtering a batch of pairs.
#[derive(Clone, Debug, Default)]
pub struct FilterOutcome {
    pub kept: Vec<TargetObserverPair>,
    pub dropped: Vec<(String, DropReason)>,
}

/// Scores and filters pairs, preserving input order.
pub fn filter_pairs(
    pairs: &[TargetObserverPair],
    scorer: &dyn EmpathyScorer,
    config: &FilterConfig,
) -> Result<FilterOutcome, FilterError> {
    config.check()?;
    let mut outcome = FilterOutcome::default();
    for pair in pairs {
        let scores = scorer.score(&pair.target_text, &pair.observer_text);
        scores.check()?;
        match apply_empathy_filter(pair, &scores, config) {
            FilterDecision::Keep => outcome.kept.push(pair.clone()),
            FilterDecision::Drop(reason) => outcome.dropped.push((pair.pair_id.clone(), reason)),
        }
    }
    Ok(outcome)
}
