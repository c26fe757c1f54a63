use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::TargetObserverPair;

/// Outputs of the distress, condolence and empathy scorers for one pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterScores {
    pub p_distress: f64,
    pub p_condolence: f64,
    pub empathy_rating: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FilterError {
    #[error("score out of range: {0}")]
    Score(String),
    #[error("invalid filter config: {0}")]
    Config(String),
}

impl FilterScores {
    pub fn new(p_distress: f64, p_condolence: f64, empathy_rating: f64) -> Result<Self, FilterError> {
        let scores = FilterScores { p_distress, p_condolence, empathy_rating };
        scores.check()?;
        Ok(scores)
    }

    pub fn check(&self) -> Result<(), FilterError> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.p_distress) {
            return Err(FilterError::Score(format!("p_distress {}", self.p_distress)));
        }
        if !unit.contains(&self.p_condolence) {
            return Err(FilterError::Score(format!("p_condolence {}", self.p_condolence)));
        }
        if !(1.0..=5.0).contains(&self.empathy_rating) {
            return Err(FilterError::Score(format!("empathy_rating {}", self.empathy_rating)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Keep only Targets with `p_distress` strictly above this.
    pub distress_threshold: f64,
    /// Keep only replies with `p_condolence` strictly above this.
    pub condolence_threshold: f64,
    /// Inclusive lower bound on the reply's empathy rating.
    pub empathy_min: f64,
    /// Largest tolerated count of "you" in the Target.
    pub max_you_count: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig { distress_threshold: 0.9, condolence_threshold: 0.9, empathy_min: 2.0, max_you_count: 2 }
    }
}

impl FilterConfig {
    pub fn check(&self) -> Result<(), FilterError> {
        for (name, v) in [("distress_threshold", self.distress_threshold), ("condolence_threshold", self.condolence_threshold)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(FilterError::Config(format!("{name} = {v}")));
            }
        }
        if !(1.0..=5.0).contains(&self.empathy_min) {
            return Err(FilterError::Config(format!("empathy_min = {}", self.empathy_min)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Distress,
    Condolence,
    EmpathyMin,
    MaxYouCount,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::Distress => "distress",
            DropReason::Condolence => "condolence",
            DropReason::EmpathyMin => "empathy_min",
            DropReason::MaxYouCount => "max_you_count",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterDecision {
    Keep,
    Drop(DropReason),
}

/// Counts standalone, case-insensitive "you": a maximal run of letters equal
/// to "you". "you're" counts (the apostrophe ends the run); "your" does not.
pub fn count_second_person(text: &str) -> usize {
    text.split(|c: char| !c.is_alphabetic()).filter(|w| w.len() == 3 && w.eq_ignore_ascii_case("you")).count()
}

/// Decision from precomputed scores and the Target's "you" count; predicates
/// are checked in order and the first failure names the drop reason. A NaN
/// score fails its check.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn decide(scores: &FilterScores, you_count: usize, config: &FilterConfig) -> FilterDecision {
    if !(scores.p_distress > config.distress_threshold) {
        FilterDecision::Drop(DropReason::Distress)
    } else if !(scores.p_condolence > config.condolence_threshold) {
        FilterDecision::Drop(DropReason::Condolence)
    } else if !(scores.empathy_rating >= config.empathy_min) {
        FilterDecision::Drop(DropReason::EmpathyMin)
    } else if you_count > config.max_you_count {
        FilterDecision::Drop(DropReason::MaxYouCount)
    } else {
        FilterDecision::Keep
    }
}

pub fn apply_empathy_filter(pair: &TargetObserverPair, scores: &FilterScores, config: &FilterConfig) -> FilterDecision {
    decide(scores, count_second_person(&pair.target_text), config)
}
