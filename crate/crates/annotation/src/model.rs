use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use aloe_core::data::{Alignment, Span, TargetObserverPair, ValidationReport};
use serde::{Deserialize, Serialize};

pub const DEFAULT_BATCH_SIZE: usize = 634;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Phase 1: span highlighting and labeling.
    Spans,
    /// Phase 2: linking Observer spans to Target spans.
    Alignment,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Spans => "spans",
            Phase::Alignment => "alignment",
        }
    }

    pub fn task_id(self, pair_id: &str) -> String {
        format!("{}:{pair_id}", self.as_str())
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spans" => Ok(Phase::Spans),
            "alignment" => Ok(Phase::Alignment),
            _ => Err(format!("unknown phase `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotatorRole {
    Admin,
    Annotator,
}

impl AnnotatorRole {
    pub fn as_str(self) -> &'static str {
        match self {
            AnnotatorRole::Admin => "admin",
            AnnotatorRole::Annotator => "annotator",
        }
    }
}

impl FromStr for AnnotatorRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "admin" => Ok(AnnotatorRole::Admin),
            "annotator" => Ok(AnnotatorRole::Annotator),
            _ => Err(format!("unknown role `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotator {
    pub annotator_id: String,
    pub role: AnnotatorRole,
}

/// Returned once when an annotator is created; the token is not stored in
/// the clear anywhere else in the API.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssuedToken {
    pub annotator_id: String,
    pub role: AnnotatorRole,
    pub token: String,
}

/// Variants are ordered by progress.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Unstarted,
    InProgress,
    Submitted,
    Reviewed,
}

impl TaskStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskStatus::Unstarted => "unstarted",
            TaskStatus::InProgress => "in_progress",
            TaskStatus::Submitted => "submitted",
            TaskStatus::Reviewed => "reviewed",
        }
    }
}

impl FromStr for TaskStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unstarted" => Ok(TaskStatus::Unstarted),
            "in_progress" => Ok(TaskStatus::InProgress),
            "submitted" => Ok(TaskStatus::Submitted),
            "reviewed" => Ok(TaskStatus::Reviewed),
            _ => Err(format!("unknown status `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub batch_id: i64,
    pub phase: Phase,
    pub task_ids: Vec<String>,
    pub annotators: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateBatch {
    pub pair_ids: Vec<String>,
    pub annotator_ids: Vec<String>,
    #[serde(default = "default_size")]
    pub size: usize,
    #[serde(default = "default_phase")]
    pub phase: Phase,
}

fn default_size() -> usize {
    DEFAULT_BATCH_SIZE
}

fn default_phase() -> Phase {
    Phase::Spans
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateAnnotator {
    pub annotator_id: String,
    #[serde(default = "default_role")]
    pub role: AnnotatorRole,
}

fn default_role() -> AnnotatorRole {
    AnnotatorRole::Annotator
}

/// Annotation content of one submission or of a final decision.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Spans(Vec<Span>),
    Alignments(Vec<Alignment>),
}

impl Payload {
    pub fn phase(&self) -> Phase {
        match self {
            Payload::Spans(_) => Phase::Spans,
            Payload::Alignments(_) => Phase::Alignment,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub annotator_id: String,
    pub task_id: String,
    pub revision: i64,
    pub payload: Payload,
    /// Microseconds since the Unix epoch.
    pub submitted_at: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdjudicationSource {
    SelectedFromAnnotator,
    AdminEdited,
}

impl AdjudicationSource {
    pub fn as_str(self) -> &'static str {
        match self {
            AdjudicationSource::SelectedFromAnnotator => "selected-from-annotator",
            AdjudicationSource::AdminEdited => "admin-edited",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicationState {
    pub task_id: String,
    pub finalized: bool,
    pub final_payload: Option<Payload>,
    pub adjudicator_id: Option<String>,
    pub source: Option<AdjudicationSource>,
    /// Set when the decision copies an annotator's latest revision.
    pub selected_annotator: Option<String>,
    pub finalized_at: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Select(String),
    Edited(Payload),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub task_id: String,
    pub pair: TargetObserverPair,
    pub phase: Phase,
    pub batch_id: i64,
    /// Per assigned annotator; an annotator only sees their own entry.
    pub status: BTreeMap<String, TaskStatus>,
    pub finalized: bool,
    /// For alignment tasks: the finalized phase-1 spans to link.
    pub reference_spans: Vec<Span>,
}

/// A note or discussion entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub entry_id: i64,
    pub task_id: String,
    pub author: String,
    pub text: String,
    pub created_at: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryText {
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewView {
    pub task_id: String,
    /// Latest revision per annotator, ordered by annotator id.
    pub columns: Vec<Submission>,
    pub discussion: Vec<Entry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task_id: String,
    pub pair_id: String,
    pub phase: Phase,
    pub batch_id: i64,
    pub status: TaskStatus,
    pub finalized: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("missing or unknown bearer token")]
    Unauthorized,
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("validation failed: {0}")]
    Invalid(ValidationReport),
    #[error("tasks not finalized: {}", .0.join(", "))]
    Unfinalized(Vec<String>),
    #[error("store: {0}")]
    Store(#[from] rusqlite::Error),
    #[error("stored json: {0}")]
    Json(#[from] serde_json::Error),
}
