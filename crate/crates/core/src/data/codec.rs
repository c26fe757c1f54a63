use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{AppraisalLabel, GoldInstance, PairKind, TargetObserverPair};

pub const SCHEMA_VERSION: u32 = 1;
pub const OFFSET_UNIT: &str = "codepoint";

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: unknown appraisal label `{label}`")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("{path}: unsupported corpus metadata (schema_version {schema_version}, offset_unit {offset_unit})")]
    Meta { path: PathBuf, schema_version: u32, offset_unit: String },
}

impl CodecError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CodecError::Io { path: path.to_path_buf(), source }
    }
}

/// Contents of the `<stem>.meta.json` sidecar written next to a corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub schema_version: u32,
    pub offset_unit: String,
}

impl Default for CorpusMeta {
    fn default() -> Self {
        CorpusMeta { schema_version: SCHEMA_VERSION, offset_unit: OFFSET_UNIT.to_string() }
    }
}

fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

#[derive(Serialize, Deserialize)]
pub(super) struct TargetWire {
    text: String,
    author: String,
    created_utc: i64,
}

#[derive(Serialize, Deserialize)]
pub(super) struct ObserverWire {
    text: String,
    author: String,
    flair: Option<String>,
    created_utc: i64,
}

#[derive(Serialize, Deserialize)]
pub(super) struct PairWire {
    pair_id: String,
    subreddit: String,
    pair_kind: PairKind,
    target: TargetWire,
    observer: ObserverWire,
}

impl From<TargetObserverPair> for PairWire {
    fn from(p: TargetObserverPair) -> Self {
        PairWire {
            pair_id: p.pair_id,
            subreddit: p.subreddit,
            pair_kind: p.pair_kind,
            target: TargetWire { text: p.target_text, author: p.target_author, created_utc: p.created_utc_target },
            observer: ObserverWire {
                text: p.observer_text,
                author: p.observer_author,
                flair: p.observer_flair,
                created_utc: p.created_utc_observer,
            },
        }
    }
}

impl From<PairWire> for TargetObserverPair {
    fn from(w: PairWire) -> Self {
        TargetObserverPair {
            pair_id: w.pair_id,
            target_text: w.target.text,
            observer_text: w.observer.text,
            subreddit: w.subreddit,
            target_author: w.target.author,
            observer_author: w.observer.author,
            observer_flair: w.observer.flair,
            created_utc_target: w.target.created_utc,
            created_utc_observer: w.observer.created_utc,
            pair_kind: w.pair_kind,
        }
    }
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CodecError> {
    let file = File::open(path).map_err(|e| CodecError::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CodecError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| classify(idx + 1, &line, e))?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<(), CodecError> {
    let file = File::create(path).map_err(|e| CodecError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("domain values serialize");
        w.write_all(line.as_bytes()).map_err(|e| CodecError::io(path, e))?;
        w.write_all(b"\n").map_err(|e| CodecError::io(path, e))?;
    }
    w.flush().map_err(|e| CodecError::io(path, e))
}

/// Distinguishes an unknown label from other schema errors so the message
/// names the offending label.
fn classify(line_no: usize, line: &str, err: serde_json::Error) -> CodecError {
    if let Ok(value) = serde_json::from_str::<serde_json::Value>(line) {
        if let Some(spans) = value.get("spans").and_then(|s| s.as_array()) {
            for span in spans {
                if let Some(label) = span.get("label").and_then(|l| l.as_str()) {
                    if label.parse::<AppraisalLabel>().is_err() {
                        return CodecError::UnknownLabel { line: line_no, label: label.to_string() };
                    }
                }
            }
        }
    }
    CodecError::Malformed { line: line_no, message: err.to_string() }
}

/// Reads a gold corpus. A missing sidecar is accepted; a sidecar declaring a
/// different offset unit or schema is rejected.
pub fn read_corpus(path: &Path) -> Result<Vec<GoldInstance>, CodecError> {
    let meta = meta_path(path);
    if meta.exists() {
        let raw = std::fs::read_to_string(&meta).map_err(|e| CodecError::io(&meta, e))?;
        let parsed: CorpusMeta = serde_json::from_str(&raw)
            .map_err(|e| CodecError::Malformed { line: 1, message: format!("{}: {e}", meta.display()) })?;
        if parsed.offset_unit != OFFSET_UNIT || parsed.schema_version != SCHEMA_VERSION {
            return Err(CodecError::Meta { path: meta, schema_version: parsed.schema_version, offset_unit: parsed.offset_unit });
        }
    }
    read_jsonl(path)
}

pub fn write_corpus(corpus: &[GoldInstance], path: &Path) -> Result<(), CodecError> {
    write_jsonl(corpus, path)?;
    let meta = meta_path(path);
    let body = serde_json::to_string_pretty(&CorpusMeta::default()).expect("meta serializes");
    std::fs::write(&meta, body + "\n").map_err(|e| CodecError::io(&meta, e))
}

pub fn read_pairs(path: &Path) -> Result<Vec<TargetObserverPair>, CodecError> {
    read_jsonl(path)
}

pub fn write_pairs(pairs: &[TargetObserverPair], path: &Path) -> Result<(), CodecError> {
    write_jsonl(pairs, path)
}
