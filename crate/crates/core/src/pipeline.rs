//! Corpus-scale labeling: classify sentences, merge runs into spans, score
//! span pairs and stream [`AlignmentRecord`]s to JSONL with resumable
//! checkpoints.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{is_excluded, AlignmentModel};
use crate::appraisal::{AppraisalModel, SentencePrediction};
use crate::data::{target_id_of, AppraisalLabel, Role, TargetObserverPair};
use crate::num::Real;
use crate::text::{segment_sentences, slice_chars};

/// Anything that labels a single sentence.
pub trait SentenceLabeler: Sync {
    fn label_sentence(&self, sentence: &str) -> (AppraisalLabel, f64);
}

/// Anything that scores a (Target span, Observer span) text pair in [0, 1].
pub trait PairScorer: Sync {
    fn score_texts(&self, target: &str, observer: &str) -> f64;
}

impl<T: Real> SentenceLabeler for AppraisalModel<T> {
    fn label_sentence(&self, sentence: &str) -> (AppraisalLabel, f64) {
        let (label, p) = self.predict_sentence(sentence);
        (label, p.as_f64())
    }
}

impl<T: Real> PairScorer for AlignmentModel<T> {
    fn score_texts(&self, target: &str, observer: &str) -> f64 {
        self.score(target, observer).as_f64()
    }
}

/// A run of same-label sentences. `first_sentence..=last_sentence` are
/// sentence indices within the document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSpan {
    pub start: usize,
    pub end: usize,
    pub label: AppraisalLabel,
    pub confidence: f64,
    pub first_sentence: usize,
    pub last_sentence: usize,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDocument {
    pub pair_id: String,
    pub role: Role,
    pub spans: Vec<LabeledSpan>,
}

/// Merges adjacent spans that carry the same label and cover consecutive
/// sentences. Confidence becomes the mean over member sentences. Applying
/// it to its own output changes nothing.
pub fn merge_spans(spans: &[LabeledSpan], text: &str) -> Vec<LabeledSpan> {
    let mut out: Vec<LabeledSpan> = Vec::new();
    for span in spans {
        match out.last_mut() {
            Some(prev) if prev.label == span.label && prev.last_sentence + 1 == span.first_sentence => {
                let n_prev = (prev.last_sentence - prev.first_sentence + 1) as f64;
                let n_new = (span.last_sentence - span.first_sentence + 1) as f64;
                prev.confidence = (prev.confidence * n_prev + span.confidence * n_new) / (n_prev + n_new);
                prev.end = span.end;
                prev.last_sentence = span.last_sentence;
                prev.text = slice_chars(text, prev.start, prev.end).to_string();
            }
            _ => out.push(span.clone()),
        }
    }
    out
}

/// Maximal runs of equal labels become spans; `NoLabel` sentences emit
/// nothing and break runs.
pub fn merge_consecutive(sentences: &[SentencePrediction], text: &str) -> Vec<LabeledSpan> {
    let singles: Vec<LabeledSpan> = sentences
        .iter()
        .enumerate()
        .filter(|(_, s)| s.label != AppraisalLabel::NoLabel)
        .map(|(i, s)| LabeledSpan {
            start: s.sentence.start,
            end: s.sentence.end,
            label: s.label,
            confidence: s.confidence,
            first_sentence: i,
            last_sentence: i,
            text: s.sentence.text.clone(),
        })
        .collect();
    merge_spans(&singles, text)
}

fn label_text(text: &str, labeler: &dyn SentenceLabeler) -> Vec<SentencePrediction> {
    segment_sentences(text)
        .into_iter()
        .map(|sentence| {
            let (label, confidence) = labeler.label_sentence(&sentence.text);
            SentencePrediction { sentence, label, confidence }
        })
        .collect()
}

/// Segment, predict and merge each side of the pair independently.
pub fn label_document(pair: &TargetObserverPair, labeler: &dyn SentenceLabeler) -> (LabeledDocument, LabeledDocument) {
    let doc = |role: Role| {
        let text = pair.text(role);
        LabeledDocument { pair_id: pair.pair_id.clone(), role, spans: merge_consecutive(&label_text(text, labeler), text) }
    };
    (doc(Role::Target), doc(Role::Observer))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordSpan {
    pub start: usize,
    pub end: usize,
    pub label: AppraisalLabel,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub target_idx: usize,
    pub observer_idx: usize,
    pub probability: f64,
}

/// Labeled and aligned output for one pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub pair_id: String,
    /// Identifier of the Target message, shared by all its replies.
    pub target_id: String,
    pub subreddit: String,
    pub observer_author: String,
    pub observer_flair: Option<String>,
    pub created_utc_observer: i64,
    pub target_spans: Vec<RecordSpan>,
    pub observer_spans: Vec<RecordSpan>,
    pub links: Vec<Link>,
}

impl AlignmentRecord {
    /// Observer span indices with at least one link.
    pub fn aligned_observer_spans(&self) -> Vec<bool> {
        let mut aligned = vec![false; self.observer_spans.len()];
        for l in &self.links {
            aligned[l.observer_idx] = true;
        }
        aligned
    }
}

/// Index pairs that are scored: every Target x Observer span pair whose
/// labels are not excluded.
pub fn candidate_pairs(target: &LabeledDocument, observer: &LabeledDocument) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, t) in target.spans.iter().enumerate() {
        for (j, o) in observer.spans.iter().enumerate() {
            if !is_excluded(t.label, o.label) {
                out.push((i, j));
            }
        }
    }
    out
}

pub fn align_documents(
    pair: &TargetObserverPair,
    target: &LabeledDocument,
    observer: &LabeledDocument,
    scorer: &dyn PairScorer,
    threshold: f64,
) -> AlignmentRecord {
    let links = candidate_pairs(target, observer)
        .into_iter()
        .filter_map(|(i, j)| {
            let p = scorer.score_texts(&target.spans[i].text, &observer.spans[j].text);
            (p >= threshold).then_some(Link { target_idx: i, observer_idx: j, probability: p })
        })
        .collect();
    let record_spans = |doc: &LabeledDocument| {
        doc.spans.iter().map(|s| RecordSpan { start: s.start, end: s.end, label: s.label, confidence: s.confidence }).collect()
    };
    AlignmentRecord {
        pair_id: pair.pair_id.clone(),
        target_id: target_id_of(&pair.pair_id).to_string(),
        subreddit: pair.subreddit.clone(),
        observer_author: pair.observer_author.clone(),
        observer_flair: pair.observer_flair.clone(),
        created_utc_observer: pair.created_utc_observer,
        target_spans: record_spans(target),
        observer_spans: record_spans(observer),
        links,
    }
}

pub fn process_pair(
    pair: &TargetObserverPair,
    labeler: &dyn SentenceLabeler,
    scorer: &dyn PairScorer,
    threshold: f64,
) -> AlignmentRecord {
    let (t, o) = label_document(pair, labeler);
    align_documents(pair, &t, &o, scorer, threshold)
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("resume point {0} not found in the input")]
    ResumeMismatch(String),
    #[error("invalid run config: {0}")]
    Config(String),
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub threshold: f64,
    pub workers: usize,
    /// Records are flushed and synced after every chunk of this many pairs.
    pub checkpoint_every: usize,
    /// Stop after this many input lines in this invocation.
    pub max_documents: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { threshold: 0.3, workers: 1, checkpoint_every: 256, max_documents: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpanCounts {
    pub target: u64,
    pub observer: u64,
}

/// Totals over the whole output file, plus this invocation's failures.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub documents: u64,
    pub spans_by_label: BTreeMap<AppraisalLabel, SpanCounts>,
    pub links: u64,
    pub failures: u64,
    /// `pair_id` after which this invocation resumed, if it did.
    pub resumed_after: Option<String>,
}

pub fn summarize(records: &[AlignmentRecord]) -> RunSummary {
    let mut s = RunSummary::default();
    for r in records {
        s.documents += 1;
        s.links += r.links.len() as u64;
        for span in &r.target_spans {
            s.spans_by_label.entry(span.label).or_default().target += 1;
        }
        for span in &r.observer_spans {
            s.spans_by_label.entry(span.label).or_default().observer += 1;
        }
    }
    s
}

/// Truncates a partial trailing line and returns the pair id of the last
/// complete record, if any.
fn prepare_resume(out_path: &Path) -> Result<Option<String>, PipelineError> {
    let io_err = |source| PipelineError::Io { path: out_path.to_path_buf(), source };
    let mut file = match OpenOptions::new().read(true).write(true).open(out_path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_err(e)),
    };
    let mut content = Vec::new();
    file.read_to_end(&mut content).map_err(io_err)?;
    let mut complete = content.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    // A final line that does not parse is also treated as partial.
    let mut last = None;
    while complete > 0 {
        let line_start = content[..complete - 1].iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        match serde_json::from_slice::<AlignmentRecord>(&content[line_start..complete - 1]) {
            Ok(r) => {
                last = Some(r.pair_id);
                break;
            }
            Err(_) => complete = line_start,
        }
    }
    if complete < content.len() {
        log::warn!("truncating {} trailing bytes of {}", content.len() - complete, out_path.display());
        file.set_len(complete as u64).map_err(io_err)?;
        file.seek(SeekFrom::Start(complete as u64)).map_err(io_err)?;
        file.sync_data().map_err(io_err)?;
    }
    Ok(last)
}

pub fn read_records(path: &Path) -> Result<Vec<AlignmentRecord>, PipelineError> {
    let io_err = |source| PipelineError::Io { path: path.to_path_buf(), source };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| io_err(io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", n + 1))))?;
        out.push(rec);
    }
    Ok(out)
}

/// Streams `pairs_path` through the models into `out_path`. An existing
/// output file is resumed after its last complete record. Lines that fail
/// to parse are logged and skipped; only I/O errors abort the run.
pub fn run_corpus(
    pairs_path: &Path,
    out_path: &Path,
    labeler: &dyn SentenceLabeler,
    scorer: &dyn PairScorer,
    config: &RunConfig,
) -> Result<RunSummary, PipelineError> {
    if config.workers == 0 || config.checkpoint_every == 0 {
        return Err(PipelineError::Config("workers and checkpoint_every must be positive".into()));
    }
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(config.workers).build().map_err(|e| PipelineError::Config(e.to_string()))?;
    let resume = prepare_resume(out_path)?;
    let in_err = |source| PipelineError::Io { path: pairs_path.to_path_buf(), source };
    let out_err = |source| PipelineError::Io { path: out_path.to_path_buf(), source };

    let mut lines = BufReader::new(File::open(pairs_path).map_err(in_err)?).lines();
    if let Some(last) = &resume {
        let mut found = false;
        for line in lines.by_ref() {
            let line = line.map_err(in_err)?;
            if serde_json::from_str::<TargetObserverPair>(&line).is_ok_and(|p| &p.pair_id == last) {
                found = true;
                break;
            }
        }
        if !found {
            return Err(PipelineError::ResumeMismatch(last.clone()));
        }
    }

    let file = OpenOptions::new().create(true).append(true).open(out_path).map_err(out_err)?;
    let mut writer = BufWriter::new(file);
    let mut failures = 0u64;
    let mut budget = config.max_documents.unwrap_or(usize::MAX);
    loop {
        let take = config.checkpoint_every.min(budget);
        let mut chunk = Vec::with_capacity(take);
        for line in lines.by_ref() {
            chunk.push(line.map_err(in_err)?);
            if chunk.len() == take {
                break;
            }
        }
        if chunk.is_empty() {
            break;
        }
        budget -= chunk.len();
        let results: Vec<Option<String>> = pool.install(|| {
            chunk
                .par_iter()
                .map(|line| {
                    if line.trim().is_empty() {
                        return None;
                    }
                    match serde_json::from_str::<TargetObserverPair>(line) {
                        Ok(pair) => {
                            let rec = process_pair(&pair, labeler, scorer, config.threshold);
                            Some(serde_json::to_string(&rec).expect("record serializes"))
                        }
                        Err(e) => {
                            log::warn!("skipping unparsable pair: {e}");
                            None
                        }
                    }
                })
                .collect()
        });
        for (line, result) in chunk.iter().zip(results) {
            match result {
                Some(json) => {
                    writer.write_all(json.as_bytes()).map_err(out_err)?;
                    writer.write_all(b"\n").map_err(out_err)?;
                }
                None if !line.trim().is_empty() => failures += 1,
                None => {}
            }
        }
        writer.flush().map_err(out_err)?;
        writer.get_ref().sync_data().map_err(out_err)?;
        if budget == 0 {
            break;
        }
    }
    drop(writer);

    let mut summary = summarize(&read_records(out_path)?);
    summary.failures = failures;
    summary.resumed_after = resume;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{class_sentence, pair_corpus};
    use crate::text::Sentence;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use AppraisalLabel::*;

    fn preds(labels: &[AppraisalLabel]) -> (Vec<SentencePrediction>, String) {
        let mut text = String::new();
        let mut out = Vec::new();
        for (i, &label) in labels.iter().enumerate() {
            if i > 0 {
                text.push(' ');
            }
            let s = format!("S{i}.");
            let start = text.chars().count();
            text.push_str(&s);
            out.push(SentencePrediction {
                sentence: Sentence { start, end: start + s.chars().count(), text: s },
                label,
                confidence: 0.5 + 0.01 * i as f64,
            });
        }
        (out, text)
    }

    #[test]
    fn run_length_examples() {
        let (p, text) = preds(&[Advice, Advice, Certainty]);
        let spans = merge_consecutive(&p, &text);
        assert_eq!(spans.len(), 2);
        assert_eq!((spans[0].start, spans[0].end, spans[0].label), (0, 7, Advice));
        assert_eq!(spans[0].text, "S0. S1.");
        assert!((spans[0].confidence - 0.505).abs() < 1e-12);
        assert_eq!((spans[1].start, spans[1].end, spans[1].label), (8, 11, Certainty));

        let (p, text) = preds(&[Advice, NoLabel, Advice]);
        assert_eq!(merge_consecutive(&p, &text).len(), 2);
    }

    // Independent run-length encoder over (label, first, last) triples.
    fn rle(labels: &[AppraisalLabel]) -> Vec<(AppraisalLabel, usize, usize)> {
        let mut out: Vec<(AppraisalLabel, usize, usize)> = Vec::new();
        let mut i = 0;
        while i < labels.len() {
            let mut j = i;
            while j + 1 < labels.len() && labels[j + 1] == labels[i] {
                j += 1;
            }
            if labels[i] != NoLabel {
                out.push((labels[i], i, j));
            }
            i = j + 1;
        }
        out
    }

    proptest! {
        #[test]
        fn merge_matches_run_length_oracle_and_is_idempotent(idx in prop::collection::vec(0usize..4, 0..50)) {
            let palette = [NoLabel, Advice, Certainty, Trope];
            let labels: Vec<_> = idx.iter().map(|&i| palette[i]).collect();
            let (p, text) = preds(&labels);
            let spans = merge_consecutive(&p, &text);
            let got: Vec<_> = spans.iter().map(|s| (s.label, s.first_sentence, s.last_sentence)).collect();
            prop_assert_eq!(got, rle(&labels));
            prop_assert_eq!(merge_spans(&spans, &text), spans.clone());
            for w in spans.windows(2) {
                prop_assert!(w[0].end <= w[1].start);
            }
        }
    }

    /// Labels a sentence by its keyword class; constant confidence.
    struct KeywordLabeler;

    impl SentenceLabeler for KeywordLabeler {
        fn label_sentence(&self, sentence: &str) -> (AppraisalLabel, f64) {
            let words = crate::text::word_tokens(sentence);
            for (c, kws) in crate::synth::CLASS_KEYWORDS.iter().enumerate() {
                if words.iter().any(|w| kws.contains(&w.as_str())) {
                    return (AppraisalLabel::MODEL_CLASSES[c], 0.9);
                }
            }
            (NoLabel, 0.9)
        }
    }

    struct Constant(f64);

    impl PairScorer for Constant {
        fn score_texts(&self, _: &str, _: &str) -> f64 {
            self.0
        }
    }

    /// Deterministic pseudo-score from the texts.
    struct HashScorer;

    impl PairScorer for HashScorer {
        fn score_texts(&self, t: &str, o: &str) -> f64 {
            let h = t.len() * 31 + o.len() * 17 + t.bytes().map(usize::from).sum::<usize>();
            (h % 100) as f64 / 100.0
        }
    }

    #[test]
    fn label_document_merges_generator_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let classes = [Advice, Advice, Certainty, Trope, Trope];
        let target: Vec<String> = classes.iter().map(|&c| class_sentence(c, &mut rng)).collect();
        let pair =
            TargetObserverPair { observer_text: String::new(), target_text: target.join(" "), ..pair_corpus(1, 0).remove(0) };
        let (t, o) = label_document(&pair, &KeywordLabeler);
        let labels: Vec<_> = t.spans.iter().map(|s| s.label).collect();
        assert_eq!(labels, vec![Advice, Certainty, Trope]);
        assert!(o.spans.is_empty());
        assert_eq!(label_document(&pair, &KeywordLabeler), (t, o));
    }

    #[test]
    fn align_scores_non_excluded_cross_product() {
        let doc = |role, labels: &[AppraisalLabel]| LabeledDocument {
            pair_id: "a-b".into(),
            role,
            spans: labels
                .iter()
                .enumerate()
                .map(|(i, &label)| LabeledSpan {
                    start: i,
                    end: i + 1,
                    label,
                    confidence: 1.0,
                    first_sentence: i,
                    last_sentence: i,
                    text: "x".into(),
                })
                .collect(),
        };
        let pair = pair_corpus(1, 0).remove(0);
        let t = doc(Role::Target, &[Certainty, Trope]);
        let o = doc(Role::Observer, &[Certainty, SelfOtherAgency, Trope]);
        let rec = align_documents(&pair, &t, &o, &Constant(0.5), 0.3);
        assert_eq!(rec.links.len(), 6);
        assert_eq!(align_documents(&pair, &t, &o, &Constant(0.29), 0.3).links.len(), 0);
        assert_eq!(align_documents(&pair, &t, &o, &Constant(0.3), 0.3).links.len(), 6);

        let t = doc(Role::Target, &[Advice]);
        let o = doc(Role::Observer, &[ObjectiveExperience]);
        assert!(candidate_pairs(&t, &o).is_empty());
        assert!(align_documents(&pair, &t, &o, &Constant(1.0), 0.3).links.is_empty());
    }

    fn write_pairs_file(dir: &Path, n: usize) -> PathBuf {
        let path = dir.join("pairs.jsonl");
        crate::data::write_pairs(&pair_corpus(n, 3), &path).unwrap();
        path
    }

    #[test]
    fn resume_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = write_pairs_file(dir.path(), 100);
        let full = dir.path().join("full.jsonl");
        let cfg = RunConfig { checkpoint_every: 7, ..Default::default() };
        let s_full = run_corpus(&pairs, &full, &KeywordLabeler, &HashScorer, &cfg).unwrap();

        let part = dir.path().join("part.jsonl");
        run_corpus(&pairs, &part, &KeywordLabeler, &HashScorer, &RunConfig { max_documents: Some(50), ..cfg.clone() }).unwrap();
        // Simulate a crash mid-write.
        let mut f = OpenOptions::new().append(true).open(&part).unwrap();
        f.write_all(b"{\"pair_id\":\"t00").unwrap();
        drop(f);
        let s_part = run_corpus(&pairs, &part, &KeywordLabeler, &HashScorer, &cfg).unwrap();
        assert_eq!(std::fs::read(&full).unwrap(), std::fs::read(&part).unwrap());
        assert!(s_part.resumed_after.is_some());
        assert_eq!(s_full.documents, 100);
        assert_eq!(s_full.links, s_part.links);

        let records = read_records(&full).unwrap();
        let spans: u64 = records.iter().map(|r| (r.target_spans.len() + r.observer_spans.len()) as u64).sum();
        assert_eq!(s_full.spans_by_label.values().map(|c| c.target + c.observer).sum::<u64>(), spans);
    }

    #[test]
    fn parallel_run_matches_serial_and_skips_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = write_pairs_file(dir.path(), 60);
        let mut content = std::fs::read_to_string(&pairs).unwrap();
        content.insert_str(0, "not json\n");
        std::fs::write(&pairs, content).unwrap();
        let one = dir.path().join("one.jsonl");
        let four = dir.path().join("four.jsonl");
        let s1 = run_corpus(&pairs, &one, &KeywordLabeler, &HashScorer, &RunConfig { workers: 1, ..Default::default() }).unwrap();
        let s4 = run_corpus(
            &pairs,
            &four,
            &KeywordLabeler,
            &HashScorer,
            &RunConfig { workers: 4, checkpoint_every: 9, ..Default::default() },
        )
        .unwrap();
        assert_eq!(s1.failures, 1);
        assert_eq!(s1.documents, 60);
        assert_eq!(std::fs::read(&one).unwrap(), std::fs::read(&four).unwrap());
        assert_eq!(s1.links, s4.links);
    }
}
