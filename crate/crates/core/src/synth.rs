//! Seeded synthetic data with known ground truth, for sanity training runs
//! and property tests.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alignment::{is_excluded, SpanPairInstance, SpanRef};
use crate::appraisal::SentenceInstance;
use crate::data::{pair_id_for, span_id, Alignment, AppraisalLabel, GoldInstance, PairKind, Role, Span, TargetObserverPair};
use crate::pipeline::{AlignmentRecord, Link, RecordSpan};
use rand_distr::{Distribution, Normal};

/// Words that identify each model class, in `MODEL_CLASSES` order.
pub const CLASS_KEYWORDS: [[&str; 6]; 9] = [
    ["weather", "lunch", "traffic", "movie", "garden", "football"],
    ["happy", "sad", "upset", "joyful", "miserable", "cheerful"],
    ["exhausting", "struggle", "effortless", "grind", "demanding", "tiring"],
    ["unsure", "confident", "doubt", "certain", "uncertain", "maybe"],
    ["accident", "diagnosis", "divorce", "funeral", "layoff", "surgery"],
    ["blame", "fault", "responsible", "caused", "guilty", "culprit"],
    ["helpless", "powerless", "control", "stuck", "trapped", "cornered"],
    ["should", "try", "recommend", "consider", "suggest", "talk"],
    ["hugs", "prayers", "condolences", "thoughts", "sending", "heartfelt"],
];

const FILLER: [&str; 30] = [
    "i", "it", "the", "a", "and", "was", "really", "just", "so", "today", "this", "that", "we", "my", "then", "very", "kind",
    "of", "some", "at", "in", "on", "about", "with", "after", "week", "time", "lot", "more", "still",
];

fn capitalize(words: &[&str]) -> String {
    let s = words.join(" ");
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => s,
    }
}

/// One sentence of the given model class: a few filler words plus two class
/// keywords, ending in a period.
pub fn class_sentence<R: Rng>(label: AppraisalLabel, rng: &mut R) -> String {
    let class = label.model_class_index().expect("model class");
    let mut words: Vec<&str> = (0..rng.random_range(4..=8)).map(|_| *FILLER.choose(rng).expect("non-empty")).collect();
    words.extend(CLASS_KEYWORDS[class].choose_multiple(rng, 2));
    words.shuffle(rng);
    capitalize(&words) + "."
}

/// `per_class` sentences for each of the nine classes, interleaved by class.
/// Every sentence is its own pair so splits can separate them freely.
pub fn separable_sentences(per_class: usize, seed: u64) -> Vec<SentenceInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_class * 9);
    for i in 0..per_class {
        for label in AppraisalLabel::MODEL_CLASSES {
            let text = class_sentence(label, &mut rng);
            let n = out.len();
            out.push(SentenceInstance {
                pair_id: format!("syn{n:06}-r{n:06}"),
                role: if i % 2 == 0 { Role::Target } else { Role::Observer },
                sent_index: 0,
                start: 0,
                end: text.chars().count(),
                text,
                gold_label: label,
                multi_label: false,
            });
        }
    }
    out
}

struct Topic {
    target: [&'static str; 3],
    observer: [&'static str; 3],
}

const TOPICS: [Topic; 16] = [
    Topic { target: ["died", "passed", "gone"], observer: ["condolences", "loss", "memory"] },
    Topic { target: ["fired", "laid", "unemployed"], observer: ["career", "hiring", "resume"] },
    Topic { target: ["dumped", "cheated", "breakup"], observer: ["heal", "dating", "closure"] },
    Topic { target: ["failed", "exam", "grades"], observer: ["study", "retake", "tutor"] },
    Topic { target: ["sick", "cancer", "chemo"], observer: ["recovery", "doctors", "treatment"] },
    Topic { target: ["broke", "debt", "rent"], observer: ["budget", "savings", "loan"] },
    Topic { target: ["alone", "lonely", "isolated"], observer: ["friends", "company", "reach"] },
    Topic { target: ["panic", "anxious", "nervous"], observer: ["breathe", "calm", "therapy"] },
    Topic { target: ["insomnia", "awake", "tired"], observer: ["rest", "melatonin", "routine"] },
    Topic { target: ["dog", "cat", "vet"], observer: ["furry", "companion", "paws"] },
    Topic { target: ["parents", "mom", "dad"], observer: ["family", "relatives", "home"] },
    Topic { target: ["moving", "relocate", "city"], observer: ["settle", "neighborhood", "apartment"] },
    Topic { target: ["sprained", "leg", "fracture"], observer: ["physio", "crutches", "healing"] },
    Topic { target: ["crashed", "car", "wreck"], observer: ["insurance", "mechanic", "repair"] },
    Topic { target: ["bullied", "teased", "school"], observer: ["teacher", "counselor", "report"] },
    Topic { target: ["weight", "body", "mirror"], observer: ["healthy", "exercise", "gentle"] },
];

const TARGET_FILLER: [&str; 10] = ["i", "my", "so", "feel", "am", "was", "just", "really", "today", "after"];
const OBSERVER_FILLER: [&str; 10] = ["you", "your", "will", "can", "be", "it", "that", "sounds", "hope", "here"];
const SHARED_NOISE: [&str; 6] = ["okay", "life", "things", "honestly", "everything", "lately"];

/// Share of positive Observer spans that repeat one Target word.
pub const ECHO_RATE: f64 = 0.3;

fn span_text<R: Rng>(content: &[&str], filler: &[&str], rng: &mut R) -> String {
    let mut words: Vec<&str> = content.to_vec();
    words.extend((0..rng.random_range(2..=3)).map(|_| *filler.choose(rng).expect("non-empty")));
    if rng.random_bool(0.25) {
        words.push(SHARED_NOISE.choose(rng).expect("non-empty"));
    }
    words.shuffle(rng);
    words.join(" ")
}

fn observer_text<R: Rng>(topic: &Topic, echo: Option<&'static str>, rng: &mut R) -> String {
    let mut content: Vec<&str> = topic.observer.choose_multiple(rng, 2).copied().collect();
    content.extend(echo);
    span_text(&content, &OBSERVER_FILLER, rng)
}

/// Paraphrase-style span pairs. Each Target span draws words from one
/// topic; its aligned Observer span answers with that topic's Observer
/// vocabulary and, at [`ECHO_RATE`], repeats one Target word. The `ratio`
/// negatives per positive answer from other topics. Word overlap is
/// therefore a precise but low-recall signal.
pub fn paraphrase_pairs(positives: usize, ratio: usize, seed: u64) -> Vec<SpanPairInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(positives * (ratio + 1));
    for i in 0..positives {
        let pair_id = pair_id_for(&format!("para{i:05}"), &format!("obs{i:05}"));
        let t = rng.random_range(0..TOPICS.len());
        let topic = &TOPICS[t];
        let target_words: Vec<&str> = topic.target.choose_multiple(&mut rng, 2).copied().collect();
        let target = SpanRef {
            span_id: span_id(&pair_id, Role::Target, 0),
            text: span_text(&target_words, &TARGET_FILLER, &mut rng),
            label: AppraisalLabel::ObjectiveExperience,
        };
        let echo = rng.random_bool(ECHO_RATE).then(|| *target_words.choose(&mut rng).expect("two words"));
        let observer = |ord: usize, text: String| SpanRef {
            span_id: span_id(&pair_id, Role::Observer, ord),
            text,
            label: AppraisalLabel::Trope,
        };
        out.push(SpanPairInstance {
            pair_id: pair_id.clone(),
            target_span: target.clone(),
            observer_span: observer(0, observer_text(topic, echo, &mut rng)),
            is_aligned: true,
        });
        for j in 0..ratio {
            let mut other = rng.random_range(0..TOPICS.len() - 1);
            if other >= t {
                other += 1;
            }
            out.push(SpanPairInstance {
                pair_id: pair_id.clone(),
                target_span: target.clone(),
                observer_span: observer(j + 1, observer_text(&TOPICS[other], None, &mut rng)),
                is_aligned: false,
            });
        }
    }
    out
}

const SUBREDDITS: [&str; 6] = ["Advice", "offmychest", "depression", "relationship_advice", "GriefSupport", "Anxiety"];
const FLAIRS: [&str; 8] = [
    "Therapist",
    "LCSW, social worker",
    "RN",
    "Psychologist (PhD)",
    "Licensed Professional Counselor",
    "Psych student",
    "Helpful redditor",
    "Teacher",
];

/// Unannotated pairs with several sentences per side, seeded.
pub fn pair_corpus(n: usize, seed: u64) -> Vec<TargetObserverPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let sentences = |k: usize, rng: &mut ChaCha8Rng| -> String {
                (0..k)
                    .map(|_| class_sentence(*AppraisalLabel::MODEL_CLASSES.choose(rng).expect("classes"), rng))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let target_text = sentences(rng.random_range(2..=6), &mut rng);
            let observer_text = sentences(rng.random_range(1..=5), &mut rng);
            let created = 1_500_000_000 + 3600 * i as i64;
            TargetObserverPair {
                pair_id: pair_id_for(&format!("t{:04}", i / 3), &format!("c{i:05}")),
                target_text,
                observer_text,
                subreddit: SUBREDDITS.choose(&mut rng).expect("non-empty").to_string(),
                target_author: format!("poster{}", rng.random_range(0..200)),
                observer_author: format!("helper{}", rng.random_range(0..60)),
                observer_flair: rng.random_bool(0.5).then(|| FLAIRS.choose(&mut rng).expect("non-empty").to_string()),
                created_utc_target: created,
                created_utc_observer: created + rng.random_range(1..10_000),
                pair_kind: if i % 3 == 0 { PairKind::PostComment } else { PairKind::CommentComment },
            }
        })
        .collect()
}

/// Annotated corpus with one span per sentence and random alignments that
/// avoid excluded label pairs. Target spans are never Trope.
pub fn gold_corpus(n: usize, seed: u64) -> Vec<GoldInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = pair_corpus(n, seed ^ 0x5eed);
    pairs
        .into_iter()
        .map(|pair| {
            let mut spans = Vec::new();
            for role in [Role::Target, Role::Observer] {
                for (ord, s) in crate::text::segment_sentences(pair.text(role)).into_iter().enumerate() {
                    let label = loop {
                        let l = *AppraisalLabel::ANNOTATABLE.choose(&mut rng).expect("labels");
                        if !(role == Role::Target && l == AppraisalLabel::Trope) {
                            break l;
                        }
                    };
                    spans.push(Span { span_id: span_id(&pair.pair_id, role, ord), role, start: s.start, end: s.end, label });
                }
            }
            let targets: Vec<&Span> = spans.iter().filter(|s| s.role == Role::Target).collect();
            let mut alignments = Vec::new();
            for o in spans.iter().filter(|s| s.role == Role::Observer) {
                if rng.random_bool(0.4) {
                    let t = targets.choose(&mut rng).expect("target has sentences");
                    if !is_excluded(t.label, o.label) {
                        alignments.push(Alignment { observer_span_id: o.span_id.clone(), target_span_id: t.span_id.clone() });
                    }
                }
            }
            GoldInstance { pair, spans, alignments, adjudicated_by: "adjudicator".into(), phase1_batch: 1 }
        })
        .collect()
}

/// Parameters of [`alignment_study`]. Each reply's percent alignment is
/// drawn around its group mean, plus `visibility_effect` when the reply
/// shows its author's profession flair.
#[derive(Clone, Debug)]
pub struct StudyParams {
    pub authors: usize,
    pub replies_per_author: usize,
    pub replies_per_target: usize,
    pub professional_share: f64,
    /// Share of professionals whose first half of replies carries a student flair.
    pub student_share: f64,
    pub professional_mean: f64,
    pub student_mean: f64,
    pub layperson_mean: f64,
    pub visibility_effect: f64,
    pub noise: f64,
    pub target_spans: usize,
    /// Target span labels are drawn from this many analysis labels.
    pub labels_per_target: usize,
}

impl Default for StudyParams {
    fn default() -> Self {
        StudyParams {
            authors: 500,
            replies_per_author: 40,
            replies_per_target: 4,
            professional_share: 1.0,
            student_share: 0.0,
            professional_mean: 0.5,
            student_mean: 0.5,
            layperson_mean: 0.5,
            visibility_effect: 0.0,
            noise: 0.1,
            target_spans: 20,
            labels_per_target: 2,
        }
    }
}

const STUDY_SUBREDDITS: [&str; 8] = [
    "abusiverelationships",
    "adultsurvivors",
    "Advice",
    "Anxiety",
    "depression",
    "GriefSupport",
    "offmychest",
    "relationship_advice",
];
const PROFESSION_FLAIRS: [&str; 9] =
    ["Counselor", "Funeral director", "MD", "RN", "Psychiatrist", "Psychologist", "Psychotherapist", "LCSW", "Therapist"];

/// Alignment records with known group effects, for checking the analyses.
/// Every Observer span repeats the label of the Target span at the same
/// index and links only ever join equal indices.
pub fn alignment_study(params: &StudyParams, seed: u64) -> Vec<AlignmentRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = params.authors * params.replies_per_author;
    let n_targets = total.div_ceil(params.replies_per_target.max(1)).max(1);
    let labels: Vec<AppraisalLabel> = AppraisalLabel::ANALYSIS
        .iter()
        .copied()
        .filter(|&l| l != AppraisalLabel::Trope)
        .take(params.labels_per_target.max(1))
        .collect();
    let targets: Vec<(String, Vec<RecordSpan>)> = (0..n_targets)
        .map(|_| {
            let sub = STUDY_SUBREDDITS.choose(&mut rng).expect("non-empty").to_string();
            let spans = (0..params.target_spans)
                .map(|i| RecordSpan {
                    start: i * 10,
                    end: i * 10 + 9,
                    label: *labels.choose(&mut rng).expect("labels"),
                    confidence: 1.0,
                })
                .collect();
            (sub, spans)
        })
        .collect();
    let noise = Normal::new(0.0, params.noise.max(0.0)).expect("finite noise");
    let mut out = Vec::with_capacity(total);
    for a in 0..params.authors {
        let professional = rng.random_bool(params.professional_share.clamp(0.0, 1.0));
        let student_first = professional && rng.random_bool(params.student_share.clamp(0.0, 1.0));
        let flair = *PROFESSION_FLAIRS.choose(&mut rng).expect("non-empty");
        let switch = if student_first { params.replies_per_author / 2 } else { 0 };
        for k in 0..params.replies_per_author {
            let t = rng.random_range(0..n_targets);
            let (subreddit, target_spans) = &targets[t];
            let student = k < switch;
            let visible = professional && (k == 0 || k == switch || rng.random_bool(0.5));
            let observer_flair = match (professional, visible, student) {
                (true, true, true) => Some(format!("{flair} student")),
                (true, true, false) => Some(flair.to_string()),
                (false, _, _) if rng.random_bool(0.2) => Some("Helpful redditor".to_string()),
                _ => None,
            };
            let base = match (professional, student) {
                (false, _) => params.layperson_mean,
                (true, true) => params.student_mean,
                (true, false) => params.professional_mean,
            };
            let effect = if visible && !student { params.visibility_effect } else { 0.0 };
            let y = (base + effect + noise.sample(&mut rng)).clamp(0.0, 1.0);
            let m = target_spans.len();
            let linked = (y * m as f64).round() as usize;
            let mut idx: Vec<usize> = rand::seq::index::sample(&mut rng, m, linked.min(m)).into_vec();
            idx.sort_unstable();
            let observer_spans = target_spans.clone();
            let n = out.len();
            out.push(AlignmentRecord {
                pair_id: pair_id_for(&format!("tg{t:06}"), &format!("r{n:06}")),
                target_id: format!("tg{t:06}"),
                subreddit: subreddit.clone(),
                observer_author: format!("author{a:04}"),
                observer_flair,
                created_utc_observer: 1_500_000_000 + 60 * k as i64,
                target_spans: target_spans.clone(),
                observer_spans,
                links: idx.into_iter().map(|i| Link { target_idx: i, observer_idx: i, probability: 0.9 }).collect(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::jaccard_baseline;
    use crate::data::validate_instance;

    #[test]
    fn keyword_oracle_recovers_separable_classes() {
        let data = separable_sentences(50, 4);
        let correct = data
            .iter()
            .filter(|s| {
                let words = crate::text::word_tokens(&s.text);
                let guess =
                    (0..9).max_by_key(|&c| words.iter().filter(|w| CLASS_KEYWORDS[c].contains(&w.as_str())).count()).unwrap();
                AppraisalLabel::MODEL_CLASSES[guess] == s.gold_label
            })
            .count();
        assert!(correct as f64 / data.len() as f64 >= 0.95);
    }

    #[test]
    fn paraphrase_set_shape() {
        let data = paraphrase_pairs(50, 11, 2);
        assert_eq!(data.len(), 600);
        assert_eq!(data.iter().filter(|p| p.is_aligned).count(), 50);
        let echoed =
            data.iter().filter(|p| p.is_aligned && jaccard_baseline(&p.target_span.text, &p.observer_span.text) > 0.0).count();
        assert!(echoed > 5 && echoed < 30, "{echoed}");
    }

    #[test]
    fn gold_corpus_is_valid() {
        for g in gold_corpus(40, 9) {
            assert!(validate_instance(&g).is_valid(), "{}", validate_instance(&g));
        }
    }
}
