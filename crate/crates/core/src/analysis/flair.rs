use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::pipeline::AlignmentRecord;
use crate::text::word_tokens;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Profession {
    Counselor,
    FuneralRole,
    MedicalDoctor,
    Nurse,
    Psychiatrist,
    Psychologist,
    Psychotherapist,
    SocialWorker,
    Therapist,
    Layperson,
}

impl Profession {
    pub const ALL: [Profession; 10] = [
        Profession::Counselor,
        Profession::FuneralRole,
        Profession::MedicalDoctor,
        Profession::Nurse,
        Profession::Psychiatrist,
        Profession::Psychologist,
        Profession::Psychotherapist,
        Profession::SocialWorker,
        Profession::Therapist,
        Profession::Layperson,
    ];

    /// Professions compared against laypeople on the same Target messages.
    pub const MATCHED: [Profession; 5] =
        [Profession::Therapist, Profession::SocialWorker, Profession::Nurse, Profession::Psychologist, Profession::Counselor];

    pub fn as_str(self) -> &'static str {
        match self {
            Profession::Counselor => "Counselor",
            Profession::FuneralRole => "FuneralRole",
            Profession::MedicalDoctor => "MedicalDoctor",
            Profession::Nurse => "Nurse",
            Profession::Psychiatrist => "Psychiatrist",
            Profession::Psychologist => "Psychologist",
            Profession::Psychotherapist => "Psychotherapist",
            Profession::SocialWorker => "SocialWorker",
            Profession::Therapist => "Therapist",
            Profession::Layperson => "Layperson",
        }
    }
}

impl fmt::Display for Profession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Profession {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Profession::ALL.iter().copied().find(|p| p.as_str() == s).ok_or_else(|| format!("unknown profession `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TrainingLevel {
    Licensed,
    Student,
    Unknown,
}

impl FromStr for TrainingLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "licensed" => Ok(TrainingLevel::Licensed),
            "student" => Ok(TrainingLevel::Student),
            "unknown" => Ok(TrainingLevel::Unknown),
            _ => Err(format!("unknown training level `{s}`")),
        }
    }
}

/// `profession` is `None` for flair that maps to no profession.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfessionProfile {
    pub profession: Option<Profession>,
    pub training_level: TrainingLevel,
}

impl ProfessionProfile {
    pub const UNMAPPED: ProfessionProfile = ProfessionProfile { profession: None, training_level: TrainingLevel::Unknown };
}

pub const STUDENT_MARKERS: [&[&str]; 5] = [&["student"], &["intern"], &["in", "training"], &["trainee"], &["grad", "school"]];

#[derive(Clone, Debug, PartialEq)]
struct FlairRule {
    pattern: Vec<String>,
    profession: Profession,
    level: TrainingLevel,
}

/// Ordered pattern table; the first rule whose words occur contiguously in
/// the flair wins.
#[derive(Clone, Debug, PartialEq)]
pub struct FlairTable {
    rules: Vec<FlairRule>,
}

const BUILTIN: &str = include_str!("../../data/flair_professions.tsv");

fn contains_words(haystack: &[String], needle: &[impl AsRef<str>]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w.iter().zip(needle).all(|(a, b)| a == b.as_ref()))
}

impl FlairTable {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("shipped flair table parses")
    }

    /// TSV with columns pattern, profession, level. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self, AnalysisError> {
        let mut rules = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| AnalysisError::FlairTable { line: n + 1, message };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(bad(format!("expected 3 tab-separated columns, found {}", cols.len())));
            }
            let pattern = word_tokens(cols[0]);
            if pattern.is_empty() {
                return Err(bad("empty pattern".into()));
            }
            let profession: Profession = cols[1].trim().parse().map_err(bad)?;
            if profession == Profession::Layperson {
                return Err(bad("Layperson is assigned from history, not flair".into()));
            }
            rules.push(FlairRule { pattern, profession, level: cols[2].trim().parse().map_err(bad)? });
        }
        Ok(FlairTable { rules })
    }

    pub fn load(path: &Path) -> Result<Self, AnalysisError> {
        let text = std::fs::read_to_string(path).map_err(|e| AnalysisError::Io { path: path.to_path_buf(), source: e })?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

pub fn map_flair(flair: &str, table: &FlairTable) -> ProfessionProfile {
    let words = word_tokens(flair);
    let Some(rule) = table.rules.iter().find(|r| contains_words(&words, &r.pattern)) else {
        return ProfessionProfile::UNMAPPED;
    };
    let student = STUDENT_MARKERS.iter().any(|m| contains_words(&words, m));
    ProfessionProfile {
        profession: Some(rule.profession),
        training_level: if student { TrainingLevel::Student } else { rule.level },
    }
}

/// How one reply's author counts in the profession analyses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObserverClass {
    /// Licensed at comment time and at their most recent flair.
    Professional(Profession),
    Student(Profession),
    /// No profession flair anywhere in the author's history.
    Layperson,
    Other,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordProfile {
    pub class: ObserverClass,
    /// Profile in force when the reply was written.
    pub period: ProfessionProfile,
    /// The reply itself shows a profession flair.
    pub flair_visible: bool,
}

const DELETED: [&str; 2] = ["[deleted]", "[removed]"];

/// Profiles every record's author from their whole flair history. A flair
/// period starts at the first reply bearing a new profession flair text;
/// replies without flair belong to the period in force at their timestamp,
/// or to the first period when they precede all flaired replies.
pub fn classify_observers(records: &[AlignmentRecord], table: &FlairTable) -> Vec<RecordProfile> {
    let mapped: Vec<ProfessionProfile> = records
        .iter()
        .map(|r| r.observer_flair.as_deref().map_or(ProfessionProfile::UNMAPPED, |f| map_flair(f, table)))
        .collect();
    let mut by_author: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_author.entry(r.observer_author.as_str()).or_default().push(i);
    }
    let mut out = vec![
        RecordProfile { class: ObserverClass::Other, period: ProfessionProfile::UNMAPPED, flair_visible: false };
        records.len()
    ];
    for (author, mut idx) in by_author {
        idx.sort_by_key(|&i| (records[i].created_utc_observer, i));
        let flaired: Vec<usize> = idx.iter().copied().filter(|&i| mapped[i].profession.is_some()).collect();
        for &i in &idx {
            out[i].flair_visible = mapped[i].profession.is_some();
        }
        if DELETED.contains(&author) {
            continue;
        }
        if flaired.is_empty() {
            for &i in &idx {
                out[i].class = ObserverClass::Layperson;
            }
            continue;
        }
        let latest = mapped[*flaired.last().expect("non-empty")];
        let mut current = mapped[flaired[0]];
        for &i in &idx {
            if mapped[i].profession.is_some() {
                current = mapped[i];
            }
            out[i].period = current;
            let profession = current.profession.expect("flaired");
            out[i].class = match current.training_level {
                TrainingLevel::Licensed if latest.training_level == TrainingLevel::Licensed => {
                    ObserverClass::Professional(profession)
                }
                TrainingLevel::Student => ObserverClass::Student(profession),
                _ => ObserverClass::Other,
            };
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfessionCount {
    pub profession: Profession,
    pub users: usize,
    pub comments: usize,
}

/// Users and replies per class, professions first, then Layperson. Also
/// returns the number of authors with any mapped profession flair.
pub fn profession_counts(records: &[AlignmentRecord], profiles: &[RecordProfile]) -> (Vec<ProfessionCount>, usize) {
    let mut users: BTreeMap<Profession, std::collections::BTreeSet<&str>> = BTreeMap::new();
    let mut comments: BTreeMap<Profession, usize> = BTreeMap::new();
    let mut flaired = std::collections::BTreeSet::new();
    for (r, p) in records.iter().zip(profiles) {
        if p.period.profession.is_some() {
            flaired.insert(r.observer_author.as_str());
        }
        let key = match p.class {
            ObserverClass::Professional(prof) => prof,
            ObserverClass::Layperson => Profession::Layperson,
            _ => continue,
        };
        users.entry(key).or_default().insert(&r.observer_author);
        *comments.entry(key).or_default() += 1;
    }
    let rows = Profession::ALL
        .iter()
        .filter_map(|p| Some(ProfessionCount { profession: *p, users: users.get(p)?.len(), comments: comments[p] }))
        .collect();
    (rows, flaired.len())
}
