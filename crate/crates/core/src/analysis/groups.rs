use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::flair::{ObserverClass, Profession, RecordProfile, TrainingLevel};
use super::stats::{fit_ols, independent_t_test, mean_se, Factor, RegressionResult, StatsError, TTest, Variance};
use crate::data::AppraisalLabel;
use crate::pipeline::{AlignmentRecord, Link};

/// Share of Target spans with at least one link; `None` without Target spans.
pub fn percent_alignment(record: &AlignmentRecord) -> Option<f64> {
    if record.target_spans.is_empty() {
        return None;
    }
    let linked: BTreeSet<usize> = record.links.iter().map(|l| l.target_idx).collect();
    Some(linked.len() as f64 / record.target_spans.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanUnit {
    /// Every reply is one observation.
    #[default]
    Comment,
    /// Replies are averaged per author first.
    Author,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupMean {
    pub group: String,
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// Mean percent alignment per group. `groups[i]` assigns record `i` (None
/// leaves it out). With `order`, groups come out in that order and groups
/// not listed are ignored; otherwise they are sorted by name. Groups with
/// no usable record are dropped with a warning.
pub fn group_mean_alignment(
    records: &[AlignmentRecord],
    groups: &[Option<String>],
    order: Option<&[String]>,
    unit: MeanUnit,
) -> Vec<GroupMean> {
    assert_eq!(records.len(), groups.len(), "one group per record");
    let mut values: BTreeMap<&str, BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for (r, g) in records.iter().zip(groups) {
        let (Some(g), Some(p)) = (g, percent_alignment(r)) else { continue };
        let author = match unit {
            MeanUnit::Comment => "",
            MeanUnit::Author => r.observer_author.as_str(),
        };
        values.entry(g.as_str()).or_default().entry(author).or_default().push(p);
    }
    let names: Vec<String> = match order {
        Some(o) => o.to_vec(),
        None => {
            let mut all: Vec<String> = groups.iter().flatten().cloned().collect();
            all.sort();
            all.dedup();
            all
        }
    };
    names
        .into_iter()
        .filter_map(|name| {
            let obs: Vec<f64> = match (values.get(name.as_str()), unit) {
                (None, _) => Vec::new(),
                (Some(m), MeanUnit::Comment) => m.values().flatten().copied().collect(),
                (Some(m), MeanUnit::Author) => m.values().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect(),
            };
            match mean_se(&obs) {
                Some(m) => Some(GroupMean { group: name, mean: m.mean, se: m.se, n: m.n }),
                None => {
                    log::warn!("group `{name}` has no record with Target spans; dropped");
                    None
                }
            }
        })
        .collect()
}

/// Group per record: profession for professionals, `Layperson`, or None.
pub fn profession_groups(profiles: &[RecordProfile]) -> Vec<Option<String>> {
    profiles
        .iter()
        .map(|p| match p.class {
            ObserverClass::Professional(prof) => Some(prof.to_string()),
            ObserverClass::Layperson => Some(Profession::Layperson.to_string()),
            _ => None,
        })
        .collect()
}

/// Group per record: the raw flair text for replies in `subreddit` whose
/// flair is one of `levels`.
pub fn flair_level_groups(records: &[AlignmentRecord], subreddit: &str, levels: &[String]) -> Vec<Option<String>> {
    records
        .iter()
        .map(|r| {
            let flair = r.observer_flair.as_ref()?;
            (r.subreddit.eq_ignore_ascii_case(subreddit) && levels.contains(flair)).then(|| flair.clone())
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperienceRow {
    pub profession: Profession,
    pub student: GroupMean,
    pub licensed: GroupMean,
    pub test: Option<TTest>,
    pub authors: usize,
}

/// Student-period vs licensed-period replies of authors who had both, per
/// profession of the licensed period.
pub fn experience_comparison(records: &[AlignmentRecord], profiles: &[RecordProfile], variance: Variance) -> Vec<ExperienceRow> {
    let mut periods: BTreeMap<&str, (BTreeSet<Profession>, bool)> = BTreeMap::new();
    for (r, p) in records.iter().zip(profiles) {
        let e = periods.entry(&r.observer_author).or_default();
        match (p.period.profession, p.period.training_level) {
            (Some(prof), TrainingLevel::Licensed) => {
                e.0.insert(prof);
            }
            (Some(_), TrainingLevel::Student) => e.1 = true,
            _ => {}
        }
    }
    // Per profession: student-period values, licensed-period values, authors.
    type Samples<'a> = (Vec<f64>, Vec<f64>, BTreeSet<&'a str>);
    let mut samples: BTreeMap<Profession, Samples> = BTreeMap::new();
    for (r, p) in records.iter().zip(profiles) {
        let Some((licensed, true)) = periods.get(r.observer_author.as_str()) else { continue };
        let Some(pct) = percent_alignment(r) else { continue };
        for &prof in licensed {
            let s = samples.entry(prof).or_default();
            match p.period.training_level {
                TrainingLevel::Student => s.0.push(pct),
                TrainingLevel::Licensed if p.period.profession == Some(prof) => s.1.push(pct),
                _ => continue,
            }
            s.2.insert(&r.observer_author);
        }
    }
    samples
        .into_iter()
        .filter_map(|(prof, (student, licensed, authors))| {
            let group =
                |name: &str, v: &[f64]| mean_se(v).map(|m| GroupMean { group: name.into(), mean: m.mean, se: m.se, n: m.n });
            let row = ExperienceRow {
                profession: prof,
                student: group("Student", &student)?,
                licensed: group("Licensed", &licensed)?,
                test: independent_t_test(&student, &licensed, variance).ok(),
                authors: authors.len(),
            };
            Some(row)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedDiff {
    pub label: AppraisalLabel,
    pub professional: GroupMean,
    pub layperson: GroupMean,
    /// Professional mean minus layperson mean.
    pub difference: f64,
}

/// Share of the record's Target spans labeled `label` that link to an
/// Observer span with the same label.
pub fn same_label_rate(record: &AlignmentRecord, label: AppraisalLabel) -> Option<f64> {
    let with_label = record.target_spans.iter().filter(|s| s.label == label).count();
    if with_label == 0 {
        return None;
    }
    let matched: BTreeSet<usize> = record
        .links
        .iter()
        .filter(|l| record.target_spans[l.target_idx].label == label && record.observer_spans[l.observer_idx].label == label)
        .map(|l| l.target_idx)
        .collect();
    Some(matched.len() as f64 / with_label as f64)
}

/// Same-label alignment of professionals vs laypeople, restricted to Target
/// messages with replies from both.
pub fn matched_same_appraisal_diff(records: &[AlignmentRecord], profiles: &[RecordProfile]) -> Vec<MatchedDiff> {
    let is_pro = |p: &RecordProfile| matches!(p.class, ObserverClass::Professional(prof) if Profession::MATCHED.contains(&prof));
    let is_lay = |p: &RecordProfile| p.class == ObserverClass::Layperson;
    let mut seen: BTreeMap<&str, (bool, bool)> = BTreeMap::new();
    for (r, p) in records.iter().zip(profiles) {
        let e = seen.entry(&r.target_id).or_default();
        e.0 |= is_pro(p);
        e.1 |= is_lay(p);
    }
    let mut out = Vec::new();
    for label in AppraisalLabel::ANALYSIS.into_iter().filter(|&l| l != AppraisalLabel::Trope) {
        let (mut pro, mut lay) = (Vec::new(), Vec::new());
        for (r, p) in records.iter().zip(profiles) {
            if seen[r.target_id.as_str()] != (true, true) {
                continue;
            }
            let Some(rate) = same_label_rate(r, label) else { continue };
            if is_pro(p) {
                pro.push(rate);
            } else if is_lay(p) {
                lay.push(rate);
            }
        }
        let (Some(a), Some(b)) = (mean_se(&pro), mean_se(&lay)) else {
            log::warn!("{label}: no support in one of the groups; dropped");
            continue;
        };
        out.push(MatchedDiff {
            label,
            professional: GroupMean { group: "Professional".into(), mean: a.mean, se: a.se, n: a.n },
            layperson: GroupMean { group: "Layperson".into(), mean: b.mean, se: b.se, n: b.n },
            difference: a.mean - b.mean,
        });
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupRate {
    pub group: String,
    pub numerator: u64,
    pub denominator: u64,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    /// Sorted by group name.
    pub rows: Vec<GroupRate>,
    /// Highest rates first; ties by group name.
    pub top: Vec<GroupRate>,
    /// Lowest rates first; ties by group name.
    pub bottom: Vec<GroupRate>,
}

/// Rate of links passing `numerator` among links passing `denominator`,
/// per group. The numerator is only tested on denominator links.
pub fn group_conditional_rate<N, D, G>(
    records: &[AlignmentRecord],
    numerator: N,
    denominator: D,
    group_by: G,
    k: usize,
) -> RateTable
where
    N: Fn(&AlignmentRecord, &Link) -> bool,
    D: Fn(&AlignmentRecord, &Link) -> bool,
    G: Fn(&AlignmentRecord) -> Option<String>,
{
    let mut tally: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for r in records {
        let Some(g) = group_by(r) else { continue };
        for l in r.links.iter().filter(|l| denominator(r, l)) {
            let e = tally.entry(g.clone()).or_default();
            e.1 += 1;
            e.0 += numerator(r, l) as u64;
        }
    }
    let rows: Vec<GroupRate> = tally
        .into_iter()
        .map(|(group, (n, d))| GroupRate { group, numerator: n, denominator: d, rate: n as f64 / d as f64 })
        .collect();
    let mut top = rows.clone();
    top.sort_by(|a, b| b.rate.total_cmp(&a.rate).then_with(|| a.group.cmp(&b.group)));
    top.truncate(k);
    let mut bottom = rows.clone();
    bottom.sort_by(|a, b| a.rate.total_cmp(&b.rate).then_with(|| a.group.cmp(&b.group)));
    bottom.truncate(k);
    RateTable { rows, top, bottom }
}

pub fn any_link(_: &AlignmentRecord, _: &Link) -> bool {
    true
}

pub fn observer_gives_advice(r: &AlignmentRecord, l: &Link) -> bool {
    r.observer_spans[l.observer_idx].label == AppraisalLabel::Advice
}

pub fn labels_differ(r: &AlignmentRecord, l: &Link) -> bool {
    r.observer_spans[l.observer_idx].label != r.target_spans[l.target_idx].label
}

/// Percent alignment of professionals' replies regressed on profession,
/// subreddit and whether the reply shows the profession flair.
pub fn profession_regression(records: &[AlignmentRecord], profiles: &[RecordProfile]) -> Result<RegressionResult, StatsError> {
    let keep: Vec<bool> = profiles.iter().map(|p| matches!(p.class, ObserverClass::Professional(_))).collect();
    let response = records.iter().zip(&keep).map(|(r, &k)| if k { percent_alignment(r) } else { None }).collect::<Vec<_>>();
    let profession = profiles
        .iter()
        .map(|p| match p.class {
            ObserverClass::Professional(prof) => Some(prof.to_string()),
            _ => None,
        })
        .collect();
    let subreddit = records.iter().map(|r| Some(r.subreddit.clone())).collect();
    let visible = profiles.iter().map(|p| Some(p.flair_visible)).collect();
    fit_ols(
        &response,
        &[
            Factor::Categorical { name: "Profession".into(), values: profession },
            Factor::Categorical { name: "Subreddit".into(), values: subreddit },
            Factor::Binary { name: "is_title_visible".into(), values: visible },
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::flair::{classify_observers, FlairTable};
    use crate::analysis::tests::{random_records, record};
    use crate::data::AppraisalLabel::*;
    use crate::synth::{alignment_study, StudyParams};
    use proptest::prelude::*;

    #[test]
    fn percent_alignment_examples() {
        let four = [Pleasantness, Certainty, Advice, Certainty];
        assert_eq!(percent_alignment(&record("t", "s", &four, &[Advice, Advice], &[(0, 0), (2, 1)])), Some(0.5));
        assert_eq!(percent_alignment(&record("t", "s", &four, &[Advice], &[])), Some(0.0));
        let three = [Pleasantness, Certainty, Certainty];
        let r = record("t", "s", &three, &[Advice, Trope, Certainty], &[(1, 0), (1, 1), (1, 2)]);
        assert!((percent_alignment(&r).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(percent_alignment(&record("t", "s", &[], &[Advice], &[])), None);
    }

    proptest! {
        #[test]
        fn percent_alignment_ignores_link_order_and_duplicates(seed in 0u64..500, rot in 0usize..10) {
            let mut r = random_records(1, seed).remove(0);
            let before = percent_alignment(&r);
            if !r.links.is_empty() {
                let n = r.links.len();
                r.links.rotate_left(rot % n);
                let dup = r.links[0].clone();
                r.links.push(dup);
            }
            prop_assert_eq!(before, percent_alignment(&r));
        }
    }

    #[test]
    fn group_mean_formula_and_order() {
        let full = record("a", "s", &[Advice], &[Advice], &[(0, 0)]);
        let half = record("b", "s", &[Advice, Certainty], &[Advice], &[(0, 0)]);
        let none = record("c", "s", &[Advice], &[Advice], &[]);
        let empty = record("d", "s", &[], &[Advice], &[]);
        let recs = [none, half, full, empty];
        let g = |s: &str| Some(s.to_string());
        let groups = [g("x"), g("x"), g("x"), g("y")];
        let means = group_mean_alignment(&recs, &groups, None, MeanUnit::Comment);
        assert_eq!(means.len(), 1, "y has no Target spans");
        assert!((means[0].mean - 0.5).abs() < 1e-15);
        assert!((means[0].se - 0.5 / 3f64.sqrt()).abs() < 1e-12);
        let order = ["z".to_string(), "x".to_string()];
        let ordered = group_mean_alignment(&recs, &groups, Some(&order), MeanUnit::Comment);
        assert_eq!(ordered.iter().map(|m| m.group.as_str()).collect::<Vec<_>>(), ["x"]);
    }

    #[test]
    fn author_unit_averages_per_author_first() {
        let mut recs = vec![
            record("a", "s", &[Advice], &[Advice], &[(0, 0)]),
            record("b", "s", &[Advice], &[Advice], &[(0, 0)]),
            record("c", "s", &[Advice], &[Advice], &[]),
        ];
        recs[2].observer_author = "other".into();
        let groups = vec![Some("g".to_string()); 3];
        let m = group_mean_alignment(&recs, &groups, None, MeanUnit::Author);
        assert_eq!((m[0].mean, m[0].n), (0.5, 2));
        let c = group_mean_alignment(&recs, &groups, None, MeanUnit::Comment);
        assert!((c[0].mean - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn injected_group_means_recovered() {
        let params = StudyParams { authors: 300, replies_per_author: 10, professional_share: 0.5, ..StudyParams::default() };
        let params = StudyParams { professional_mean: 0.6, layperson_mean: 0.3, ..params };
        let recs = alignment_study(&params, 4);
        let profiles = classify_observers(&recs, &FlairTable::builtin());
        let groups: Vec<Option<String>> = profiles
            .iter()
            .map(|p| match p.class {
                ObserverClass::Professional(_) => Some("pro".into()),
                ObserverClass::Layperson => Some("lay".into()),
                _ => None,
            })
            .collect();
        let means = group_mean_alignment(&recs, &groups, None, MeanUnit::Comment);
        let get = |g: &str| means.iter().find(|m| m.group == g).unwrap().clone();
        let (lay, pro) = (get("lay"), get("pro"));
        assert!((pro.mean - 0.6).abs() < 2.0 * pro.se.max(1e-3), "{pro:?}");
        assert!((lay.mean - 0.3).abs() < 2.0 * lay.se.max(1e-3), "{lay:?}");
    }

    #[test]
    fn regression_recovers_visibility_effect() {
        let params = StudyParams { visibility_effect: 0.027, noise: 0.276, ..StudyParams::default() };
        let recs = alignment_study(&params, 11);
        let profiles = classify_observers(&recs, &FlairTable::builtin());
        let r = profession_regression(&recs, &profiles).unwrap();
        assert_eq!(r.n, 20_000);
        assert_eq!(r.reference_levels["Profession"], "Counselor");
        let beta = r.coefficient("is_title_visibleTrue").unwrap();
        assert!((beta.estimate - 0.027).abs() <= 0.012, "{beta:?}");
    }

    fn tally_matched(
        recs: &[AlignmentRecord],
        profiles: &[RecordProfile],
        label: AppraisalLabel,
    ) -> Option<(f64, f64, usize, usize)> {
        let mut targets: BTreeMap<&str, (bool, bool)> = BTreeMap::new();
        for (r, p) in recs.iter().zip(profiles) {
            let e = targets.entry(&r.target_id).or_default();
            if let ObserverClass::Professional(prof) = p.class {
                e.0 |= Profession::MATCHED.contains(&prof);
            }
            e.1 |= p.class == ObserverClass::Layperson;
        }
        let (mut ps, mut pn, mut ls, mut ln) = (0.0, 0, 0.0, 0);
        for (r, p) in recs.iter().zip(profiles) {
            if targets[r.target_id.as_str()] != (true, true) {
                continue;
            }
            let idx: Vec<usize> = (0..r.target_spans.len()).filter(|&i| r.target_spans[i].label == label).collect();
            if idx.is_empty() {
                continue;
            }
            let hit = idx
                .iter()
                .filter(|&&i| r.links.iter().any(|l| l.target_idx == i && r.observer_spans[l.observer_idx].label == label))
                .count();
            let rate = hit as f64 / idx.len() as f64;
            match p.class {
                ObserverClass::Professional(prof) if Profession::MATCHED.contains(&prof) => {
                    ps += rate;
                    pn += 1
                }
                ObserverClass::Layperson => {
                    ls += rate;
                    ln += 1
                }
                _ => {}
            }
        }
        (pn > 0 && ln > 0).then(|| (ps / pn as f64, ls / ln as f64, pn, ln))
    }

    #[test]
    fn matched_diff_matches_tally_oracle() {
        let mut recs = random_records(40, 21);
        let flairs = [Some("Therapist"), None, Some("Psychiatrist"), Some("LCSW")];
        for (i, r) in recs.iter_mut().enumerate() {
            r.target_id = format!("t{}", i % 8);
            r.observer_author = format!("u{}", i % 13);
            r.observer_flair = flairs[i % 13 % 4].map(String::from);
        }
        let profiles = classify_observers(&recs, &FlairTable::builtin());
        let diffs = matched_same_appraisal_diff(&recs, &profiles);
        assert!(!diffs.is_empty());
        for label in AppraisalLabel::ANALYSIS.into_iter().filter(|&l| l != Trope) {
            let ours = diffs.iter().find(|d| d.label == label);
            match (ours, tally_matched(&recs, &profiles, label)) {
                (Some(d), Some((p, l, pn, ln))) => {
                    assert!((d.professional.mean - p).abs() < 1e-12);
                    assert!((d.layperson.mean - l).abs() < 1e-12);
                    assert_eq!((d.professional.n, d.layperson.n), (pn, ln));
                    assert!((d.difference - (p - l)).abs() < 1e-12);
                }
                (None, None) => {}
                other => panic!("{label}: {other:?}"),
            }
        }
    }

    #[test]
    fn advice_heavy_professionals_score_lower_on_pleasantness() {
        let mut pro = record("t", "s", &[Pleasantness], &[Advice], &[(0, 0)]);
        pro.observer_author = "pro".into();
        pro.observer_flair = Some("Counselor".into());
        let mut lay = record("t", "s", &[Pleasantness], &[Pleasantness], &[(0, 0)]);
        lay.observer_author = "lay".into();
        let recs = [pro, lay];
        let profiles = classify_observers(&recs, &FlairTable::builtin());
        let d = matched_same_appraisal_diff(&recs, &profiles);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].label, Pleasantness);
        assert!(d[0].difference < 0.0);
    }

    #[test]
    fn equal_behaviour_gives_near_zero_differences() {
        let params = StudyParams { professional_share: 0.5, labels_per_target: 4, ..StudyParams::default() };
        let recs = alignment_study(&StudyParams { authors: 400, ..params }, 5);
        let profiles = classify_observers(&recs, &FlairTable::builtin());
        let diffs = matched_same_appraisal_diff(&recs, &profiles);
        assert!(!diffs.is_empty());
        for d in diffs {
            let se = (d.professional.se.powi(2) + d.layperson.se.powi(2)).sqrt();
            assert!(d.difference.abs() < 2.0 * se + 1e-9, "{d:?}");
        }
    }

    #[test]
    fn rate_examples() {
        let r = record("t", "g", &[Pleasantness, Certainty], &[Advice, Pleasantness], &[(0, 0), (0, 1), (1, 1), (1, 1)]);
        let t =
            group_conditional_rate(std::slice::from_ref(&r), observer_gives_advice, any_link, |r| Some(r.subreddit.clone()), 10);
        assert_eq!(t.rows[0].rate, 0.25);
        let same = record("t", "g", &[Pleasantness, Certainty], &[Pleasantness, Certainty], &[(0, 0), (1, 1)]);
        let t = group_conditional_rate(&[same], labels_differ, any_link, |r| Some(r.subreddit.clone()), 10);
        assert_eq!(t.rows[0].rate, 0.0);
        let none = record("t", "empty", &[Pleasantness], &[Advice], &[]);
        let t = group_conditional_rate(&[r, none], labels_differ, any_link, |r| Some(r.subreddit.clone()), 10);
        assert_eq!(t.rows.len(), 1, "zero-denominator groups are omitted");
    }

    #[test]
    fn rates_match_tally_oracle() {
        let recs = random_records(30, 8);
        let by = |r: &AlignmentRecord| Some(r.subreddit.clone());
        let t = group_conditional_rate(&recs, observer_gives_advice, any_link, by, 2);
        for row in &t.rows {
            let mut n = 0;
            let mut d = 0;
            for r in recs.iter().filter(|r| r.subreddit == row.group) {
                for l in &r.links {
                    d += 1;
                    if r.observer_spans[l.observer_idx].label == Advice {
                        n += 1;
                    }
                }
            }
            assert_eq!((row.numerator, row.denominator), (n, d));
        }
        assert_eq!(t.top.len(), 2.min(t.rows.len()));
        assert!(t.top.windows(2).all(|w| w[0].rate >= w[1].rate));
        assert!(t.bottom.windows(2).all(|w| w[0].rate <= w[1].rate));
    }

    #[test]
    fn experience_split_by_period() {
        let params = StudyParams { student_share: 0.5, ..StudyParams::default() };
        let recs = alignment_study(&StudyParams { authors: 200, ..params }, 9);
        let profiles = classify_observers(&recs, &FlairTable::builtin());
        let rows = experience_comparison(&recs, &profiles, Variance::Welch);
        assert!(!rows.is_empty());
        for row in rows {
            assert!(row.student.n > 0 && row.licensed.n > 0 && row.authors > 0);
        }
    }
}
