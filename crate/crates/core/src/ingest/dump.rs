use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::data::{pair_id_for, PairKind, TargetObserverPair};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read dump {path}: {source}")]
    Dump {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("subreddit allowlist is empty")]
    EmptyAllowlist,
}

/// Counters for records that did not produce pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ExtractReport {
    pub records: usize,
    pub malformed: usize,
    pub deleted: usize,
    pub moderator: usize,
    pub outside_allowlist: usize,
    pub orphaned: usize,
    pub out_of_order: usize,
    pub duplicates: usize,
}

#[derive(Clone, Debug)]
struct Record {
    id: String,
    parent: Option<String>,
    subreddit: String,
    author: String,
    flair: Option<String>,
    text: String,
    created_utc: i64,
    is_post: bool,
}

enum Parsed {
    Keep(Record),
    Malformed,
    Deleted,
    Moderator,
}

fn strip_kind(id: &str) -> &str {
    match id.split_once('_') {
        Some((kind, rest)) if kind.len() == 2 && kind.starts_with('t') => rest,
        _ => id,
    }
}

fn timestamp(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().map(|f| f as i64)),
        Value::String(s) => s.parse::<f64>().ok().map(|f| f as i64),
        _ => None,
    }
}

fn is_removed(text: &str) -> bool {
    matches!(text.trim(), "[deleted]" | "[removed]")
}

fn parse_record(line: &str) -> Parsed {
    let Ok(v) = serde_json::from_str::<Value>(line) else {
        return Parsed::Malformed;
    };
    let str_field = |k: &str| v.get(k).and_then(Value::as_str).map(str::to_string);
    let (Some(id), Some(subreddit), Some(author), Some(created)) =
        (str_field("id"), str_field("subreddit"), str_field("author"), v.get("created_utc").and_then(timestamp))
    else {
        return Parsed::Malformed;
    };
    if v.get("distinguished").and_then(Value::as_str) == Some("moderator") {
        return Parsed::Moderator;
    }
    let flair = str_field("author_flair_text").filter(|f| !f.trim().is_empty());
    let parent = str_field("parent_id");

    let (text, is_post) = if let Some(body) = str_field("body") {
        if parent.is_none() {
            return Parsed::Malformed;
        }
        if is_removed(&body) {
            return Parsed::Deleted;
        }
        (body, false)
    } else if let Some(title) = str_field("title") {
        let selftext = str_field("selftext").unwrap_or_default();
        if is_removed(&selftext) || is_removed(&title) {
            return Parsed::Deleted;
        }
        let text = if selftext.trim().is_empty() { title } else { format!("{title}\n{selftext}") };
        (text, true)
    } else {
        return Parsed::Malformed;
    };
    if text.trim().is_empty() {
        return Parsed::Deleted;
    }

    Parsed::Keep(Record {
        id: strip_kind(&id).to_string(),
        parent: parent.map(|p| strip_kind(&p).to_string()),
        subreddit,
        author,
        flair,
        text,
        created_utc: created,
        is_post,
    })
}

/// Builds (post, top-level comment) and (comment, reply) pairs from a
/// newline-delimited forum dump. Output is sorted by `pair_id`.
pub fn extract_pairs(
    dump_path: &Path,
    subreddit_allowlist: &HashSet<String>,
) -> Result<(Vec<TargetObserverPair>, ExtractReport), IngestError> {
    if subreddit_allowlist.is_empty() {
        return Err(IngestError::EmptyAllowlist);
    }
    let allow: HashSet<String> = subreddit_allowlist.iter().map(|s| s.to_lowercase()).collect();
    let file = File::open(dump_path).map_err(|source| IngestError::Dump { path: dump_path.to_path_buf(), source })?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|source| IngestError::Dump { path: dump_path.to_path_buf(), source })?;
    Ok(extract_from_lines(&lines, &allow))
}

pub(crate) fn extract_from_lines(lines: &[String], allow: &HashSet<String>) -> (Vec<TargetObserverPair>, ExtractReport) {
    let parsed: Vec<Parsed> = lines.par_iter().filter(|l| !l.trim().is_empty()).map(|l| parse_record(l)).collect();

    let mut report = ExtractReport { records: parsed.len(), ..Default::default() };
    let mut posts: HashMap<String, Record> = HashMap::new();
    let mut comments: Vec<Record> = Vec::new();
    for p in parsed {
        match p {
            Parsed::Malformed => report.malformed += 1,
            Parsed::Deleted => report.deleted += 1,
            Parsed::Moderator => report.moderator += 1,
            Parsed::Keep(r) if !allow.contains(&r.subreddit.to_lowercase()) => report.outside_allowlist += 1,
            Parsed::Keep(r) if r.is_post => {
                posts.insert(r.id.clone(), r);
            }
            Parsed::Keep(r) => comments.push(r),
        }
    }
    let comment_index: HashMap<String, Record> = comments.iter().map(|c| (c.id.clone(), c.clone())).collect();

    // Keyed by (subreddit, parent, child) so duplicated dump lines collapse.
    let mut pairs: BTreeMap<(String, String, String), TargetObserverPair> = BTreeMap::new();
    for child in &comments {
        let parent_id = child.parent.as_deref().unwrap_or_default();
        let (parent, kind) = if let Some(p) = posts.get(parent_id) {
            (p, PairKind::PostComment)
        } else if let Some(c) = comment_index.get(parent_id) {
            (c, PairKind::CommentComment)
        } else {
            report.orphaned += 1;
            continue;
        };
        if child.created_utc < parent.created_utc {
            report.out_of_order += 1;
            continue;
        }
        let key = (child.subreddit.clone(), parent.id.clone(), child.id.clone());
        if pairs.contains_key(&key) {
            report.duplicates += 1;
            continue;
        }
        pairs.insert(
            key,
            TargetObserverPair {
                pair_id: pair_id_for(&parent.id, &child.id),
                target_text: parent.text.clone(),
                observer_text: child.text.clone(),
                subreddit: child.subreddit.clone(),
                target_author: parent.author.clone(),
                observer_author: child.author.clone(),
                observer_flair: child.flair.clone(),
                created_utc_target: parent.created_utc,
                created_utc_observer: child.created_utc,
                pair_kind: kind,
            },
        );
    }
    if report.malformed > 0 {
        log::warn!("skipped {} malformed dump records", report.malformed);
    }
    let mut out: Vec<TargetObserverPair> = pairs.into_values().collect();
    out.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    (out, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn allow(names: &[&str]) -> HashSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn post(id: &str, sub: &str, t: i64) -> String {
        format!(
            r#"{{"id":"{id}","subreddit":"{sub}","author":"op","title":"Title {id}","selftext":"I am struggling.","created_utc":{t}}}"#
        )
    }

    fn comment(id: &str, parent: &str, sub: &str, body: &str, t: i64) -> String {
        format!(
            r#"{{"id":"{id}","parent_id":"{parent}","subreddit":"{sub}","author":"u_{id}","author_flair_text":null,"body":"{body}","created_utc":{t}}}"#
        )
    }

    fn run(lines: Vec<String>, subs: &[&str]) -> (Vec<TargetObserverPair>, ExtractReport) {
        extract_from_lines(&lines, &allow(subs).iter().map(|s| s.to_lowercase()).collect())
    }

    #[test]
    fn one_post_two_comments_gives_two_pairs() {
        let (pairs, _) = run(
            vec![
                post("p1", "GriefSupport", 10),
                comment("c1", "t3_p1", "GriefSupport", "So sorry.", 20),
                comment("c2", "t3_p1", "GriefSupport", "Hugs.", 30),
            ],
            &["GriefSupport"],
        );
        assert_eq!(pairs.len(), 2);
        assert!(pairs.iter().all(|p| p.pair_kind == PairKind::PostComment));
        assert_eq!(pairs[0].pair_id, "p1-c1");
        assert_eq!(pairs[0].target_text, "Title p1\nI am struggling.");
    }

    #[test]
    fn removed_bodies_are_excluded() {
        let (pairs, report) = run(
            vec![post("p1", "sad", 10), comment("c1", "t3_p1", "sad", "[removed]", 20), comment("c2", "t3_p1", "sad", "ok", 30)],
            &["sad"],
        );
        assert_eq!(pairs.len(), 1);
        assert_eq!(report.deleted, 1);
    }

    #[test]
    fn moderator_posts_and_malformed_records_are_skipped() {
        let modpost = r#"{"id":"p2","subreddit":"sad","author":"mod","title":"Rules","selftext":"","created_utc":5,"distinguished":"moderator"}"#;
        let (pairs, report) = run(
            vec![modpost.to_string(), comment("c1", "t3_p2", "sad", "hi", 20), "{not json".into(), r#"{"id":"x"}"#.into()],
            &["sad"],
        );
        assert!(pairs.is_empty());
        assert_eq!(report.moderator, 1);
        assert_eq!(report.malformed, 2);
        assert_eq!(report.orphaned, 1);
    }

    #[test]
    fn comment_replies_form_comment_comment_pairs_and_duplicates_collapse() {
        let c1 = comment("c1", "t3_p1", "sad", "It hurts.", 20);
        let (pairs, report) =
            run(vec![post("p1", "sad", 10), c1.clone(), c1, comment("r1", "t1_c1", "sad", "I hear you.", 40)], &["sad"]);
        assert_eq!(pairs.len(), 2);
        assert_eq!(report.duplicates, 1);
        let cc = pairs.iter().find(|p| p.pair_kind == PairKind::CommentComment).unwrap();
        assert_eq!(cc.pair_id, "c1-r1");
        assert_eq!(cc.target_text, "It hurts.");
    }

    #[test]
    fn allowlist_is_case_insensitive_and_filters() {
        let (pairs, report) = run(
            vec![
                post("p1", "Anxiety", 10),
                comment("c1", "t3_p1", "Anxiety", "x", 20),
                post("p2", "cats", 10),
                comment("c2", "t3_p2", "cats", "y", 20),
            ],
            &["anxiety"],
        );
        assert_eq!(pairs.len(), 1);
        assert_eq!(report.outside_allowlist, 2);
    }

    // Brute-force oracle: count retained comments whose parent is a retained record.
    #[test]
    fn pair_count_matches_brute_force_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let subs = ["sad", "GriefSupport", "cats"];
        let mut lines = Vec::new();
        let mut retained_posts = HashSet::new();
        let mut retained_comments: Vec<(String, String, bool)> = Vec::new();
        for i in 0..200 {
            let sub = subs[rng.random_range(0..3)];
            lines.push(post(&format!("p{i}"), sub, 100));
            if sub != "cats" {
                retained_posts.insert(format!("p{i}"));
            }
        }
        for i in 0..800 {
            let sub = subs[rng.random_range(0..3)];
            let removed = rng.random_bool(0.1);
            let body = if removed { "[deleted]" } else { "words" };
            let parent = if i > 10 && rng.random_bool(0.3) {
                format!("t1_c{}", rng.random_range(0..i))
            } else {
                format!("t3_p{}", rng.random_range(0..200))
            };
            lines.push(comment(&format!("c{i}"), &parent, sub, body, 200 + i as i64));
            if sub != "cats" && !removed {
                retained_comments.push((format!("c{i}"), parent, true));
            }
        }
        let kept_ids: HashSet<String> = retained_comments.iter().map(|c| c.0.clone()).collect();
        let expected = retained_comments
            .iter()
            .filter(|(_, parent, _)| {
                let bare = strip_kind(parent);
                retained_posts.contains(bare) || kept_ids.contains(bare)
            })
            .count();
        let (pairs, _) = run(lines, &["sad", "GriefSupport"]);
        assert_eq!(pairs.len(), expected);
        assert!(pairs.windows(2).all(|w| w[0].pair_id < w[1].pair_id));
    }
}
