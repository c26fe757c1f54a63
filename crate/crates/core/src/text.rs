//! Code-point text helpers, word tokenization and the rule-based sentence
//! segmenter.
//!
//! Every offset produced here counts Unicode scalar values, matching the
//! corpus format.

use serde::{Deserialize, Serialize};

/// Bumped whenever the segmentation rules change; downstream offsets depend
/// on it.
pub const SEGMENTER_VERSION: u32 = 1;

const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "vs.", "e.g.", "i.e.", "etc.", "approx.", "u.s.", "a.m.", "p.m.",
    "no.", "mt.", "fig.",
];

const CLOSERS: &[char] = &['"', '\'', '\u{201D}', '\u{2019}', ')', ']'];
const OPENERS: &[char] = &['"', '\'', '\u{201C}', '\u{2018}', '('];

/// Substring by code-point range `[start, end)`. Out-of-range bounds are
/// clamped.
pub fn slice_chars(text: &str, start: usize, end: usize) -> &str {
    let mut indices = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let begin = indices.nth(start).unwrap_or(text.len());
    let stop = if end > start { indices.nth(end - start - 1).unwrap_or(text.len()) } else { begin };
    &text[begin..stop]
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Lowercased alphanumeric word tokens.
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(|w| w.to_lowercase()).collect()
}

/// A sentence located in its source text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Splits on newlines and on runs of `.`, `!`, `?` (plus closing quotes or
/// brackets) that are followed by whitespace and then an uppercase letter or
/// an opening quote. A period ending a listed abbreviation does not split.
/// Sentences exclude surrounding whitespace.
pub fn segment_sentences(text: &str) -> Vec<Sentence> {
    let chars: Vec<char> = text.chars().collect();
    let mut bounds: Vec<(usize, usize)> = Vec::new();
    let mut start: Option<usize> = None;
    let mut i = 0;

    let close = |from: usize, to: usize, bounds: &mut Vec<(usize, usize)>| {
        let mut end = to;
        while end > from && chars[end - 1].is_whitespace() {
            end -= 1;
        }
        if end > from {
            bounds.push((from, end));
        }
    };

    while i < chars.len() {
        let c = chars[i];
        if start.is_none() {
            if !c.is_whitespace() {
                start = Some(i);
            } else {
                i += 1;
                continue;
            }
        }
        let s = start.expect("sentence open");

        if c == '\n' {
            close(s, i, &mut bounds);
            start = None;
            i += 1;
            continue;
        }

        if matches!(c, '.' | '!' | '?') {
            let mut run_end = i;
            while run_end < chars.len() && matches!(chars[run_end], '.' | '!' | '?') {
                run_end += 1;
            }
            let mut j = run_end;
            while j < chars.len() && CLOSERS.contains(&chars[j]) {
                j += 1;
            }
            let mut k = j;
            while k < chars.len() && chars[k].is_whitespace() && chars[k] != '\n' {
                k += 1;
            }
            let spaced = k > j;
            let next_starts = k < chars.len() && (chars[k].is_uppercase() || OPENERS.contains(&chars[k]));
            let single_period = c == '.' && run_end - i == 1;
            if spaced && next_starts && !(single_period && is_abbreviation(&chars, s, i)) {
                close(s, j, &mut bounds);
                start = None;
                i = k;
                continue;
            }
            i = j;
            continue;
        }
        i += 1;
    }
    if let Some(s) = start {
        close(s, chars.len(), &mut bounds);
    }

    bounds.into_iter().map(|(a, b)| Sentence { start: a, end: b, text: chars[a..b].iter().collect() }).collect()
}

/// Whether the word ending with the period at `dot` is a known abbreviation.
fn is_abbreviation(chars: &[char], sentence_start: usize, dot: usize) -> bool {
    let mut w = dot;
    while w > sentence_start && !chars[w - 1].is_whitespace() {
        w -= 1;
    }
    let mut word: String = chars[w..=dot].iter().collect::<String>().to_lowercase();
    while word.starts_with(OPENERS) {
        word.remove(0);
    }
    ABBREVIATIONS.contains(&word.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans(text: &str) -> Vec<(usize, usize)> {
        segment_sentences(text).into_iter().map(|s| (s.start, s.end)).collect()
    }

    #[test]
    fn two_short_sentences() {
        assert_eq!(spans("I cried. He left."), vec![(0, 8), (9, 17)]);
    }

    #[test]
    fn empty_and_blank() {
        assert!(segment_sentences("").is_empty());
        assert!(segment_sentences("  \n\t ").is_empty());
    }

    #[test]
    fn abbreviations_do_not_split() {
        let s = segment_sentences("I saw Dr. Smith today. He said e.g. Rest more. Ok.");
        let texts: Vec<_> = s.iter().map(|x| x.text.as_str()).collect();
        assert_eq!(texts, vec!["I saw Dr. Smith today.", "He said e.g. Rest more.", "Ok."]);
    }

    #[test]
    fn lowercase_after_period_does_not_split() {
        assert_eq!(segment_sentences("It was 3 a.m. and cold. Then what").len(), 2);
        assert_eq!(segment_sentences("version 2.5 is out. yes").len(), 1);
    }

    #[test]
    fn newlines_split_and_punctuation_runs_stay_attached() {
        let s = segment_sentences("Why me?! \"Nobody knows.\" Sigh\n\nnew para");
        let texts: Vec<_> = s.iter().map(|x| x.text.as_str()).collect();
        assert_eq!(texts, vec!["Why me?!", "\"Nobody knows.\"", "Sigh", "new para"]);
    }

    #[test]
    fn offsets_are_code_points() {
        let text = "Sad 💔 day. Next one.";
        let s = segment_sentences(text);
        assert_eq!(s[0].text, "Sad 💔 day.");
        assert_eq!((s[1].start, s[1].end), (11, 20));
        assert_eq!(slice_chars(text, s[1].start, s[1].end), "Next one.");
    }

    #[test]
    fn slice_chars_clamps() {
        assert_eq!(slice_chars("héllo", 1, 3), "él");
        assert_eq!(slice_chars("abc", 2, 10), "c");
        assert_eq!(slice_chars("abc", 5, 10), "");
    }

    #[test]
    fn word_tokens_lowercase_alnum() {
        assert_eq!(word_tokens("The cat's 2 hats!"), vec!["the", "cat", "s", "2", "hats"]);
    }

    // Hand-segmented 30-sentence post; expected texts were written out by hand.
    #[test]
    fn thirty_sentence_fixture_matches_hand_segmentation() {
        let expected = [
            "My mom passed away last week.",
            "I still can't believe it.",
            "She was only 58!",
            "The doctors said it was sudden.",
            "Why didn't anyone notice?",
            "I keep replaying our last call.",
            "She told me to eat more vegetables, i.e. the usual advice.",
            "I laughed at her.",
            "Now I would give anything to hear that again.",
            "My brother is handling the funeral.",
            "He says I should rest.",
            "But I can't sleep.",
            "Every night I wake up at 3 a.m. and cry.",
            "Is this normal?",
            "\"It gets easier,\" people say.",
            "I don't believe them.",
            "Work has been understanding so far.",
            "My boss, Mr. Patel, gave me two weeks off.",
            "Still, the house feels empty.",
            "Her cat keeps looking for her.",
            "I don't know what to do with her things",
            "Should I keep them?",
            "Should I donate them?",
            "Everything feels so heavy.",
            "I'm scared I'll forget her voice.",
            "I saved her voicemails...",
            "Listening to them hurts.",
            "Not listening hurts more.",
            "Thank you for reading this.",
            "I just needed to say it somewhere.",
        ];
        let text = "My mom passed away last week. I still can't believe it. She was only 58! The doctors said it was sudden. Why didn't anyone notice? I keep replaying our last call.  She told me to eat more vegetables, i.e. the usual advice. I laughed at her. Now I would give anything to hear that again.\n\nMy brother is handling the funeral. He says I should rest. But I can't sleep. Every night I wake up at 3 a.m. and cry. Is this normal? \"It gets easier,\" people say. I don't believe them.\nWork has been understanding so far. My boss, Mr. Patel, gave me two weeks off. Still, the house feels empty. Her cat keeps looking for her.\nI don't know what to do with her things\nShould I keep them? Should I donate them? Everything feels so heavy. I'm scared I'll forget her voice. I saved her voicemails... Listening to them hurts. Not listening hurts more.\n\nThank you for reading this. I just needed to say it somewhere.";
        let got = segment_sentences(text);
        let texts: Vec<_> = got.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, expected);
        for s in &got {
            assert_eq!(slice_chars(text, s.start, s.end), s.text);
        }
        assert!(got.windows(2).all(|w| w[0].end < w[1].start));
    }
}
