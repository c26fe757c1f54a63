use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use aloe_core::alignment::{build_pair_dataset, SpanPairInstance};
use aloe_core::analysis::write_tsv;
use aloe_core::appraisal::{project_corpus, SentenceInstance};
use aloe_core::data::{
    compute_stats, make_splits, read_corpus, read_jsonl, read_pairs, validate_instance, write_corpus, write_jsonl, write_pairs,
    AppraisalLabel, PairKeyed,
};
use aloe_core::ingest::{extract_pairs, filter_pairs, FilterConfig, LexiconScorer};
use aloe_core::persist::load_json;
use aloe_core::synth;
use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{SplitKind, SynthKind};

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

/// Writes to stdout; a closed pipe (`aloe ... | head`) is not an error.
pub fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn print_json<T: Serialize>(value: &T) -> Result<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"))
}

/// Non-empty lines with `#` comments removed.
pub fn read_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(|l| l.split('#').next().unwrap_or("").trim()).filter(|l| !l.is_empty()).map(str::to_string).collect())
}

pub fn read_toml<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

pub fn ingest(dump: &Path, subreddits: &Path, out: &Path) -> Result<()> {
    let allow: HashSet<String> = read_list(subreddits)?.into_iter().collect();
    let (pairs, report) = extract_pairs(dump, &allow)?;
    ensure_parent(out)?;
    write_pairs(&pairs, out)?;
    log::info!("wrote {} pairs to {}", pairs.len(), out.display());
    print_json(&report)
}

pub fn filter(pairs: &Path, config: Option<&Path>, scorer: Option<&Path>, out: &Path, report: Option<&Path>) -> Result<()> {
    let config: FilterConfig = read_toml(config)?;
    let scorer = match scorer {
        Some(p) => load_json::<LexiconScorer>(p)?,
        None => LexiconScorer::builtin(),
    };
    let input = read_pairs(pairs)?;
    let outcome = filter_pairs(&input, &scorer, &config)?;
    ensure_parent(out)?;
    write_pairs(&outcome.kept, out)?;
    if let Some(r) = report {
        let rows: Vec<Vec<String>> =
            outcome.dropped.iter().map(|(id, reason)| vec![id.clone(), reason.as_str().to_string()]).collect();
        write_tsv(r, &["pair_id", "reason"], &rows)?;
    }
    log::info!("kept {} of {} pairs", outcome.kept.len(), input.len());
    Ok(())
}

pub fn build_pairs(gold: &Path, ratio: usize, seed: u64, out: &Path) -> Result<()> {
    let corpus = read_corpus(gold)?;
    let pairs = build_pair_dataset(&corpus, ratio, seed)?;
    ensure_parent(out)?;
    write_jsonl(&pairs, out)?;
    let positives = pairs.iter().filter(|p| p.is_aligned).count();
    log::info!("{positives} positives, {} negatives", pairs.len() - positives);
    Ok(())
}

pub fn sentences(gold: &Path, out: &Path) -> Result<()> {
    let corpus = read_corpus(gold)?;
    let sentences = project_corpus(&corpus).map_err(|r| anyhow::anyhow!("invalid instance {}: {r}", r.pair_id))?;
    ensure_parent(out)?;
    write_jsonl(&sentences, out)?;
    log::info!("{} sentences", sentences.len());
    Ok(())
}

fn split_file<T: PairKeyed + Clone + Serialize + DeserializeOwned>(
    input: &Path,
    fractions: [f64; 3],
    seed: u64,
    out_dir: &Path,
    write: impl Fn(&[T], &Path) -> Result<()>,
    read: impl Fn(&Path) -> Result<Vec<T>>,
) -> Result<()> {
    let items = read(input)?;
    let splits = make_splits(&items, fractions, seed)?;
    fs::create_dir_all(out_dir)?;
    for (name, part) in [("train", &splits.train), ("dev", &splits.dev), ("test", &splits.test)] {
        write(part, &out_dir.join(format!("{name}.jsonl")))?;
        log::info!("{name}: {}", part.len());
    }
    Ok(())
}

pub fn split(input: &Path, kind: SplitKind, fractions: &[f64], seed: u64, out_dir: &Path) -> Result<()> {
    let Ok(fractions) = <[f64; 3]>::try_from(fractions) else {
        bail!("--fractions takes three values, got {}", fractions.len());
    };
    match kind {
        SplitKind::Gold => split_file(input, fractions, seed, out_dir, |c, p| Ok(write_corpus(c, p)?), |p| Ok(read_corpus(p)?)),
        SplitKind::Sentences => {
            split_file::<SentenceInstance>(input, fractions, seed, out_dir, |c, p| Ok(write_jsonl(c, p)?), |p| Ok(read_jsonl(p)?))
        }
        SplitKind::SpanPairs => {
            split_file::<SpanPairInstance>(input, fractions, seed, out_dir, |c, p| Ok(write_jsonl(c, p)?), |p| Ok(read_jsonl(p)?))
        }
    }
}

pub fn stats(gold: &Path, json: bool) -> Result<()> {
    let corpus = read_corpus(gold)?;
    let stats = compute_stats(&corpus).map_err(|r| anyhow::anyhow!("invalid instance {}: {r}", r.pair_id))?;
    if json {
        return print_json(&stats);
    }
    let mut text = String::from("label\ttarget\tobserver\ttarget_with_alignment\n");
    for label in AppraisalLabel::ANNOTATABLE {
        let c = stats.label(label);
        text += &format!("{label}\t{}\t{}\t{}\n", c.target, c.observer, c.target_with_alignment);
    }
    text += &format!("pairs\t{}\nspans\t{}\nalignments\t{}\n", stats.total_pairs, stats.total_spans, stats.total_alignments);
    emit(&text)
}

pub fn validate(gold: &Path) -> Result<()> {
    let corpus = read_corpus(gold)?;
    let mut invalid = 0;
    for inst in &corpus {
        let report = validate_instance(inst);
        for v in &report.violations {
            emit(&format!("{}\t{v}\n", report.pair_id))?;
        }
        invalid += usize::from(!report.is_valid());
    }
    if invalid > 0 {
        bail!("{invalid} of {} instances are invalid", corpus.len());
    }
    log::info!("{} instances valid", corpus.len());
    Ok(())
}

pub fn synth(kind: SynthKind, n: usize, seed: u64, out: &Path) -> Result<()> {
    ensure_parent(out)?;
    match kind {
        SynthKind::Gold => write_corpus(&synth::gold_corpus(n, seed), out)?,
        SynthKind::Pairs => write_pairs(&synth::pair_corpus(n, seed), out)?,
        SynthKind::Sentences => write_jsonl(&synth::separable_sentences(n, seed), out)?,
        SynthKind::SpanPairs => write_jsonl(&synth::paraphrase_pairs(n, 11, seed), out)?,
        SynthKind::Records => {
            let params = synth::StudyParams { authors: n, professional_share: 0.5, student_share: 0.3, ..Default::default() };
            write_jsonl(&synth::alignment_study(&params, seed), out)?
        }
    }
    Ok(())
}
