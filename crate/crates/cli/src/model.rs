use std::path::{Path, PathBuf};

use aloe_core::alignment::{
    evaluate_alignment, fit_threshold, jaccard_baseline, random_alignment_baseline, similarity_baseline, AlignmentModelConfig,
    SpanPairInstance,
};
use aloe_core::appraisal::{
    baseline_predict, evaluate_appraisal, train_appraisal as fit_appraisal, AppraisalModelConfig, Baseline, SentenceInstance,
};
use aloe_core::data::{make_splits, read_jsonl, PairKeyed};
use aloe_core::ingest::LexiconScorer;
use aloe_core::nn::{EncoderSpec, HashedEncoder};
use aloe_core::persist::save_json;
use aloe_core::pipeline::{run_corpus, RunConfig};
use aloe_core::{AlignmentClassifier, AlignmentReport, AppraisalClassifier, AppraisalReport};
use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use serde::Serialize;

use crate::data::{ensure_parent, print_json, read_toml};
use crate::{AlignmentBaseline, AppraisalBaseline, TrainArgs};

const LOG_FILE: &str = "training_log.json";

/// Train and dev sets; without an explicit dev file a tenth of the training
/// pairs is held out.
fn train_dev<T: PairKeyed + Clone + serde::de::DeserializeOwned>(args: &TrainArgs, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    let train: Vec<T> = read_jsonl(&args.train)?;
    match &args.dev {
        Some(dev) => Ok((train, read_jsonl(dev)?)),
        None => {
            let s = make_splits(&train, [0.9, 0.1, 0.0], seed)?;
            log::info!("holding out {} of {} items for early stopping", s.dev.len(), train.len());
            Ok((s.train, s.dev))
        }
    }
}

pub fn train_appraisal(args: &TrainArgs) -> Result<()> {
    let config: AppraisalModelConfig = read_toml(args.config.as_deref())?;
    let (train, dev) = train_dev::<SentenceInstance>(args, config.seed)?;
    let (model, log) = fit_appraisal::<f32>(&train, &dev, &config)?;
    model.save(&args.out)?;
    save_json(&log, &args.out.join(LOG_FILE))?;
    let best = &log.epochs[log.best_epoch - 1];
    log::info!(
        "best epoch {} of {}: dev loss {:.4}, dev macro-F1 {:.4}",
        log.best_epoch,
        log.epochs.len(),
        best.dev_loss,
        best.dev_f1
    );
    Ok(())
}

pub fn train_alignment(args: &TrainArgs) -> Result<()> {
    let config: AlignmentModelConfig = read_toml(args.config.as_deref())?;
    let (train, dev) = train_dev::<SpanPairInstance>(args, config.seed)?;
    let (model, log) = aloe_core::alignment::train_alignment::<f32>(&train, &dev, &config)?;
    model.save(&args.out)?;
    save_json(&log, &args.out.join(LOG_FILE))?;
    let best = &log.epochs[log.best_epoch - 1];
    log::info!("best epoch {} of {}: dev loss {:.4}, dev F1 {:.4}", log.best_epoch, log.epochs.len(), best.dev_loss, best.dev_f1);
    Ok(())
}

pub fn train_scorer(examples: &Path, out: &Path) -> Result<()> {
    let scorer = LexiconScorer::train_from_file(examples)?;
    save_json(&scorer, out)?;
    Ok(())
}

fn write_report<T: Serialize>(report: &T, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            ensure_parent(p)?;
            std::fs::write(p, serde_json::to_string_pretty(report)? + "\n")
                .with_context(|| format!("writing {}", p.display()))?;
            Ok(())
        }
        None => print_json(report),
    }
}

pub fn eval_appraisal(
    model: Option<&Path>,
    baseline: Option<AppraisalBaseline>,
    train: Option<&Path>,
    seed: u64,
    test: &Path,
    report: Option<&Path>,
) -> Result<()> {
    let test: Vec<SentenceInstance> = read_jsonl(test)?;
    let labels = match (baseline, model) {
        (Some(AppraisalBaseline::Random), _) => baseline_predict(test.len(), Baseline::Random { seed }),
        (Some(AppraisalBaseline::Majority), _) => {
            let Some(train) = train else { bail!("the majority baseline needs --train") };
            let train: Vec<SentenceInstance> = read_jsonl(train)?;
            let Some(b) = Baseline::majority_of(&train) else { bail!("training set is empty") };
            baseline_predict(test.len(), b)
        }
        (None, Some(dir)) => {
            let model = AppraisalClassifier::load(dir)?;
            test.iter().map(|s| model.predict_sentence(&s.text).0).collect()
        }
        (None, None) => bail!("give --model or --baseline"),
    };
    let predictions: Vec<_> = test.iter().zip(labels).map(|(s, l)| (s.id(), l)).collect();
    let result: AppraisalReport = evaluate_appraisal(&predictions, &test)?;
    log::info!(
        "macro P {:.4} R {:.4} F1 {:.4} over {} sentences",
        result.macro_precision,
        result.macro_recall,
        result.macro_f1,
        test.len()
    );
    write_report(&result, report)
}

pub struct AlignmentEval {
    pub model: Option<PathBuf>,
    pub baseline: Option<AlignmentBaseline>,
    pub dev: Option<PathBuf>,
    pub encoder: String,
    pub threshold: Option<f64>,
    pub seed: u64,
}

#[derive(Serialize)]
struct AlignmentEvalReport {
    predictor: String,
    threshold: Option<f64>,
    #[serde(flatten)]
    metrics: AlignmentReport,
}

/// Threshold from `--threshold`, else fitted on `--dev`.
fn baseline_threshold(opts: &AlignmentEval, score: &dyn Fn(&SpanPairInstance) -> f64) -> Result<f64> {
    if let Some(t) = opts.threshold {
        return Ok(t);
    }
    let Some(dev) = &opts.dev else { bail!("this baseline needs --dev or --threshold") };
    let dev: Vec<SpanPairInstance> = read_jsonl(dev)?;
    let scores: Vec<f64> = dev.iter().map(score).collect();
    let labels: Vec<bool> = dev.iter().map(|p| p.is_aligned).collect();
    fit_threshold(&scores, &labels).context("dev set is empty")
}

pub fn eval_alignment(opts: &AlignmentEval, test: &Path, report: Option<&Path>) -> Result<()> {
    let test: Vec<SpanPairInstance> = read_jsonl(test)?;
    let gold: Vec<bool> = test.iter().map(|p| p.is_aligned).collect();
    let thresholded =
        |score: &dyn Fn(&SpanPairInstance) -> f64, t: f64| -> Vec<bool> { test.iter().map(|p| score(p) >= t).collect() };

    let (predictor, threshold, predictions) = match (opts.baseline, &opts.model) {
        (Some(AlignmentBaseline::Random), _) => ("random".to_string(), None, random_alignment_baseline(&gold, opts.seed)),
        (Some(AlignmentBaseline::Jaccard), _) => {
            let score = |p: &SpanPairInstance| jaccard_baseline(&p.target_span.text, &p.observer_span.text);
            let t = baseline_threshold(opts, &score)?;
            ("jaccard".to_string(), Some(t), thresholded(&score, t))
        }
        (Some(AlignmentBaseline::Similarity), _) => {
            let spec = EncoderSpec::resolve(&opts.encoder)?;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
            let encoder = HashedEncoder::<f64>::new(spec, &mut rng);
            let score = |p: &SpanPairInstance| similarity_baseline(&p.target_span.text, &p.observer_span.text, &encoder);
            let t = baseline_threshold(opts, &score)?;
            (format!("similarity:{}", opts.encoder), Some(t), thresholded(&score, t))
        }
        (None, Some(dir)) => {
            let model = AlignmentClassifier::load(dir)?;
            let t = opts.threshold.unwrap_or(model.config.decision_threshold);
            let score = |p: &SpanPairInstance| model.score(&p.target_span.text, &p.observer_span.text) as f64;
            (dir.display().to_string(), Some(t), thresholded(&score, t))
        }
        (None, None) => bail!("give --model or --baseline"),
    };
    let metrics: AlignmentReport = evaluate_alignment(&predictions, &gold)?;
    log::info!("P {:.4} R {:.4} F1 {:.4} over {} span pairs", metrics.precision, metrics.recall, metrics.f1, test.len());
    write_report(&AlignmentEvalReport { predictor, threshold, metrics }, report)
}

pub fn run(pairs: &Path, appraisal: &Path, alignment: &Path, out: &Path, config: &RunConfig) -> Result<()> {
    let labeler = AppraisalClassifier::load(appraisal)?;
    let scorer = AlignmentClassifier::load(alignment)?;
    ensure_parent(out)?;
    let summary = run_corpus(pairs, out, &labeler, &scorer, config)?;
    if summary.failures > 0 {
        log::warn!("{} pairs could not be parsed and were skipped", summary.failures);
    }
    print_json(&summary)
}
