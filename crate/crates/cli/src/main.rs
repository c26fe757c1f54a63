use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

mod analyze;
mod data;
mod model;

#[derive(Parser)]
#[command(name = "aloe", version, about = "Appraisal span labeling, span alignment and alignment analyses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract Target/Observer pairs from a newline-delimited JSON dump.
    Ingest {
        #[arg(long)]
        dump: PathBuf,
        /// One subreddit per line; `#` starts a comment.
        #[arg(long)]
        subreddits: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep pairs that pass the empathy pre-filter.
    Filter {
        #[arg(long)]
        pairs: PathBuf,
        /// TOML filter thresholds; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scorer saved by `aloe train scorer`; the built-in one otherwise.
        #[arg(long)]
        scorer: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// TSV of dropped pair ids and the first failed check.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    #[command(subcommand)]
    Train(TrainCommand),
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Build the (Target span, Observer span) dataset from a gold corpus.
    BuildPairs {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value_t = 11)]
        ratio: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Project gold spans onto sentences for the appraisal classifier.
    Sentences {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a pair-keyed JSONL file into train/dev/test by pair.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitKind::Gold)]
        kind: SplitKind,
        #[arg(long, value_delimiter = ',', default_values_t = [0.7, 0.1, 0.2])]
        fractions: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Span and alignment counts per label.
    Stats {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Check every instance of a gold corpus; fails if any is invalid.
    Validate {
        #[arg(long)]
        gold: PathBuf,
    },
    /// Label pairs and score span alignments at corpus scale.
    Run {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        appraisal_model: PathBuf,
        #[arg(long)]
        alignment_model: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = 256)]
        checkpoint_every: usize,
        /// Stop after this many input pairs; rerun to resume.
        #[arg(long)]
        max_documents: Option<usize>,
    },
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Generate synthetic data sets.
    Synth {
        #[arg(value_enum)]
        kind: SynthKind,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the annotation service.
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Label palette TOML; the built-in palette otherwise.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Directory with the built annotation client.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
        #[arg(long, default_value = "admin")]
        admin_id: String,
        /// Token for the admin account when the store is new.
        #[arg(long, env = "ALOE_ADMIN_TOKEN")]
        admin_token: Option<String>,
    },
}

#[derive(Subcommand)]
enum TrainCommand {
    /// Train the sentence appraisal classifier.
    Appraisal(TrainArgs),
    /// Train the twin-encoder alignment model.
    Alignment(TrainArgs),
    /// Fit the bag-of-words empathy scorer on labeled examples.
    Scorer {
        #[arg(long)]
        examples: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// TOML model config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: PathBuf,
    /// Held-out set for early stopping; a tenth of `--train` otherwise.
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Score sentence predictions against gold labels.
    Appraisal {
        #[arg(long, required_unless_present = "baseline")]
        model: Option<PathBuf>,
        #[arg(long, value_enum)]
        baseline: Option<AppraisalBaseline>,
        /// Training sentences, for the majority baseline.
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score span-pair predictions against gold alignment.
    Alignment {
        #[arg(long, required_unless_present = "baseline")]
        model: Option<PathBuf>,
        #[arg(long, value_enum)]
        baseline: Option<AlignmentBaseline>,
        /// Span pairs used to fit the baseline threshold.
        #[arg(long)]
        dev: Option<PathBuf>,
        /// Encoder for the similarity baseline.
        #[arg(long, default_value = "hash-embed-base")]
        encoder: String,
        /// Overrides the model's decision threshold.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AppraisalBaseline {
    Random,
    Majority,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlignmentBaseline {
    Random,
    Jaccard,
    Similarity,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitKind {
    Gold,
    Sentences,
    SpanPairs,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// Annotated corpus.
    Gold,
    /// Unannotated pairs.
    Pairs,
    /// Keyword-separable sentences, `n` per class.
    Sentences,
    /// Paraphrase span pairs, `n` positives at 1:11.
    SpanPairs,
    /// Alignment records from `n` authors.
    Records,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// TSV with columns pattern, profession, level; the built-in table otherwise.
    #[arg(long)]
    flair_table: Option<PathBuf>,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Appraisal label distribution per subreddit.
    Distribution {
        #[command(flatten)]
        common: AnalyzeArgs,
        #[arg(long, value_enum, default_value_t = Side::Target)]
        side: Side,
    },
    /// Two-dimensional projection of the per-subreddit distributions.
    Pca {
        #[command(flatten)]
        common: AnalyzeArgs,
        #[arg(long, value_enum, default_value_t = Side::Target)]
        side: Side,
    },
    /// Observer label given Target label over aligned spans.
    Matrix {
        #[command(flatten)]
        common: AnalyzeArgs,
        #[arg(long, default_value_t = 10)]
        mask_min: u64,
    },
    /// Profession counts and mean alignment per profession.
    Professions {
        #[command(flatten)]
        common: AnalyzeArgs,
        #[arg(long, value_enum, default_value_t = Unit::Comment)]
        unit: Unit,
    },
    /// Percent alignment of professionals on profession, subreddit and flair visibility.
    Regression {
        #[command(flatten)]
        common: AnalyzeArgs,
    },
    /// Same-label alignment of professionals minus laypeople, per label.
    MatchedDiff {
        #[command(flatten)]
        common: AnalyzeArgs,
    },
    /// Student vs licensed periods, and optional flair-level curves.
    Experience {
        #[command(flatten)]
        common: AnalyzeArgs,
        #[arg(long, value_enum, default_value_t = TestKind::Welch)]
        test: TestKind,
        /// Ordered flair levels, one per line, least to most experienced.
        #[arg(long, requires = "levels_subreddit")]
        levels: Option<PathBuf>,
        #[arg(long)]
        levels_subreddit: Option<String>,
        #[arg(long, value_enum, default_value_t = Unit::Comment)]
        unit: Unit,
    },
    /// Advice and label-mismatch rates over links per subreddit.
    Rates {
        #[command(flatten)]
        common: AnalyzeArgs,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    Target,
    Observer,
}

#[derive(Clone, Copy, ValueEnum)]
enum Unit {
    Comment,
    Author,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestKind {
    Welch,
    Pooled,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Ingest { dump, subreddits, out } => data::ingest(&dump, &subreddits, &out),
        Command::Filter { pairs, config, scorer, out, report } => {
            data::filter(&pairs, config.as_deref(), scorer.as_deref(), &out, report.as_deref())
        }
        Command::BuildPairs { gold, ratio, seed, out } => data::build_pairs(&gold, ratio, seed, &out),
        Command::Sentences { gold, out } => data::sentences(&gold, &out),
        Command::Split { input, kind, fractions, seed, out_dir } => data::split(&input, kind, &fractions, seed, &out_dir),
        Command::Stats { gold, json } => data::stats(&gold, json),
        Command::Validate { gold } => data::validate(&gold),
        Command::Synth { kind, n, seed, out } => data::synth(kind, n, seed, &out),
        Command::Train(TrainCommand::Appraisal(a)) => model::train_appraisal(&a),
        Command::Train(TrainCommand::Alignment(a)) => model::train_alignment(&a),
        Command::Train(TrainCommand::Scorer { examples, out }) => model::train_scorer(&examples, &out),
        Command::Eval(EvalCommand::Appraisal { model, baseline, train, seed, test, report }) => {
            model::eval_appraisal(model.as_deref(), baseline, train.as_deref(), seed, &test, report.as_deref())
        }
        Command::Eval(EvalCommand::Alignment { model, baseline, dev, encoder, threshold, seed, test, report }) => {
            let opts = model::AlignmentEval { model, baseline, dev, encoder, threshold, seed };
            model::eval_alignment(&opts, &test, report.as_deref())
        }
        Command::Run { pairs, appraisal_model, alignment_model, threshold, out, workers, checkpoint_every, max_documents } => {
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let config = aloe_core::pipeline::RunConfig { threshold, workers, checkpoint_every, max_documents };
            model::run(&pairs, &appraisal_model, &alignment_model, &out, &config)
        }
        Command::Analyze(cmd) => analyze::dispatch(cmd),
        Command::Serve { store, port, host, labels, ui_dir, admin_id, admin_token } => {
            let config = aloe_annotation::ServerConfig {
                store,
                addr: SocketAddr::new(host, port),
                palette: labels,
                ui_dir,
                admin_id,
                admin_token,
            };
            serve(config)
        }
    }
}

fn serve(config: aloe_annotation::ServerConfig) -> Result<()> {
    let runtime = tokio::runtime::Runtime::new().context("starting the async runtime")?;
    runtime.block_on(aloe_annotation::serve(config, |addr, issued| {
        use std::io::Write;
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "listening on http://{addr}");
        if let Some(t) = issued {
            let _ = writeln!(out, "admin token for {}: {}", t.annotator_id, t.token);
        }
        let _ = out.flush();
    }))?;
    Ok(())
}
