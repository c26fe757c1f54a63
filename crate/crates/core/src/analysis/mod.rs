//! Corpus-scale statistics over alignment records.

mod distribution;
pub mod flair;
mod groups;
pub mod plot;
pub mod stats;

use std::io::{self, Write};
use std::path::{Path, PathBuf};

pub use distribution::{
    appraisal_distribution, conditional_alignment_matrix, pca_project, AlignmentMatrix, GroupDistribution, PcaResult,
};
pub use flair::{
    classify_observers, map_flair, profession_counts, FlairTable, ObserverClass, Profession, ProfessionCount, ProfessionProfile,
    RecordProfile, TrainingLevel,
};
pub use groups::{
    any_link, experience_comparison, flair_level_groups, group_conditional_rate, group_mean_alignment, labels_differ,
    matched_same_appraisal_diff, observer_gives_advice, percent_alignment, profession_groups, profession_regression,
    same_label_rate, ExperienceRow, GroupMean, GroupRate, MatchedDiff, MeanUnit, RateTable,
};
pub use stats::{
    design_matrix, fit_ols, independent_t_test, mean_se, Design, Factor, MeanSe, RegressionResult, StatsError, TTest, Variance,
};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("need at least 3 groups, got {0}")]
    TooFewGroups(usize),
    #[error("bad input shape: {0}")]
    Shape(String),
    #[error("flair table line {line}: {message}")]
    FlairTable { line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Writes a tab-separated table with a header row. Tabs and newlines inside
/// cells are replaced by spaces.
pub fn write_tsv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), AnalysisError> {
    let io_err = |e| AnalysisError::Io { path: path.to_path_buf(), source: e };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut f = io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    let clean = |c: &str| c.replace(['\t', '\n', '\r'], " ");
    writeln!(f, "{}", header.join("\t")).map_err(io_err)?;
    for row in rows {
        writeln!(f, "{}", row.iter().map(|c| clean(c)).collect::<Vec<_>>().join("\t")).map_err(io_err)?;
    }
    f.flush().map_err(io_err)
}
