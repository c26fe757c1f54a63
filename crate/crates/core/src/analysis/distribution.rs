use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::analysis::stats::symmetric_eigen;
use crate::data::{AppraisalLabel, Role};
use crate::num::Real;
use crate::pipeline::AlignmentRecord;

const N: usize = AppraisalLabel::ANALYSIS.len();

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupDistribution {
    pub group_key: String,
    /// Indexed like [`AppraisalLabel::ANALYSIS`].
    pub counts: [u64; N],
    pub proportions: [f64; N],
    pub total: u64,
}

impl GroupDistribution {
    fn from_counts(group_key: String, counts: [u64; N]) -> Self {
        let total: u64 = counts.iter().sum();
        let mut proportions = [0.0; N];
        if total > 0 {
            for (p, c) in proportions.iter_mut().zip(counts) {
                *p = c as f64 / total as f64;
            }
        }
        GroupDistribution { group_key, counts, proportions, total }
    }
}

/// Label distribution of one side's spans per group. Target spans are
/// counted once per Target message even though every reply repeats them.
/// Groups without any analysis-label span are left out.
pub fn appraisal_distribution<F>(records: &[AlignmentRecord], side: Role, group_by: F) -> Vec<GroupDistribution>
where
    F: Fn(&AlignmentRecord) -> Option<String>,
{
    let mut counts: BTreeMap<String, [u64; N]> = BTreeMap::new();
    let mut seen_targets = BTreeSet::new();
    for r in records {
        let Some(key) = group_by(r) else { continue };
        let spans = match side {
            Role::Target => {
                if !seen_targets.insert(r.target_id.as_str()) {
                    continue;
                }
                &r.target_spans
            }
            Role::Observer => &r.observer_spans,
        };
        let row = counts.entry(key).or_insert([0; N]);
        for s in spans {
            if let Some(i) = s.label.analysis_index() {
                row[i] += 1;
            }
        }
    }
    counts.into_iter().filter(|(_, c)| c.iter().any(|&n| n > 0)).map(|(k, c)| GroupDistribution::from_counts(k, c)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaResult<T> {
    /// Two coordinates per input row.
    pub coords: Vec<[T; 2]>,
    /// Unit loadings of the two leading components.
    pub components: [Vec<T>; 2],
    pub explained_variance: [T; 2],
    /// All rows were identical, so no component is defined.
    pub degenerate: bool,
}

/// Projects the rows of a group x label matrix onto the two leading
/// principal components of the column-centered data.
pub fn pca_project<T: Real>(rows: &[Vec<T>]) -> Result<PcaResult<T>, AnalysisError> {
    if rows.len() < 3 {
        return Err(AnalysisError::TooFewGroups(rows.len()));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) || d < 2 {
        return Err(AnalysisError::Shape("rows must share a width of at least 2".into()));
    }
    let n = T::of_usize(rows.len());
    let means: Vec<T> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<T>() / n).collect();
    let centered: Vec<Vec<T>> = rows.iter().map(|r| r.iter().zip(&means).map(|(a, m)| *a - *m).collect()).collect();
    let mut cov = vec![vec![T::zero(); d]; d];
    for r in &centered {
        for a in 0..d {
            for b in 0..d {
                cov[a][b] += r[a] * r[b];
            }
        }
    }
    let denom = n - T::one();
    cov.iter_mut().flatten().for_each(|c| *c /= denom);
    let trace: T = (0..d).map(|i| cov[i][i]).sum();
    if trace <= T::epsilon() {
        return Ok(PcaResult {
            coords: vec![[T::zero(); 2]; rows.len()],
            components: [vec![T::zero(); d], vec![T::zero(); d]],
            explained_variance: [T::zero(); 2],
            degenerate: true,
        });
    }
    let (values, vectors) = symmetric_eigen(&cov);
    let component = |k: usize| {
        let mut v: Vec<T> = (0..d).map(|r| vectors[r][k]).collect();
        let lead = v
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).expect("finite").then(b.0.cmp(&a.0)))
            .map(|(_, x)| x)
            .unwrap_or_else(T::zero);
        if lead < T::zero() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    };
    let components = [component(0), component(1)];
    let coords = centered
        .iter()
        .map(|r| {
            let dot = |c: &Vec<T>| r.iter().zip(c).map(|(a, b)| *a * *b).sum::<T>();
            [dot(&components[0]), dot(&components[1])]
        })
        .collect();
    Ok(PcaResult {
        coords,
        components,
        explained_variance: [values[0].max(T::zero()), values[1].max(T::zero())],
        degenerate: false,
    })
}

/// p(observer label | target label) over links.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentMatrix {
    /// Target labels, [`AppraisalLabel::ANALYSIS`] without Trope.
    pub rows: Vec<AppraisalLabel>,
    /// Observer labels, [`AppraisalLabel::ANALYSIS`].
    pub cols: Vec<AppraisalLabel>,
    pub support: Vec<Vec<u64>>,
    pub probabilities: Vec<Vec<f64>>,
    pub masked: Vec<Vec<bool>>,
    pub mask_min: u64,
}

impl AlignmentMatrix {
    pub fn row_total(&self, row: usize) -> u64 {
        self.support[row].iter().sum()
    }
}

pub fn conditional_alignment_matrix(records: &[AlignmentRecord], mask_min: u64) -> AlignmentMatrix {
    let rows: Vec<AppraisalLabel> = AppraisalLabel::ANALYSIS.iter().copied().filter(|&l| l != AppraisalLabel::Trope).collect();
    let cols = AppraisalLabel::ANALYSIS.to_vec();
    let mut support = vec![vec![0u64; cols.len()]; rows.len()];
    for r in records {
        for link in &r.links {
            let t = r.target_spans[link.target_idx].label;
            let o = r.observer_spans[link.observer_idx].label;
            if let (Some(i), Some(j)) = (rows.iter().position(|&l| l == t), cols.iter().position(|&l| l == o)) {
                support[i][j] += 1;
            }
        }
    }
    let probabilities = support
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            row.iter().map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 }).collect()
        })
        .collect();
    let masked = support.iter().map(|row| row.iter().map(|&c| c < mask_min).collect()).collect();
    AlignmentMatrix { rows, cols, support, probabilities, masked, mask_min }
}
