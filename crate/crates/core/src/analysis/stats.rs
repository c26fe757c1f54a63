#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::num::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("need at least {needed} observations, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("both samples have zero variance")]
    ZeroVariance,
    #[error("rank-deficient design: column `{column}` is collinear with {with:?}")]
    RankDeficient { column: String, with: Vec<String> },
    #[error("factor `{factor}` has {got} values for {expected} observations")]
    FactorLength { factor: String, expected: usize, got: usize },
}

/// Mean and standard error (sample standard deviation over sqrt(n)).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

pub fn mean_se(values: &[f64]) -> Option<MeanSe> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Some(MeanSe { mean, se, n })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variance {
    /// Unequal variances, Welch-Satterthwaite degrees of freedom.
    Welch,
    Pooled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

fn moments(x: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0);
    (n, m, v)
}

pub fn two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

pub fn independent_t_test(a: &[f64], b: &[f64], variance: Variance) -> Result<TTest, StatsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::TooFew { needed: 2, got: s.len() });
        }
    }
    let (na, ma, va) = moments(a);
    let (nb, mb, vb) = moments(b);
    if va == 0.0 && vb == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let (se2, df) = match variance {
        Variance::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let df = (qa + qb).powi(2) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
            (qa + qb, df)
        }
        Variance::Pooled => {
            let df = na + nb - 2.0;
            let sp = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
            (sp * (1.0 / na + 1.0 / nb), df)
        }
    };
    let t = (ma - mb) / se2.sqrt();
    Ok(TTest { t, df, p: two_sided_p(t, df) })
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order with unit eigenvectors as
/// columns of the returned row-major matrix.
pub fn symmetric_eigen<T: Real>(matrix: &[Vec<T>]) -> (Vec<T>, Vec<Vec<T>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<T>> = matrix.to_vec();
    let mut v: Vec<Vec<T>> = (0..n).map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect()).collect();
    let two = T::of(2.0);
    for _sweep in 0..100 {
        let off: T =
            (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let scale: T = (0..n).map(|i| a[i][i] * a[i][i]).sum::<T>() + off;
        if off <= T::epsilon() * T::epsilon() * scale || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (two * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).expect("finite eigenvalues"));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = (0..n).map(|r| order.iter().map(|&c| v[r][c]).collect()).collect();
    (values, vectors)
}

/// A regressor: categorical factors are dummy coded against their reference
/// level (the case-insensitive alphabetically first level); binary factors
/// get a single `<name>True` column.
#[derive(Clone, Debug)]
pub enum Factor {
    Categorical { name: String, values: Vec<Option<String>> },
    Binary { name: String, values: Vec<Option<bool>> },
}

impl Factor {
    fn name(&self) -> &str {
        match self {
            Factor::Categorical { name, .. } | Factor::Binary { name, .. } => name,
        }
    }

    fn len(&self) -> usize {
        match self {
            Factor::Categorical { values, .. } => values.len(),
            Factor::Binary { values, .. } => values.len(),
        }
    }

    fn present(&self, i: usize) -> bool {
        match self {
            Factor::Categorical { values, .. } => values[i].is_some(),
            Factor::Binary { values, .. } => values[i].is_some(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub term: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t: f64,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    /// Intercept first, then factor levels in factor order.
    pub coefficients: Vec<Coefficient>,
    pub reference_levels: BTreeMap<String, String>,
    pub r_squared: f64,
    pub residual_std_error: f64,
    pub df_residual: usize,
    /// Rows used after dropping those with any missing value.
    pub n: usize,
}

impl RegressionResult {
    pub fn coefficient(&self, term: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.term == term)
    }
}

fn sort_levels(levels: &mut [String]) {
    levels.sort_by(|a, b| a.to_lowercase().cmp(&b.to_lowercase()).then_with(|| a.cmp(b)));
}

/// Treatment-coded regressors for the complete rows.
#[derive(Clone, Debug)]
pub struct Design {
    /// Row-major, intercept column first.
    pub x: Vec<Vec<f64>>,
    pub names: Vec<String>,
    pub reference_levels: BTreeMap<String, String>,
    /// Input indices of the rows kept.
    pub rows: Vec<usize>,
}

pub fn design_matrix(response: &[Option<f64>], factors: &[Factor]) -> Result<Design, StatsError> {
    for f in factors {
        if f.len() != response.len() {
            return Err(StatsError::FactorLength { factor: f.name().to_string(), expected: response.len(), got: f.len() });
        }
    }
    let rows: Vec<usize> = (0..response.len())
        .filter(|&i| response[i].is_some_and(f64::is_finite) && factors.iter().all(|f| f.present(i)))
        .collect();
    let mut names = vec!["(Intercept)".to_string()];
    let mut refs = BTreeMap::new();
    let mut columns: Vec<Box<dyn Fn(usize) -> f64 + '_>> = vec![Box::new(|_| 1.0)];
    for f in factors {
        match f {
            Factor::Categorical { name, values } => {
                let mut levels: Vec<String> = rows.iter().filter_map(|&i| values[i].clone()).collect();
                sort_levels(&mut levels);
                levels.dedup();
                if let Some(first) = levels.first() {
                    refs.insert(name.clone(), first.clone());
                }
                for level in levels.into_iter().skip(1) {
                    names.push(format!("{name}: {level}"));
                    columns.push(Box::new(move |i| if values[i].as_deref() == Some(level.as_str()) { 1.0 } else { 0.0 }));
                }
            }
            Factor::Binary { name, values } => {
                refs.insert(name.clone(), "False".into());
                names.push(format!("{name}True"));
                columns.push(Box::new(move |i| if values[i] == Some(true) { 1.0 } else { 0.0 }));
            }
        }
    }
    let x = rows.iter().map(|&i| columns.iter().map(|c| c(i)).collect()).collect();
    Ok(Design { x, names, reference_levels: refs, rows })
}

/// Cholesky factor of a symmetric positive definite matrix; on failure
/// returns the index of the first column that is (numerically) a linear
/// combination of the earlier ones.
fn cholesky<T: Real>(a: &[Vec<T>]) -> Result<Vec<Vec<T>>, usize> {
    let n = a.len();
    let mut l = vec![vec![T::zero(); n]; n];
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if d <= a[j][j].abs() * T::of(1e-10) || d <= T::zero() {
            return Err(j);
        }
        l[j][j] = d.sqrt();
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / l[j][j];
        }
    }
    Ok(l)
}

fn cholesky_inverse<T: Real>(l: &[Vec<T>]) -> Vec<Vec<T>> {
    let n = l.len();
    // Invert L by forward substitution, then (X'X)^-1 = L^-T L^-1.
    let mut li = vec![vec![T::zero(); n]; n];
    for c in 0..n {
        for r in c..n {
            let mut s = if r == c { T::one() } else { T::zero() };
            for k in c..r {
                s -= l[r][k] * li[k][c];
            }
            li[r][c] = s / l[r][r];
        }
    }
    let mut inv = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: T = (i.max(j)..n).map(|k| li[k][i] * li[k][j]).sum();
            inv[i][j] = s;
            inv[j][i] = s;
        }
    }
    inv
}

/// Ordinary least squares via the normal equations.
pub fn fit_ols(response: &[Option<f64>], factors: &[Factor]) -> Result<RegressionResult, StatsError> {
    let Design { x, names, reference_levels, rows } = design_matrix(response, factors)?;
    let y: Vec<f64> = rows.iter().map(|&i| response[i].expect("filtered")).collect();
    let n = y.len();
    let p = names.len();
    if n <= p {
        return Err(StatsError::TooFew { needed: p + 1, got: n });
    }
    let mut xtx = vec![vec![0.0f64; p]; p];
    let mut xty = vec![0.0f64; p];
    for (row, &yi) in x.iter().zip(&y) {
        for a in 0..p {
            if row[a] == 0.0 {
                continue;
            }
            xty[a] += row[a] * yi;
            for b in 0..p {
                xtx[a][b] += row[a] * row[b];
            }
        }
    }
    let l = cholesky(&xtx).map_err(|j| {
        // Name the earlier columns that share support with the failing one.
        let with = (0..j).filter(|&k| xtx[j][k] != 0.0).map(|k| names[k].clone()).collect();
        StatsError::RankDeficient { column: names[j].clone(), with }
    })?;
    let inv = cholesky_inverse(&l);
    let beta: Vec<f64> = (0..p).map(|a| (0..p).map(|b| inv[a][b] * xty[b]).sum()).collect();
    let fitted: Vec<f64> = x.iter().map(|row| row.iter().zip(&beta).map(|(a, b)| a * b).sum()).collect();
    let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|a| (a - mean_y).powi(2)).sum();
    let df = n - p;
    let sigma2 = rss / df as f64;
    let coefficients = (0..p)
        .map(|j| {
            let se = (sigma2 * inv[j][j]).sqrt();
            let t = if se > 0.0 { beta[j] / se } else { 0.0 };
            Coefficient { term: names[j].clone(), estimate: beta[j], std_error: se, t, p: two_sided_p(t, df as f64) }
        })
        .collect();
    Ok(RegressionResult {
        coefficients,
        reference_levels,
        r_squared: if tss > 0.0 { 1.0 - rss / tss } else { 0.0 },
        residual_std_error: sigma2.sqrt(),
        df_residual: df,
        n,
    })
}
