//! Error scores and rank statistics across algorithms and problems.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Significance levels with built-in quantiles.
pub const SUPPORTED_ALPHAS: [f64; 2] = [0.05, 0.01];

/// `z_{1 - alpha / (2 (k - 1))}` for `k = 3`.
const Z_K3_ALPHA_05: f64 = 2.241_402_727_604_947;
const Z_K3_ALPHA_01: f64 = 2.807_033_768_343_811;

fn check_shapes(actuals: &[Vec<f64>], predictions: &[Vec<f64>]) -> Result<usize> {
    if actuals.is_empty() {
        return Err(Error::EmptyInput);
    }
    if actuals.len() != predictions.len() {
        return Err(Error::Dimension {
            what: "prediction count",
            expected: actuals.len(),
            actual: predictions.len(),
        });
    }
    let mut count = 0;
    for (a, p) in actuals.iter().zip(predictions) {
        if a.len() != p.len() {
            return Err(Error::Dimension {
                what: "prediction width",
                expected: a.len(),
                actual: p.len(),
            });
        }
        count += a.len();
    }
    if count == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(count)
}

/// Root mean squared error over every sample and output coordinate.
pub fn rmse(actuals: &[Vec<f64>], predictions: &[Vec<f64>]) -> Result<f64> {
    let count = check_shapes(actuals, predictions)?;
    let sse: f64 = actuals
        .iter()
        .zip(predictions)
        .flat_map(|(a, p)| a.iter().zip(p).map(|(x, y)| (x - y).powi(2)))
        .sum();
    Ok((sse / count as f64).sqrt())
}

/// RMSE divided by the population standard deviation of the actuals.
pub fn ndei(actuals: &[Vec<f64>], predictions: &[Vec<f64>]) -> Result<f64> {
    let count = check_shapes(actuals, predictions)?;
    if count < 2 {
        return Err(Error::Degenerate("NDEI needs at least two values".into()));
    }
    let mean = actuals.iter().flatten().sum::<f64>() / count as f64;
    let var = actuals.iter().flatten().map(|x| (x - mean).powi(2)).sum::<f64>() / count as f64;
    if !(var > 0.0) {
        return Err(Error::Degenerate("actual values are constant".into()));
    }
    Ok(rmse(actuals, predictions)? / var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub problems: Vec<String>,
    pub algorithms: Vec<String>,
    /// `problems x algorithms`, 1 = best, ties averaged.
    pub ranks: Vec<Vec<f64>>,
    pub average_ranks: Vec<f64>,
}

impl RankTable {
    pub fn rank_sums(&self) -> Vec<f64> {
        (0..self.algorithms.len())
            .map(|j| self.ranks.iter().map(|row| row[j]).sum())
            .collect()
    }

    /// Index of the algorithm with the lowest average rank.
    pub fn best(&self) -> usize {
        self.average_ranks
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i)
    }
}

fn rank_row(scores: &[f64], lower_is_better: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = scores[a].total_cmp(&scores[b]);
        if lower_is_better {
            ord
        } else {
            ord.reverse()
        }
    });
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // positions i..=j share the mean of ranks i+1..=j+1
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

/// Ranks algorithms within each problem row.
pub fn rank_problems(
    problems: &[String],
    algorithms: &[String],
    scores: &[Vec<f64>],
    lower_is_better: bool,
) -> Result<RankTable> {
    if scores.is_empty() || algorithms.is_empty() {
        return Err(Error::IncompleteMatrix("no scores".into()));
    }
    if problems.len() != scores.len() {
        return Err(Error::IncompleteMatrix(format!(
            "{} problem names for {} score rows",
            problems.len(),
            scores.len()
        )));
    }
    for (name, row) in problems.iter().zip(scores) {
        if row.len() != algorithms.len() {
            return Err(Error::IncompleteMatrix(format!(
                "problem `{name}` has {} scores for {} algorithms",
                row.len(),
                algorithms.len()
            )));
        }
        if let Some(j) = row.iter().position(|x| !x.is_finite()) {
            return Err(Error::IncompleteMatrix(format!(
                "missing score for problem `{name}`, algorithm `{}`",
                algorithms[j]
            )));
        }
    }
    let ranks: Vec<Vec<f64>> = scores.iter().map(|row| rank_row(row, lower_is_better)).collect();
    let n = ranks.len() as f64;
    let average_ranks = (0..algorithms.len())
        .map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    Ok(RankTable {
        problems: problems.to_vec(),
        algorithms: algorithms.to_vec(),
        ranks,
        average_ranks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceLevel {
    pub alpha: f64,
    pub critical_value: f64,
    /// `false` when the critical value comes from the chi-square
    /// approximation rather than an exact table.
    pub exact: bool,
    pub reject_null: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FriedmanOutcome {
    pub q: f64,
    pub df: usize,
    pub levels: Vec<SignificanceLevel>,
}

/// Exact critical values of the Friedman statistic for small designs.
fn exact_critical(k: usize, n: usize, alpha: f64) -> Option<f64> {
    match (k, n) {
        (3, 6) if alpha == 0.05 => Some(7.0),
        (3, 6) if alpha == 0.01 => Some(9.0),
        _ => None,
    }
}

/// `Q = 12 / (N k (k+1)) sum_j R_j^2 - 3 N (k+1)` with rank sums `R_j`.
pub fn friedman_q(table: &RankTable) -> Result<f64> {
    let n = table.ranks.len();
    let k = table.algorithms.len();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "the Friedman test needs N >= 2 problems, got {n}"
        )));
    }
    if k < 2 {
        return Err(Error::Degenerate(format!(
            "the Friedman test needs k >= 2 algorithms, got {k}"
        )));
    }
    let (nf, kf) = (n as f64, k as f64);
    let sum_sq: f64 = table.rank_sums().iter().map(|r| r * r).sum();
    Ok((12.0 / (nf * kf * (kf + 1.0)) * sum_sq - 3.0 * nf * (kf + 1.0)).max(0.0))
}

pub fn friedman(table: &RankTable) -> Result<FriedmanOutcome> {
    let q = friedman_q(table)?;
    let n = table.ranks.len();
    let k = table.algorithms.len();
    let df = k - 1;
    let chi = ChiSquared::new(df as f64).map_err(|e| Error::Numerical(e.to_string()))?;
    let levels = SUPPORTED_ALPHAS
        .iter()
        .map(|&alpha| {
            let (critical_value, exact) = match exact_critical(k, n, alpha) {
                Some(c) => (c, true),
                None => (chi.inverse_cdf(1.0 - alpha), false),
            };
            SignificanceLevel {
                alpha,
                critical_value,
                exact,
                reject_null: q > critical_value,
            }
        })
        .collect();
    Ok(FriedmanOutcome { q, df, levels })
}

/// Two-sided normal quantile at `alpha / (k - 1)`.
pub fn bonferroni_dunn_quantile(k: usize, alpha: f64) -> Result<f64> {
    if !SUPPORTED_ALPHAS.contains(&alpha) {
        return Err(Error::UnsupportedAlpha(alpha));
    }
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need k >= 2 algorithms, got {k}")));
    }
    if k == 3 {
        return Ok(if alpha == 0.05 { Z_K3_ALPHA_05 } else { Z_K3_ALPHA_01 });
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(1.0 - alpha / (2.0 * (k - 1) as f64)))
}

/// `CD = q_alpha sqrt(k (k+1) / (6 N))`
pub fn bonferroni_dunn_cd(k: usize, n: usize, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one problem".into()));
    }
    let q = bonferroni_dunn_quantile(k, alpha)?;
    let (kf, nf) = (k as f64, n as f64);
    Ok(q * (kf * (kf + 1.0) / (6.0 * nf)).sqrt())
}

/// Average-rank gap of every algorithm to the best-ranked one.
pub fn rank_differences(table: &RankTable) -> Vec<f64> {
    let best = table.average_ranks[table.best()];
    table.average_ranks.iter().map(|r| r - best).collect()
}
