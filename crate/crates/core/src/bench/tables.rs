//! Score matrices, rank tables and significance reports for `evofis stats`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::run::ExperimentReport;
use crate::error::{Error, Result};
use crate::stats::{
    bonferroni_dunn_cd, friedman, rank_differences, rank_problems, FriedmanOutcome, RankTable,
    SUPPORTED_ALPHAS,
};

/// Problems x algorithms scores; lower is better.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub problems: Vec<String>,
    pub algorithms: Vec<String>,
    pub scores: Vec<Vec<f64>>,
}

fn push_unique(list: &mut Vec<String>, name: &str) {
    if !list.iter().any(|n| n == name) {
        list.push(name.to_string());
    }
}

fn missing_error(missing: &[(String, String)]) -> Error {
    let cells: Vec<String> = missing
        .iter()
        .map(|(p, a)| format!("({p}, {a})"))
        .collect();
    Error::IncompleteMatrix(format!("missing cells: {}", cells.join(", ")))
}

impl ScoreMatrix {
    /// Reads `problem,<alg1>,<alg2>,...` with one row per problem. Empty
    /// cells are reported as missing.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_path(path)?;
        let headers = reader.headers()?.clone();
        if headers.len() < 2 {
            return Err(Error::Schema(
                "score matrix needs a problem column and at least one algorithm column".into(),
            ));
        }
        let algorithms: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut problems = Vec::new();
        let mut scores = Vec::new();
        let mut missing = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let problem = record.get(0).unwrap_or("").to_string();
            let mut row = Vec::with_capacity(algorithms.len());
            for (j, alg) in algorithms.iter().enumerate() {
                let cell = record.get(j + 1).unwrap_or("");
                if cell.is_empty() {
                    missing.push((problem.clone(), alg.clone()));
                    row.push(f64::NAN);
                    continue;
                }
                match cell.parse::<f64>() {
                    Ok(x) if x.is_finite() => row.push(x),
                    _ => {
                        return Err(Error::Ingestion {
                            row: i + 1,
                            message: format!("score for `{alg}` is not a number: `{cell}`"),
                        })
                    }
                }
            }
            problems.push(problem);
            scores.push(row);
        }
        if !missing.is_empty() {
            return Err(missing_error(&missing));
        }
        if problems.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Self {
            problems,
            algorithms,
            scores,
        })
    }

    /// Collects the RMSE of each report into a matrix. Problems and
    /// algorithms keep their order of first appearance.
    pub fn from_reports(reports: &[ExperimentReport]) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut problems = Vec::new();
        let mut algorithms = Vec::new();
        let mut cells = BTreeMap::new();
        for r in reports {
            push_unique(&mut problems, &r.problem);
            push_unique(&mut algorithms, &r.algorithm);
            if cells
                .insert((r.problem.clone(), r.algorithm.clone()), r.rmse)
                .is_some()
            {
                return Err(Error::InvalidArgument(format!(
                    "duplicate report for ({}, {})",
                    r.problem, r.algorithm
                )));
            }
        }
        let mut missing = Vec::new();
        let scores = problems
            .iter()
            .map(|p| {
                algorithms
                    .iter()
                    .map(|a| {
                        cells.get(&(p.clone(), a.clone())).copied().unwrap_or_else(|| {
                            missing.push((p.clone(), a.clone()));
                            f64::NAN
                        })
                    })
                    .collect()
            })
            .collect();
        if !missing.is_empty() {
            return Err(missing_error(&missing));
        }
        Ok(Self {
            problems,
            algorithms,
            scores,
        })
    }

    pub fn load_reports(paths: &[PathBuf]) -> Result<Self> {
        let reports = paths
            .iter()
            .map(|p| ExperimentReport::from_json(&std::fs::read_to_string(p)?))
            .collect::<Result<Vec<_>>>()?;
        Self::from_reports(&reports)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankGap {
    pub best: String,
    pub other: String,
    pub difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalDifference {
    pub alpha: f64,
    pub cd: f64,
}

/// Everything `evofis stats` reports. The significance parts are `None`
/// when fewer than two problems are given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub ranks: RankTable,
    pub friedman: Option<FriedmanOutcome>,
    pub differences: Vec<RankGap>,
    pub critical_differences: Vec<CriticalDifference>,
    pub note: Option<String>,
}

pub fn analyze(matrix: &ScoreMatrix) -> Result<StatsReport> {
    let ranks = rank_problems(&matrix.problems, &matrix.algorithms, &matrix.scores, true)?;
    let n = ranks.ranks.len();
    let k = ranks.algorithms.len();
    if n < 2 || k < 2 {
        return Ok(StatsReport {
            ranks,
            friedman: None,
            differences: Vec::new(),
            critical_differences: Vec::new(),
            note: Some(format!(
                "Friedman test refused: it needs N >= 2 problems and k >= 2 algorithms (got N = {n}, k = {k})"
            )),
        });
    }
    let outcome = friedman(&ranks)?;
    let best = ranks.best();
    let differences = rank_differences(&ranks)
        .into_iter()
        .enumerate()
        .filter(|(j, _)| *j != best)
        .map(|(j, d)| RankGap {
            best: ranks.algorithms[best].clone(),
            other: ranks.algorithms[j].clone(),
            difference: d,
        })
        .collect();
    let critical_differences = SUPPORTED_ALPHAS
        .iter()
        .map(|&alpha| Ok(CriticalDifference { alpha, cd: bonferroni_dunn_cd(k, n, alpha)? }))
        .collect::<Result<_>>()?;
    Ok(StatsReport {
        ranks,
        friedman: Some(outcome),
        differences,
        critical_differences,
        note: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Writes `ranks.csv`, `differences.csv` and `friedman.csv` (the last two
/// only when the test ran), or a single `stats.json`.
pub fn write_stats(report: &StatsReport, dir: impl AsRef<Path>, format: OutputFormat) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    if format == OutputFormat::Json {
        let path = dir.join("stats.json");
        std::fs::write(&path, serde_json::to_string_pretty(report)? + "\n")?;
        return Ok(vec![path]);
    }

    let mut written = Vec::new();
    let ranks_path = dir.join("ranks.csv");
    let mut w = csv::Writer::from_path(&ranks_path)?;
    let mut header = vec!["problem".to_string()];
    header.extend(report.ranks.algorithms.iter().cloned());
    w.write_record(&header)?;
    for (problem, row) in report.ranks.problems.iter().zip(&report.ranks.ranks) {
        let mut rec = vec![problem.clone()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    let mut avg = vec!["Avg Rank".to_string()];
    avg.extend(report.ranks.average_ranks.iter().map(f64::to_string));
    w.write_record(&avg)?;
    w.flush()?;
    written.push(ranks_path);

    if let Some(outcome) = &report.friedman {
        let diff_path = dir.join("differences.csv");
        let mut w = csv::Writer::from_path(&diff_path)?;
        w.write_record(["comparison", "value"])?;
        for gap in &report.differences {
            w.write_record([format!("{} vs {}", gap.best, gap.other), gap.difference.to_string()])?;
        }
        for cd in &report.critical_differences {
            w.write_record([format!("CD alpha={}", cd.alpha), cd.cd.to_string()])?;
        }
        w.flush()?;
        written.push(diff_path);

        let fr_path = dir.join("friedman.csv");
        let mut w = csv::Writer::from_path(&fr_path)?;
        w.write_record(["alpha", "q", "df", "critical_value", "exact", "reject_null"])?;
        for level in &outcome.levels {
            w.write_record([
                level.alpha.to_string(),
                outcome.q.to_string(),
                outcome.df.to_string(),
                level.critical_value.to_string(),
                level.exact.to_string(),
                level.reject_null.to_string(),
            ])?;
        }
        w.flush()?;
        written.push(fr_path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let path = dir.join(name);
        std::fs::File::create(&path).unwrap().write_all(text.as_bytes()).unwrap();
        path
    }

    #[test]
    fn ragged_matrix_names_missing_cells() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "m.csv", "problem,a,b\nP1,1,2\nP2,3,\n");
        match ScoreMatrix::from_csv(&path) {
            Err(Error::IncompleteMatrix(msg)) => assert!(msg.contains("(P2, b)"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_problem_refuses_friedman() {
        let m = ScoreMatrix {
            problems: vec!["P".into()],
            algorithms: vec!["a".into(), "b".into()],
            scores: vec![vec![0.1, 0.2]],
        };
        let report = analyze(&m).unwrap();
        assert!(report.friedman.is_none());
        assert!(report.note.as_ref().unwrap().contains("N >= 2"));
        let dir = tempfile::tempdir().unwrap();
        let files = write_stats(&report, dir.path(), OutputFormat::Csv).unwrap();
        assert_eq!(files.len(), 1);
    }

    #[test]
    fn identical_algorithms_tie() {
        let m = ScoreMatrix {
            problems: vec!["P1".into(), "P2".into()],
            algorithms: vec!["a".into(), "b".into()],
            scores: vec![vec![0.3, 0.3], vec![0.5, 0.5]],
        };
        let report = analyze(&m).unwrap();
        assert_eq!(report.ranks.average_ranks, vec![1.5, 1.5]);
    }
}
