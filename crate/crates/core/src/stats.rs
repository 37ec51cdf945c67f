//! Friedman test and Nemenyi critical difference over an
//! algorithms x datasets score table.

use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};

/// Per-dataset ranks of `s` algorithms over `N` datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub scores: Vec<Vec<f64>>,
    pub ranks: Vec<Vec<f64>>,
    pub avg_ranks: Vec<f64>,
}

impl RankTable {
    /// Number of datasets.
    pub fn n_datasets(&self) -> usize {
        self.ranks.len()
    }

    /// Number of algorithms.
    pub fn n_algorithms(&self) -> usize {
        self.avg_ranks.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub chi2: f64,
    pub f_stat: f64,
    /// `(s - 1, (s - 1)(N - 1))`
    pub dof: (usize, usize),
    /// Set when a critical value was supplied.
    pub significant: Option<bool>,
}

/// Ranks every row, 1 = best. Tied scores share the mean of their positions.
pub fn rank_rows(scores: &[Vec<f64>], higher_is_better: bool) -> Result<RankTable> {
    let n = scores.len();
    let s = scores.first().map_or(0, Vec::len);
    if n < 2 || s < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 datasets and 2 algorithms, got {n} x {s}"
        )));
    }
    let mut ranks = Vec::with_capacity(n);
    for (r, row) in scores.iter().enumerate() {
        if row.len() != s {
            return Err(Error::LengthMismatch {
                left: row.len(),
                right: s,
            });
        }
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite score at row {r}, column {c}"
            )));
        }
        ranks.push(rank_one(row, higher_is_better));
    }
    let avg_ranks = (0..s)
        .map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    Ok(RankTable {
        scores: scores.to_vec(),
        ranks,
        avg_ranks,
    })
}

fn rank_one(row: &[f64], higher_is_better: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = row[a].total_cmp(&row[b]);
        if higher_is_better {
            ord.reverse()
        } else {
            ord
        }
    });
    let mut ranks = vec![0.0; row.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && row[order[end]] == row[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share their mean
        let shared = (start + 1 + end) as f64 / 2.0;
        for &j in &order[start..end] {
            ranks[j] = shared;
        }
        start = end;
    }
    ranks
}

/// Friedman chi-square and its F-distributed form.
///
/// Fails when `N (s - 1) - chi2 <= 0`, where the F statistic is undefined.
pub fn friedman(table: &RankTable, critical_value: Option<f64>) -> Result<FriedmanResult> {
    let n = table.n_datasets() as f64;
    let s = table.n_algorithms() as f64;
    let sum_sq: f64 = table.avg_ranks.iter().map(|r| r * r).sum();
    let chi2 = (12.0 * n / (s * (s + 1.0)) * (sum_sq - s * (s + 1.0) * (s + 1.0) / 4.0)).max(0.0);
    let denom = n * (s - 1.0) - chi2;
    if denom <= 1e-12 * n * (s - 1.0) {
        return Err(Error::DegenerateFriedman(denom));
    }
    let f_stat = (n - 1.0) * chi2 / denom;
    let k = table.n_algorithms();
    Ok(FriedmanResult {
        chi2,
        f_stat,
        dof: (k - 1, (k - 1) * (table.n_datasets() - 1)),
        significant: critical_value.map(|cv| f_stat > cv),
    })
}

/// Upper `level` quantile of the F distribution, e.g. the critical value of
/// the Friedman F statistic at `level = 0.05`.
pub fn f_critical_value(level: f64, dof: (usize, usize)) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("significance level {level} not in (0, 1)")));
    }
    let dist = FisherSnedecor::new(dof.0 as f64, dof.1 as f64)
        .map_err(|e| Error::InvalidArgument(format!("bad F degrees of freedom {dof:?}: {e}")))?;
    Ok(dist.inverse_cdf(1.0 - level))
}

/// `q * sqrt(s (s + 1) / (6 N))`
pub fn nemenyi_cd(s: usize, n: usize, q_alpha: f64) -> Result<f64> {
    if s < 2 || n < 1 || !(q_alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "nemenyi_cd needs s >= 2, N >= 1, q >= 0 (got s={s}, N={n}, q={q_alpha})"
        )));
    }
    Ok(q_alpha * ((s * (s + 1)) as f64 / (6.0 * n as f64)).sqrt())
}

/// Two-tailed Nemenyi critical values (Studentized range over sqrt 2) for
/// `s = 2..=10` algorithms.
const Q_005: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];
const Q_010: [f64; 9] = [1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920];

/// Tabulated `q_alpha` for `alpha` in {0.05, 0.10} and `2 <= s <= 10`.
pub fn nemenyi_q(alpha: f64, s: usize) -> Option<f64> {
    let table = if (alpha - 0.05).abs() < 1e-12 {
        &Q_005
    } else if (alpha - 0.10).abs() < 1e-12 {
        &Q_010
    } else {
        return None;
    };
    s.checked_sub(2).and_then(|i| table.get(i)).copied()
}

/// Score table read from CSV: header row of algorithm names, one row per
/// dataset. A non-numeric first column is taken as dataset names.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub algorithms: Vec<String>,
    pub datasets: Vec<String>,
    pub scores: Vec<Vec<f64>>,
}

pub fn load_score_table(path: impl AsRef<Path>) -> Result<ScoreTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(std::io::BufReader::new(file));
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let records = reader
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(csv_err)?;
    if records.is_empty() {
        return Err(Error::Empty(path.display().to_string()));
    }
    let named_rows = records.iter().any(|r| r.get(0).is_some_and(|c| c.parse::<f64>().is_err()));
    let skip = usize::from(named_rows);
    let mut datasets = Vec::with_capacity(records.len());
    let mut scores = Vec::with_capacity(records.len());
    for (r, rec) in records.iter().enumerate() {
        datasets.push(if named_rows {
            rec[0].to_string()
        } else {
            format!("dataset{r}")
        });
        let row = rec
            .iter()
            .enumerate()
            .skip(skip)
            .map(|(c, cell)| {
                cell.parse::<f64>().map_err(|_| Error::Parse {
                    row: rec.position().map_or(r + 2, |p| p.line() as usize),
                    column: header.get(c).cloned().unwrap_or_else(|| format!("#{c}")),
                    value: cell.to_string(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        scores.push(row);
    }
    Ok(ScoreTable {
        algorithms: header.into_iter().skip(skip).collect(),
        datasets,
        scores,
    })
}
