//! Labeled tabular data: CSV ingestion, min-max scaling, the decision-class
//! partition and stratified cross-validation folds.
//!
//! A [`Dataset`] is immutable once built. Class identifiers are indices into
//! the lexicographically sorted list of distinct label strings, so the same
//! file always yields the same class numbering regardless of row order.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major `n x m` feature matrix with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n: usize,
    m: usize,
    labels: Vec<usize>,
    class_names: Vec<String>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from a row-major matrix and textual labels.
    ///
    /// Labels are mapped onto the sorted set of distinct label strings.
    pub fn new<S: AsRef<str>>(
        features: Vec<f64>,
        n: usize,
        m: usize,
        labels: &[S],
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDataset(format!("need n >= 2 instances, got {n}")));
        }
        if m < 1 {
            return Err(Error::InvalidDataset("need at least one feature".into()));
        }
        if features.len() != n * m {
            return Err(Error::LengthMismatch {
                left: features.len(),
                right: n * m,
            });
        }
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: n,
            });
        }
        if feature_names.len() != m {
            return Err(Error::LengthMismatch {
                left: feature_names.len(),
                right: m,
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite value at row {}, feature {}",
                pos / m,
                pos % m
            )));
        }

        let class_names: Vec<String> = labels
            .iter()
            .map(|l| l.as_ref().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if class_names.len() < 2 {
            return Err(Error::SingleClass(class_names.len()));
        }
        let labels = labels
            .iter()
            .map(|l| {
                class_names
                    .binary_search_by(|c| c.as_str().cmp(l.as_ref()))
                    .expect("label present in its own class set")
            })
            .collect();

        Ok(Dataset {
            features,
            n,
            m,
            labels,
            class_names,
            feature_names,
        })
    }

    /// Convenience constructor from a slice of equally long rows; features are
    /// named `f0..f{m-1}`.
    pub fn from_rows<S: AsRef<str>>(rows: &[Vec<f64>], labels: &[S]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut features = Vec::with_capacity(n * m);
        for row in rows {
            if row.len() != m {
                return Err(Error::LengthMismatch {
                    left: row.len(),
                    right: m,
                });
            }
            features.extend_from_slice(row);
        }
        Dataset::new(features, n, m, labels, default_feature_names(m))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of distinct classes.
    pub fn p(&self) -> usize {
        self.class_names.len()
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.features[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.m..(i + 1) * self.m]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.value(i, j))
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Class index of every instance, in row order.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Distinct label strings in canonical (sorted) order.
    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Copy of the dataset with each instance translated by `offset`, then
    /// multiplied by `scale`. Used for invariance checks.
    pub fn affine(&self, offset: &[f64], scale: f64) -> Result<Self> {
        if offset.len() != self.m {
            return Err(Error::LengthMismatch {
                left: offset.len(),
                right: self.m,
            });
        }
        let features = self
            .features
            .chunks(self.m)
            .flat_map(|row| row.iter().zip(offset).map(|(x, o)| (x + o) * scale))
            .collect();
        Ok(Dataset {
            features,
            ..self.clone()
        })
    }
}

pub(crate) fn default_feature_names(m: usize) -> Vec<String> {
    (0..m).map(|j| format!("f{j}")).collect()
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl FromStr for LabelColumn {
    type Err = Error;

    /// `#3` selects column 3 (0-based); anything else is a header name.
    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix('#') {
            Some(idx) => idx
                .parse()
                .map(LabelColumn::Index)
                .map_err(|_| Error::InvalidArgument(format!("bad label column index {s:?}"))),
            None if s.is_empty() => Err(Error::InvalidArgument("empty label column".into())),
            None => Ok(LabelColumn::Name(s.to_string())),
        }
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Name(name) => f.write_str(name),
            LabelColumn::Index(i) => write!(f, "#{i}"),
        }
    }
}

/// Reads a comma-separated file with one label column and numeric features.
///
/// Rows keep their file order. Without a header, features are named
/// `f0..f{m-1}` and the label must be given by index. Parse errors report the
/// 1-based line number of the offending record.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn, has_header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(std::io::BufReader::new(file));
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };

    let header: Option<Vec<String>> = if has_header {
        let h = reader.headers().map_err(csv_err)?;
        if h.is_empty() {
            return Err(Error::Empty(path.display().to_string()));
        }
        Some(h.iter().map(str::to_string).collect())
    } else {
        None
    };

    let label_idx = match (label, &header) {
        (LabelColumn::Index(i), _) => *i,
        (LabelColumn::Name(name), Some(h)) => h.iter().position(|c| c == name).ok_or_else(|| {
            Error::InvalidArgument(format!("label column {name:?} not found in header"))
        })?,
        (LabelColumn::Name(name), None) => {
            return Err(Error::InvalidArgument(format!(
                "label column {name:?} given by name but the file has no header"
            )))
        }
    };

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width = header.as_ref().map(Vec::len);
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let w = *width.get_or_insert(record.len());
        if label_idx >= w {
            return Err(Error::InvalidArgument(format!(
                "label column #{label_idx} out of range ({w} columns)"
            )));
        }
        for (c, cell) in record.iter().enumerate() {
            if c == label_idx {
                labels.push(cell.to_string());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: line,
                column: header
                    .as_ref()
                    .map_or_else(|| format!("#{c}"), |h| h[c].clone()),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    column: header
                        .as_ref()
                        .map_or_else(|| format!("#{c}"), |h| h[c].clone()),
                    value: cell.to_string(),
                });
            }
            features.push(v);
        }
    }

    let n = labels.len();
    if n == 0 {
        return Err(Error::Empty(path.display().to_string()));
    }
    let w = width.unwrap_or(0);
    if label_idx >= w {
        return Err(Error::InvalidArgument(format!(
            "label column #{label_idx} out of range ({w} columns)"
        )));
    }
    let m = w - 1;
    let feature_names = match header {
        Some(h) => h
            .into_iter()
            .enumerate()
            .filter(|&(c, _)| c != label_idx)
            .map(|(_, name)| name)
            .collect(),
        None => default_feature_names(m),
    };
    Dataset::new(features, n, m, &labels, feature_names)
}

/// Rescales every column to `[0, 1]`; constant columns become all zeros.
pub fn minmax_normalize(d: &Dataset) -> Dataset {
    let (n, m) = (d.n, d.m);
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for row in d.features.chunks(m) {
        for (j, &v) in row.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    let mut features = Vec::with_capacity(n * m);
    for row in d.features.chunks(m) {
        features.extend(row.iter().enumerate().map(|(j, &v)| {
            let range = hi[j] - lo[j];
            if range > 0.0 {
                (v - lo[j]) / range
            } else {
                0.0
            }
        }));
    }
    Dataset {
        features,
        ..d.clone()
    }
}

/// Instances grouped by decision class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassPartition {
    /// `classes[q]` lists the (ascending) row indices labelled `class_order[q]`.
    pub classes: Vec<Vec<usize>>,
    pub class_order: Vec<String>,
}

impl ClassPartition {
    pub fn p(&self) -> usize {
        self.classes.len()
    }

    pub fn n(&self) -> usize {
        self.classes.iter().map(Vec::len).sum()
    }

    /// Class index of every instance, inverse of `classes`.
    pub fn class_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.n()];
        for (q, members) in self.classes.iter().enumerate() {
            for &i in members {
                out[i] = q;
            }
        }
        out
    }
}

pub fn partition_by_class(d: &Dataset) -> ClassPartition {
    let mut classes = vec![Vec::new(); d.p()];
    for (i, &q) in d.labels.iter().enumerate() {
        classes[q].push(i);
    }
    ClassPartition {
        classes,
        class_order: d.class_names.clone(),
    }
}

/// Fold index of every instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
}

impl FoldAssignment {
    /// Row indices held out in `fold`.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }
}

/// Stratified fold assignment.
///
/// Each class is shuffled with ChaCha8 seeded by `seed` on stream `q` (the
/// class index), then dealt round-robin. Dealing continues across classes
/// from where the previous class stopped, so every fold is non-empty when
/// `folds <= n`.
pub fn stratified_folds(d: &Dataset, folds: usize, seed: u64) -> Result<FoldAssignment> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("folds must be >= 2, got {folds}")));
    }
    if folds > d.n {
        return Err(Error::InvalidArgument(format!(
            "folds = {folds} exceeds the number of instances n = {}",
            d.n
        )));
    }
    let part = partition_by_class(d);
    let mut fold_of = vec![0; d.n];
    let mut next = 0usize;
    for (q, members) in part.classes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(q as u64);
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for i in shuffled {
            fold_of[i] = next;
            next = (next + 1) % folds;
        }
    }
    Ok(FoldAssignment {
        fold_of,
        folds,
        seed,
    })
}
