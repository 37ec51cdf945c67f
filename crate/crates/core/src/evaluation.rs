//! Evaluation of ranked feature lists: kNN accuracy under stratified
//! cross-validation, k-means clustering scored by NMI, and top-t curves.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_folds, Dataset, FoldAssignment};
use crate::error::{Error, Result};
use crate::selector::SelectionTrace;
use crate::separability::{sq_dist, FeatureSubset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Pooled kNN accuracy under stratified k-fold cross-validation.
    Knn,
    /// NMI between k-means clusters and class labels.
    Nmi,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Knn => "knn",
            Metric::Nmi => "nmi",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(Metric::Knn),
            "nmi" => Ok(Metric::Nmi),
            _ => Err(Error::InvalidArgument(format!("unknown metric {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub knn_k: usize,
    pub folds: usize,
    pub seed: u64,
    pub max_top: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            knn_k: 5,
            folds: 10,
            seed: 0,
            max_top: 150,
            kmeans_max_iter: 300,
            kmeans_tol: 1e-6,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.knn_k < 1 {
            return Err(Error::InvalidArgument("knn_k must be >= 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidArgument("folds must be >= 2".into()));
        }
        if self.max_top < 1 {
            return Err(Error::InvalidArgument("max_top must be >= 1".into()));
        }
        if self.kmeans_max_iter < 1 || !(self.kmeans_tol > 0.0) {
            return Err(Error::InvalidArgument(
                "kmeans_max_iter must be >= 1 and kmeans_tol > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Metric values for the top-1, top-2, ... prefixes of a ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationCurve {
    pub metric: Metric,
    pub values: Vec<f64>,
    pub max_value: f64,
    pub ave_value: f64,
    /// Standard deviation of per-fold accuracy at each t (kNN only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fold_std: Vec<f64>,
}

impl EvaluationCurve {
    pub fn from_values(metric: Metric, values: Vec<f64>) -> Self {
        let max_value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ave_value = values.iter().sum::<f64>() / values.len() as f64;
        EvaluationCurve {
            metric,
            values,
            max_value,
            ave_value,
            fold_std: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnOutcome {
    /// Correct predictions over all instances.
    pub accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    /// Folds whose training side was smaller than `knn_k`.
    pub reduced_folds: Vec<usize>,
}

impl KnnOutcome {
    pub fn fold_std(&self) -> f64 {
        let k = self.fold_accuracies.len() as f64;
        let mean = self.fold_accuracies.iter().sum::<f64>() / k;
        (self.fold_accuracies.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / k).sqrt()
    }
}

/// Pooled kNN accuracy over the folds of `folds`.
pub fn knn_accuracy(d: &Dataset, subset: &FeatureSubset, folds: &FoldAssignment, knn_k: usize) -> Result<f64> {
    knn_cross_validate(d, subset, folds, knn_k).map(|o| o.accuracy)
}

/// kNN cross-validation with per-fold detail.
///
/// Neighbours are ordered by (distance, instance index). Vote ties go to the
/// class of the nearest neighbour if it is among the tied classes, otherwise
/// to the smallest tied class index.
pub fn knn_cross_validate(
    d: &Dataset,
    subset: &FeatureSubset,
    folds: &FoldAssignment,
    knn_k: usize,
) -> Result<KnnOutcome> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("kNN needs a non-empty subset".into()));
    }
    if knn_k < 1 {
        return Err(Error::InvalidArgument("knn_k must be >= 1".into()));
    }
    if folds.fold_of.len() != d.n() {
        return Err(Error::LengthMismatch {
            left: folds.fold_of.len(),
            right: d.n(),
        });
    }
    let rows: Vec<Vec<f64>> = (0..d.n()).map(|i| subset.project(d, i)).collect();
    let mut correct_total = 0usize;
    let mut fold_accuracies = Vec::with_capacity(folds.folds);
    let mut reduced_folds = Vec::new();
    let mut votes = vec![0usize; d.p()];

    for fold in 0..folds.folds {
        let test = folds.test_indices(fold);
        if test.is_empty() {
            continue;
        }
        let train = folds.train_indices(fold);
        if train.is_empty() {
            return Err(Error::InvalidArgument(format!("fold {fold} has no training instances")));
        }
        let k = if train.len() < knn_k {
            log::warn!(
                "fold {fold}: {} training instances, reducing k from {knn_k}",
                train.len()
            );
            reduced_folds.push(fold);
            train.len()
        } else {
            knn_k
        };

        let mut correct = 0usize;
        let mut neighbours: Vec<(f64, usize)> = Vec::with_capacity(train.len());
        for &i in &test {
            neighbours.clear();
            neighbours.extend(train.iter().map(|&t| (sq_dist(&rows[i], &rows[t]), t)));
            neighbours.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

            votes.iter_mut().for_each(|v| *v = 0);
            for &(_, t) in &neighbours[..k] {
                votes[d.label(t)] += 1;
            }
            let top = *votes.iter().max().expect("p >= 2");
            let nearest_class = d.label(neighbours[0].1);
            let predicted = if votes[nearest_class] == top {
                nearest_class
            } else {
                votes.iter().position(|&v| v == top).expect("max exists")
            };
            if predicted == d.label(i) {
                correct += 1;
            }
        }
        correct_total += correct;
        fold_accuracies.push(correct as f64 / test.len() as f64);
    }

    Ok(KnnOutcome {
        accuracy: correct_total as f64 / d.n() as f64,
        fold_accuracies,
        reduced_folds,
    })
}

/// 1-based indices of the evenly spaced initial centroids:
/// `start, start + step, ..., start + (p - 1) step` with
/// `step = floor((n - 1) / (p - 1))` and
/// `start = floor((n - (p - 1) step + 1) / 2)`.
pub fn kmeans_seeds(n: usize, p: usize) -> Result<Vec<usize>> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 clusters, got {p}")));
    }
    if p > n {
        return Err(Error::InvalidArgument(format!(
            "cluster count {p} exceeds the number of instances {n}"
        )));
    }
    let step = (n - 1) / (p - 1);
    let start = (n - (p - 1) * step + 1) / 2;
    Ok((0..p).map(|c| start + c * step).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Lloyd iterations performed.
    pub iterations: usize,
    /// Sum of squared distances to the assigned centroid after each
    /// assignment step.
    pub objective: Vec<f64>,
}

/// Cluster ids from Lloyd's algorithm started at [`kmeans_seeds`].
pub fn kmeans_deterministic(d: &Dataset, subset: &FeatureSubset, p: usize, cfg: &EvalConfig) -> Result<Vec<usize>> {
    kmeans_run(d, subset, p, cfg).map(|r| r.assignments)
}

pub fn kmeans_run(d: &Dataset, subset: &FeatureSubset, p: usize, cfg: &EvalConfig) -> Result<KMeansResult> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("k-means needs a non-empty subset".into()));
    }
    let seeds = kmeans_seeds(d.n(), p)?;
    let rows: Vec<Vec<f64>> = (0..d.n()).map(|i| subset.project(d, i)).collect();
    let dim = subset.len();
    let mut centroids: Vec<Vec<f64>> = seeds.iter().map(|&s| rows[s - 1].clone()).collect();
    let mut assignments = vec![0usize; d.n()];
    let mut objective = Vec::new();
    let mut iterations = 0;

    while iterations < cfg.kmeans_max_iter {
        iterations += 1;
        let mut obj = 0.0;
        for (i, row) in rows.iter().enumerate() {
            let (best, best_d) = nearest_centroid(row, &centroids);
            assignments[i] = best;
            obj += best_d;
        }
        objective.push(obj);

        let mut sums = vec![vec![0.0; dim]; p];
        let mut counts = vec![0usize; p];
        for (row, &c) in rows.iter().zip(&assignments) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(row) {
                *s += v;
            }
        }
        let mut updated: Vec<Vec<f64>> = sums
            .into_iter()
            .zip(&counts)
            .zip(&centroids)
            .map(|((s, &c), old)| {
                if c == 0 {
                    old.clone()
                } else {
                    s.into_iter().map(|v| v / c as f64).collect()
                }
            })
            .collect();
        for c in 0..p {
            if counts[c] == 0 {
                // move the empty cluster onto the worst-served point
                let far = farthest_point(&rows, &updated);
                updated[c] = rows[far].clone();
            }
        }
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        if shift < cfg.kmeans_tol {
            break;
        }
    }
    for (i, row) in rows.iter().enumerate() {
        assignments[i] = nearest_centroid(row, &centroids).0;
    }

    Ok(KMeansResult {
        assignments,
        centroids,
        iterations,
        objective,
    })
}

fn nearest_centroid(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, cen) in centroids.iter().enumerate() {
        let dd = sq_dist(row, cen);
        if dd < best_d {
            best = c;
            best_d = dd;
        }
    }
    (best, best_d)
}

fn farthest_point(rows: &[Vec<f64>], centroids: &[Vec<f64>]) -> usize {
    let mut far = 0;
    let mut far_d = f64::NEG_INFINITY;
    for (i, row) in rows.iter().enumerate() {
        let dd = nearest_centroid(row, centroids).1;
        if dd > far_d {
            far = i;
            far_d = dd;
        }
    }
    far
}

/// Normalized mutual information, `2 I(L; C) / (H(L) + H(C))`, natural logs.
pub fn nmi(labels: &[usize], clusters: &[usize]) -> Result<f64> {
    if labels.len() != clusters.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: clusters.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("nmi of empty sequences".into()));
    }
    let n = labels.len() as f64;
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut left: BTreeMap<usize, usize> = BTreeMap::new();
    let mut right: BTreeMap<usize, usize> = BTreeMap::new();
    for (&l, &c) in labels.iter().zip(clusters) {
        *joint.entry((l, c)).or_default() += 1;
        *left.entry(l).or_default() += 1;
        *right.entry(c).or_default() += 1;
    }
    let entropy = |counts: &BTreeMap<usize, usize>| -> f64 {
        counts
            .values()
            .map(|&c| {
                let pr = c as f64 / n;
                -pr * pr.ln()
            })
            .sum()
    };
    let (hl, hc) = (entropy(&left), entropy(&right));
    if hl + hc == 0.0 {
        // both partitions are a single block
        return Ok(1.0);
    }
    let mi: f64 = joint
        .iter()
        .map(|(&(l, c), &nlc)| {
            let nlc = nlc as f64;
            nlc / n * (n * nlc / (left[&l] as f64 * right[&c] as f64)).ln()
        })
        .sum();
    Ok((2.0 * mi / (hl + hc)).clamp(0.0, 1.0))
}

/// Metric on each prefix `t = 1..=min(max_top, |trace|)` of the ranking.
pub fn performance_curve(
    d: &Dataset,
    trace: &SelectionTrace,
    metric: Metric,
    cfg: &EvalConfig,
) -> Result<EvaluationCurve> {
    curve_for_ranking(d, &trace.features(), metric, cfg)
}

/// As [`performance_curve`], for a bare ranked list of feature indices.
pub fn curve_for_ranking(d: &Dataset, ranking: &[usize], metric: Metric, cfg: &EvalConfig) -> Result<EvaluationCurve> {
    cfg.validate()?;
    if ranking.is_empty() {
        return Err(Error::InvalidArgument("empty ranking".into()));
    }
    let full = FeatureSubset::new(ranking.to_vec(), d.m())?;
    let len = cfg.max_top.min(ranking.len());
    match metric {
        Metric::Knn => {
            let folds = stratified_folds(d, cfg.folds, cfg.seed)?;
            let outcomes = (1..=len)
                .into_par_iter()
                .map(|t| knn_cross_validate(d, &full.prefix(t), &folds, cfg.knn_k))
                .collect::<Result<Vec<_>>>()?;
            let mut curve =
                EvaluationCurve::from_values(metric, outcomes.iter().map(|o| o.accuracy).collect());
            curve.fold_std = outcomes.iter().map(KnnOutcome::fold_std).collect();
            Ok(curve)
        }
        Metric::Nmi => {
            let values = (1..=len)
                .into_par_iter()
                .map(|t| {
                    let clusters = kmeans_deterministic(d, &full.prefix(t), d.p(), cfg)?;
                    nmi(d.labels(), &clusters)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(EvaluationCurve::from_values(metric, values))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clusters_1d() -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..6 {
            rows.push(vec![0.1 * i as f64]);
            labels.push("A");
            rows.push(vec![10.0 + 0.1 * i as f64]);
            labels.push("B");
        }
        Dataset::from_rows(&rows, &labels).unwrap()
    }

    fn all(d: &Dataset) -> FeatureSubset {
        FeatureSubset::new((0..d.m()).collect(), d.m()).unwrap()
    }

    #[test]
    fn knn_separated_clusters() {
        let d = clusters_1d();
        let folds = stratified_folds(&d, 2, 3).unwrap();
        assert_eq!(knn_accuracy(&d, &all(&d), &folds, 5).unwrap(), 1.0);
    }

    #[test]
    fn knn_single_dominant_class() {
        // every test point sees only class A among its 5 neighbours
        let mut rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.01]).collect();
        rows.push(vec![100.0]);
        rows.push(vec![100.5]);
        let mut labels = vec!["A"; 20];
        labels.extend(["B", "B"]);
        let d = Dataset::from_rows(&rows, &labels).unwrap();
        let folds = stratified_folds(&d, 2, 0).unwrap();
        let out = knn_cross_validate(&d, &all(&d), &folds, 5).unwrap();
        // the two B points are outvoted by A
        assert!((out.accuracy - 20.0 / 22.0).abs() < 1e-15);
    }

    #[test]
    fn knn_reduces_k_on_small_folds() {
        let d = Dataset::from_rows(&[vec![0.0], vec![0.1], vec![5.0], vec![5.1]], &["a", "a", "b", "b"]).unwrap();
        let folds = stratified_folds(&d, 2, 0).unwrap();
        let out = knn_cross_validate(&d, &all(&d), &folds, 5).unwrap();
        assert_eq!(out.reduced_folds, vec![0, 1]);
        assert_eq!(out.fold_accuracies.len(), 2);
    }

    #[test]
    fn knn_vote_tie_goes_to_nearest_neighbour() {
        // test point 0 (class b) with k = 2: neighbours 1 (b, closest) and 2 (a)
        let d = Dataset::from_rows(
            &[vec![0.0], vec![0.5], vec![-0.7], vec![9.0]],
            &["b", "b", "a", "a"],
        )
        .unwrap();
        let folds = FoldAssignment {
            fold_of: vec![0, 1, 1, 1],
            folds: 2,
            seed: 0,
        };
        let out = knn_cross_validate(&d, &all(&d), &folds, 2).unwrap();
        assert_eq!(out.fold_accuracies[0], 1.0);
    }

    #[test]
    fn seeds_follow_the_formula() {
        let yale = kmeans_seeds(165, 15).unwrap();
        assert_eq!(yale, (0..15).map(|c| 6 + 11 * c).collect::<Vec<_>>());
        assert_eq!(*yale.last().unwrap(), 160);
        let orl = kmeans_seeds(400, 40).unwrap();
        assert_eq!(orl, (0..40).map(|c| 5 + 10 * c).collect::<Vec<_>>());
        assert_eq!(kmeans_seeds(4, 4).unwrap(), vec![1, 2, 3, 4]);
        assert!(kmeans_seeds(3, 4).is_err());
        assert!(kmeans_seeds(3, 1).is_err());
        for n in 2..60 {
            for p in 2..=n {
                let s = kmeans_seeds(n, p).unwrap();
                assert!(s.iter().all(|&x| (1..=n).contains(&x)), "n={n} p={p}");
            }
        }
    }

    #[test]
    fn kmeans_singletons_when_n_equals_p() {
        let d = Dataset::from_rows(&[vec![0.0], vec![3.0], vec![7.0]], &["a", "b", "c"]).unwrap();
        let r = kmeans_run(&d, &all(&d), 3, &EvalConfig::default()).unwrap();
        assert_eq!(r.assignments, vec![0, 1, 2]);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn kmeans_recovers_separated_clusters() {
        let d = clusters_1d();
        let clusters = kmeans_deterministic(&d, &all(&d), 2, &EvalConfig::default()).unwrap();
        assert_eq!(nmi(d.labels(), &clusters).unwrap(), 1.0);
        let r = kmeans_run(&d, &all(&d), 2, &EvalConfig::default()).unwrap();
        assert!(r.objective.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn kmeans_reseeds_empty_cluster() {
        // both seeds (rows 1 and 5) coincide, so cluster 1 starts empty
        let rows = vec![vec![0.0], vec![5.0], vec![5.2], vec![4.8], vec![0.0]];
        let d = Dataset::from_rows(&rows, &["a", "b", "b", "b", "a"]).unwrap();
        let r = kmeans_run(&d, &all(&d), 2, &EvalConfig::default()).unwrap();
        assert_eq!(r.assignments[0], r.assignments[4]);
        assert_ne!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.assignments[1], r.assignments[2]);
        assert_eq!(r.assignments[1], r.assignments[3]);
    }

    #[test]
    fn nmi_examples() {
        assert_eq!(nmi(&[0, 0, 1, 1], &[5, 5, 2, 2]).unwrap(), 1.0);
        assert!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap().abs() < 1e-15);
        let v = nmi(&[0, 0, 1, 1], &[0, 0, 0, 1]).unwrap();
        assert!((v - 0.3437110184854508).abs() < 1e-12, "{v}");
        assert_eq!(nmi(&[3, 3], &[1, 1]).unwrap(), 1.0);
        assert!(nmi(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn curve_summaries() {
        let c = EvaluationCurve::from_values(Metric::Knn, vec![0.5, 0.7, 0.6]);
        assert_eq!(c.max_value, 0.7);
        assert!((c.ave_value - 0.6).abs() < 1e-15);
        let c = EvaluationCurve::from_values(Metric::Nmi, vec![0.25; 4]);
        assert_eq!((c.max_value, c.ave_value), (0.25, 0.25));
    }

    #[test]
    fn curve_length_is_capped() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..12 {
            let x = i as f64;
            rows.push(vec![x % 2.0, (x * 0.3).sin(), (x * 0.7).cos(), x]);
            labels.push(if i % 2 == 0 { "a" } else { "b" });
        }
        let d = Dataset::from_rows(&rows, &labels).unwrap();
        let cfg = EvalConfig {
            folds: 3,
            max_top: 2,
            ..Default::default()
        };
        let c = curve_for_ranking(&d, &[0, 1, 2], Metric::Knn, &cfg).unwrap();
        assert_eq!(c.values.len(), 2);
        assert_eq!(c.fold_std.len(), 2);
        assert_eq!(c.values[0], 1.0);
        let c = curve_for_ranking(&d, &[0, 3], Metric::Nmi, &cfg).unwrap();
        assert_eq!(c.values[0], 1.0);
        assert!(c.max_value >= c.ave_value);
    }
}
