//! Forward greedy selection by separability gain.
//!
//! Squared distances and dot products are sums over features, so the state
//! for the current subset is kept as running sums and a candidate column is
//! scored by adding its own contribution:
//!
//! * `inst_sq[i][q]`: `|x_i - c_q|^2`
//! * `inst_dot[i][q]`: `(c_own(i) - x_i) . (c_q - x_i)`
//! * `cent_dot[q][a][b]`: `(c_a - c_q) . (c_b - c_q)`
//!
//! Class means are computed once per column. Scoring a candidate costs
//! `O(n p^2 + p^2)` regardless of how many features are already selected.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassPartition, Dataset};
use crate::error::{Error, Result};
use crate::separability::{
    cosine_from_products, fuzzy_memberships_into, separability, FeatureSubset, SeparabilityParams,
    SeparabilityScore,
};

/// Gains closer than this are treated as equal; the smaller index wins.
pub const GAIN_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub feature: usize,
    pub gain: f64,
    pub score_after: SeparabilityScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub steps: Vec<SelectionStep>,
    pub params: SeparabilityParams,
    pub k: usize,
}

impl SelectionTrace {
    /// Selected features in selection order.
    pub fn features(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.feature).collect()
    }

    pub fn subset(&self) -> FeatureSubset {
        FeatureSubset(self.features())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// `Sep(subset + candidate) - Sep(subset)`, computed from scratch.
pub fn gain(
    d: &Dataset,
    part: &ClassPartition,
    subset: &FeatureSubset,
    candidate: usize,
    params: &SeparabilityParams,
) -> Result<f64> {
    let extended = subset.with(candidate, d.m())?;
    Ok(separability(d, part, &extended, params).sep - separability(d, part, subset, params).sep)
}

/// Runs the greedy selector on the current rayon pool.
pub fn select(
    d: &Dataset,
    part: &ClassPartition,
    k: usize,
    params: &SeparabilityParams,
) -> Result<SelectionTrace> {
    validate(d, part, k, params)?;
    let mut state = GreedyState::new(d, part, *params);
    let mut steps = Vec::with_capacity(k);
    while steps.len() < k {
        steps.push(state.step());
    }
    Ok(SelectionTrace {
        steps,
        params: *params,
        k,
    })
}

/// Same as [`select`] on a dedicated pool of `workers` threads.
pub fn select_with_workers(
    d: &Dataset,
    part: &ClassPartition,
    k: usize,
    params: &SeparabilityParams,
    workers: usize,
) -> Result<SelectionTrace> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
    pool.install(|| select(d, part, k, params))
}

fn validate(d: &Dataset, part: &ClassPartition, k: usize, params: &SeparabilityParams) -> Result<()> {
    if k < 1 || k > d.m() {
        return Err(Error::InvalidK { k, m: d.m() });
    }
    if part.n() != d.n() || part.p() < 2 {
        return Err(Error::InvalidArgument(
            "class partition does not match the dataset".into(),
        ));
    }
    params.validate()
}

struct GreedyState<'a> {
    d: &'a Dataset,
    params: SeparabilityParams,
    n: usize,
    p: usize,
    class_of: Vec<usize>,
    /// `class_means[j * p + q]`: mean of column `j` over class `q`.
    class_means: Vec<f64>,
    selected: Vec<bool>,
    inst_sq: Vec<f64>,
    inst_dot: Vec<f64>,
    cent_dot: Vec<f64>,
    current: SeparabilityScore,
    empty: bool,
}

/// Per-thread buffers for scoring one candidate.
#[derive(Default)]
struct Scratch {
    sq: Vec<f64>,
    mu: Vec<f64>,
    cent_sq: Vec<f64>,
    others: Vec<usize>,
    other_sq: Vec<f64>,
    nearest: Vec<usize>,
}

impl<'a> GreedyState<'a> {
    fn new(d: &'a Dataset, part: &ClassPartition, params: SeparabilityParams) -> Self {
        let (n, m, p) = (d.n(), d.m(), part.p());
        let class_of = part.class_of();
        let mut class_means = vec![0.0; m * p];
        for (q, members) in part.classes.iter().enumerate() {
            let count = members.len() as f64;
            for j in 0..m {
                let s: f64 = members.iter().map(|&i| d.value(i, j)).sum();
                class_means[j * p + q] = s / count;
            }
        }
        GreedyState {
            d,
            params,
            n,
            p,
            class_of,
            class_means,
            selected: vec![false; m],
            inst_sq: vec![0.0; n * p],
            inst_dot: vec![0.0; n * p],
            cent_dot: vec![0.0; p * p * p],
            current: SeparabilityScore::default(),
            empty: true,
        }
    }

    fn step(&mut self) -> SelectionStep {
        let base = self.current.sep;
        let candidates: Vec<usize> = (0..self.d.m()).filter(|&j| !self.selected[j]).collect();
        let scored: Vec<(usize, SeparabilityScore)> = candidates
            .par_iter()
            .map_init(Scratch::default, |scratch, &j| (j, self.score_with(j, scratch)))
            .collect();

        let best = scored
            .iter()
            .map(|(_, s)| s.sep - base)
            .fold(f64::NEG_INFINITY, f64::max);
        let &(feature, score) = scored
            .iter()
            .find(|(_, s)| s.sep - base > best - GAIN_TIE_TOLERANCE)
            .unwrap_or(&scored[0]);

        self.accept(feature);
        self.current = score;
        self.empty = false;
        SelectionStep {
            feature,
            gain: score.sep - base,
            score_after: score,
        }
    }

    #[inline]
    fn mean(&self, j: usize, q: usize) -> f64 {
        self.class_means[j * self.p + q]
    }

    fn accept(&mut self, j: usize) {
        let p = self.p;
        for i in 0..self.n {
            let x = self.d.value(i, j);
            let own = self.mean(j, self.class_of[i]) - x;
            for q in 0..p {
                let to_q = self.mean(j, q) - x;
                self.inst_sq[i * p + q] += (x - self.mean(j, q)) * (x - self.mean(j, q));
                self.inst_dot[i * p + q] += own * to_q;
            }
        }
        for q in 0..p {
            for a in 0..p {
                let da = self.mean(j, a) - self.mean(j, q);
                for b in 0..p {
                    let db = self.mean(j, b) - self.mean(j, q);
                    self.cent_dot[(q * p + a) * p + b] += da * db;
                }
            }
        }
        self.selected[j] = true;
    }

    /// Score of the current subset extended by column `j`.
    fn score_with(&self, j: usize, s: &mut Scratch) -> SeparabilityScore {
        let (n, p) = (self.n, self.p);
        let eps = self.params.eps_norm;

        let mut theta_dis = 0.0;
        let mut theta_dir = 0.0;
        for i in 0..n {
            let x = self.d.value(i, j);
            let own_q = self.class_of[i];
            let own = self.mean(j, own_q) - x;
            s.sq.clear();
            s.sq.extend((0..p).map(|q| {
                let diff = x - self.mean(j, q);
                self.inst_sq[i * p + q] + diff * diff
            }));
            let own_sq = s.sq[own_q];
            theta_dis += own_sq.sqrt();
            fuzzy_memberships_into(&s.sq, eps, &mut s.mu);
            for q in 0..p {
                let dot = self.inst_dot[i * p + q] + own * (self.mean(j, q) - x);
                theta_dir += s.mu[q] * (1.0 - cosine_from_products(dot, own_sq, s.sq[q], eps));
            }
        }
        theta_dis /= n as f64;
        theta_dir /= n as f64;

        // centroid geometry
        let cent_dot = |q: usize, a: usize, b: usize| -> f64 {
            let da = self.mean(j, a) - self.mean(j, q);
            let db = self.mean(j, b) - self.mean(j, q);
            self.cent_dot[(q * p + a) * p + b] + da * db
        };
        s.cent_sq.clear();
        for q in 0..p {
            for a in 0..p {
                let diff = self.mean(j, q) - self.mean(j, a);
                s.cent_sq.push(self.cent_dot[(q * p + a) * p + a] + diff * diff);
            }
        }
        s.nearest.clear();
        for q in 0..p {
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            for o in (0..p).filter(|&o| o != q) {
                let dd = s.cent_sq[q * p + o];
                if dd < best_d || best == usize::MAX {
                    best = o;
                    best_d = dd;
                }
            }
            s.nearest.push(best);
        }
        let lambda_dis = (0..p)
            .map(|q| s.cent_sq[q * p + s.nearest[q]].sqrt())
            .sum::<f64>()
            / p as f64;

        let mut lambda_dir = 0.0;
        if p >= 3 {
            for q in 0..p {
                let near = s.nearest[q];
                s.others.clear();
                s.others.extend((0..p).filter(|&o| o != near));
                s.other_sq.clear();
                s.other_sq
                    .extend(s.others.iter().map(|&o| s.cent_sq[near * p + o]));
                fuzzy_memberships_into(&s.other_sq, eps, &mut s.mu);
                let near_sq = s.cent_sq[q * p + near];
                for (&other, &w) in s.others.iter().zip(&s.mu) {
                    if other == q {
                        continue;
                    }
                    let cos = cosine_from_products(
                        cent_dot(q, near, other),
                        near_sq,
                        s.cent_sq[q * p + other],
                        eps,
                    );
                    lambda_dir += w * (1.0 - cos);
                }
            }
            lambda_dir /= p as f64;
        }

        SeparabilityScore::compose(theta_dis, theta_dir, lambda_dis, lambda_dir, &self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::partition_by_class;

    fn two_feature() -> (Dataset, ClassPartition) {
        let rows = vec![vec![0.0, 3.0], vec![2.0, 3.0], vec![10.0, 3.0], vec![12.0, 3.0]];
        let d = Dataset::from_rows(&rows, &["A", "A", "B", "B"]).unwrap();
        let part = partition_by_class(&d);
        (d, part)
    }

    #[test]
    fn gain_from_empty_is_singleton_score() {
        let (d, part) = two_feature();
        let params = SeparabilityParams::default();
        let g = gain(&d, &part, &FeatureSubset::empty(), 0, &params).unwrap();
        assert!((g - 820.0 / 83.0).abs() < 1e-12);
        let single = FeatureSubset::new(vec![1], 2).unwrap();
        assert_eq!(
            gain(&d, &part, &FeatureSubset::empty(), 1, &params).unwrap(),
            separability(&d, &part, &single, &params).sep
        );
    }

    #[test]
    fn gain_errors() {
        let (d, part) = two_feature();
        let params = SeparabilityParams::default();
        let s = FeatureSubset::new(vec![0], 2).unwrap();
        assert!(matches!(gain(&d, &part, &s, 0, &params), Err(Error::AlreadySelected(0))));
        assert!(matches!(
            gain(&d, &part, &s, 5, &params),
            Err(Error::FeatureOutOfRange { index: 5, m: 2 })
        ));
    }

    #[test]
    fn picks_the_informative_feature_first() {
        let (d, part) = two_feature();
        let trace = select(&d, &part, 2, &SeparabilityParams::default()).unwrap();
        assert_eq!(trace.features(), vec![0, 1]);
        assert!((trace.steps[0].gain - 820.0 / 83.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_gain_is_not_special_cased() {
        let rows = vec![vec![0.0, 0.0], vec![2.0, 2.0], vec![10.0, 10.0], vec![12.0, 12.0]];
        let d = Dataset::from_rows(&rows, &["A", "A", "B", "B"]).unwrap();
        let part = partition_by_class(&d);
        let params = SeparabilityParams::default();
        let trace = select(&d, &part, 2, &params).unwrap();
        // identical columns tie; the smaller index goes first
        assert_eq!(trace.features(), vec![0, 1]);
        let s = FeatureSubset::new(vec![0], 2).unwrap();
        let g = gain(&d, &part, &s, 1, &params).unwrap();
        assert!((trace.steps[1].gain - g).abs() < 1e-9);
    }

    #[test]
    fn k_validation() {
        let (d, part) = two_feature();
        let params = SeparabilityParams::default();
        assert!(matches!(select(&d, &part, 3, &params), Err(Error::InvalidK { k: 3, m: 2 })));
        assert!(matches!(select(&d, &part, 0, &params), Err(Error::InvalidK { .. })));
    }

    #[test]
    fn cached_scores_match_recomputation() {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let x = i as f64;
                vec![(x * 0.37).sin(), (x * 1.3).cos(), x % 3.0, (x * x) % 5.0, 0.5]
            })
            .collect();
        let labels: Vec<&str> = (0..12).map(|i| ["a", "b", "c"][i % 3]).collect();
        let d = Dataset::from_rows(&rows, &labels).unwrap();
        let part = partition_by_class(&d);
        let params = SeparabilityParams::new(0.3, 0.7, crate::separability::Variant::Full).unwrap();
        let trace = select(&d, &part, 5, &params).unwrap();
        let mut sorted = trace.features();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
        for t in 1..=5 {
            let direct = separability(&d, &part, &trace.subset().prefix(t), &params);
            let cached = trace.steps[t - 1].score_after;
            for (a, b) in [
                (direct.theta_dis, cached.theta_dis),
                (direct.theta_dir, cached.theta_dir),
                (direct.lambda_dis, cached.lambda_dis),
                (direct.lambda_dir, cached.lambda_dir),
                (direct.sep, cached.sep),
            ] {
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "t={t}: {a} vs {b}");
            }
        }
    }
}
