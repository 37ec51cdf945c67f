//! Spatially-aware separability of a feature subset.
//!
//! The criterion is a ratio of between-class separation to within-class
//! compactness. Each side mixes a distance term with a directional term:
//!
//! * `theta_dis`: mean distance of every instance to its own class centroid.
//! * `theta_dir`: membership-weighted `1 - cos` between the vector from an
//!   instance to its own centroid and the vectors to the other centroids.
//! * `lambda_dis`: mean distance from each centroid to its nearest foreign
//!   centroid.
//! * `lambda_dir`: for each class `q` with nearest class `q'`, the
//!   membership-weighted `1 - cos` between `c_q -> c_q'` and `c_q -> c_q''`
//!   over the remaining classes `q''`.
//!
//! `sep = (lambda_dis + beta * lambda_dir) / (theta_dis + alpha * theta_dir)`
//! for [`Variant::Full`]; the other variants drop one or both directional
//! terms.
//!
//! Everything here is computed from scratch on the requested subset. The
//! greedy selector keeps running sums instead (see `selector`), and its trace
//! is checked against this module.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{ClassPartition, Dataset};
use crate::error::{Error, Result};

pub const DEFAULT_EPS_NORM: f64 = 1e-12;
pub const DEFAULT_EPS_DIV: f64 = 1e-12;

/// Which terms enter the criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Distance and direction on both sides.
    Full,
    /// Compactness is distance only.
    NoDirWithin,
    /// Separation is distance only.
    NoDirBetween,
    /// Both sides distance only.
    DistanceOnly,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::NoDirWithin,
        Variant::NoDirBetween,
        Variant::DistanceOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoDirWithin => "no-dir-within",
            Variant::NoDirBetween => "no-dir-between",
            Variant::DistanceOnly => "distance-only",
        }
    }

    fn uses_within_direction(self) -> bool {
        matches!(self, Variant::Full | Variant::NoDirBetween)
    }

    fn uses_between_direction(self) -> bool {
        matches!(self, Variant::Full | Variant::NoDirWithin)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityParams {
    /// Weight of the directional compactness term.
    pub alpha: f64,
    /// Weight of the directional separation term.
    pub beta: f64,
    pub variant: Variant,
    /// Vectors shorter than this count as zero (cosine 1, hard memberships).
    pub eps_norm: f64,
    /// Floor for the criterion denominator.
    pub eps_div: f64,
}

impl Default for SeparabilityParams {
    fn default() -> Self {
        SeparabilityParams {
            alpha: 1.0,
            beta: 1.0,
            variant: Variant::Full,
            eps_norm: DEFAULT_EPS_NORM,
            eps_div: DEFAULT_EPS_DIV,
        }
    }
}

impl SeparabilityParams {
    pub fn new(alpha: f64, beta: f64, variant: Variant) -> Result<Self> {
        let params = SeparabilityParams {
            alpha,
            beta,
            variant,
            ..Default::default()
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.eps_norm > 0.0) || !(self.eps_div > 0.0) {
            return Err(Error::InvalidArgument("eps_norm and eps_div must be > 0".into()));
        }
        Ok(())
    }
}

/// Ordered set of distinct feature indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSubset(pub(crate) Vec<usize>);

impl FeatureSubset {
    pub fn new(indices: Vec<usize>, m: usize) -> Result<Self> {
        for (pos, &j) in indices.iter().enumerate() {
            if j >= m {
                return Err(Error::FeatureOutOfRange { index: j, m });
            }
            if indices[..pos].contains(&j) {
                return Err(Error::AlreadySelected(j));
            }
        }
        Ok(FeatureSubset(indices))
    }

    pub fn empty() -> Self {
        FeatureSubset(Vec::new())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.contains(&j)
    }

    /// First `t` features, in order.
    pub fn prefix(&self, t: usize) -> FeatureSubset {
        FeatureSubset(self.0[..t.min(self.0.len())].to_vec())
    }

    /// The subset extended by `candidate`.
    pub fn with(&self, candidate: usize, m: usize) -> Result<FeatureSubset> {
        if candidate >= m {
            return Err(Error::FeatureOutOfRange { index: candidate, m });
        }
        if self.contains(candidate) {
            return Err(Error::AlreadySelected(candidate));
        }
        let mut v = self.0.clone();
        v.push(candidate);
        Ok(FeatureSubset(v))
    }

    /// Restriction of row `i` to this subset.
    pub fn project(&self, d: &Dataset, i: usize) -> Vec<f64> {
        let row = d.row(i);
        self.0.iter().map(|&j| row[j]).collect()
    }
}

/// Per-class mean vectors on a feature subset.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    pub points: Vec<Vec<f64>>,
    pub subset: FeatureSubset,
}

impl Centroids {
    pub fn p(&self) -> usize {
        self.points.len()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityScore {
    pub theta_dis: f64,
    pub theta_dir: f64,
    pub lambda_dis: f64,
    pub lambda_dir: f64,
    pub sep: f64,
}

impl SeparabilityScore {
    /// Combines the four components into `sep` according to `params.variant`.
    pub fn compose(
        theta_dis: f64,
        theta_dir: f64,
        lambda_dis: f64,
        lambda_dir: f64,
        params: &SeparabilityParams,
    ) -> Self {
        let within = if params.variant.uses_within_direction() {
            theta_dis + params.alpha * theta_dir
        } else {
            theta_dis
        };
        let between = if params.variant.uses_between_direction() {
            lambda_dis + params.beta * lambda_dir
        } else {
            lambda_dis
        };
        SeparabilityScore {
            theta_dis,
            theta_dir,
            lambda_dis,
            lambda_dir,
            sep: between / within.max(params.eps_div),
        }
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

fn diff(to: &[f64], from: &[f64]) -> Vec<f64> {
    to.iter().zip(from).map(|(t, f)| t - f).collect()
}

/// Cosine of the angle between `u` and `v`, clamped to `[-1, 1]`.
///
/// Returns 1 when either vector is shorter than `eps_norm`, so `1 - cos`
/// contributes nothing for degenerate vectors.
pub fn cosine(u: &[f64], v: &[f64], eps_norm: f64) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let uu: f64 = u.iter().map(|x| x * x).sum();
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let uv: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok(cosine_from_products(uv, uu, vv, eps_norm))
}

/// Cosine from a dot product and two squared norms.
#[inline]
pub(crate) fn cosine_from_products(uv: f64, uu: f64, vv: f64, eps_norm: f64) -> f64 {
    let (nu, nv) = (uu.sqrt(), vv.sqrt());
    if nu < eps_norm || nv < eps_norm {
        return 1.0;
    }
    (uv / (nu * nv)).clamp(-1.0, 1.0)
}

/// Fuzzy c-means style memberships from squared distances to a set of
/// prototypes: `mu_a = 1 / sum_b (d_a / d_b)^2`.
///
/// If any prototype is closer than `eps_norm`, the membership is split
/// equally among the coincident prototypes and is 0 elsewhere.
pub(crate) fn fuzzy_memberships(sq_dists: &[f64], eps_norm: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(sq_dists.len());
    fuzzy_memberships_into(sq_dists, eps_norm, &mut out);
    out
}

pub(crate) fn fuzzy_memberships_into(sq_dists: &[f64], eps_norm: f64, out: &mut Vec<f64>) {
    out.clear();
    let coincident = sq_dists.iter().filter(|s| s.sqrt() < eps_norm).count();
    if coincident > 0 {
        let share = 1.0 / coincident as f64;
        out.extend(
            sq_dists
                .iter()
                .map(|s| if s.sqrt() < eps_norm { share } else { 0.0 }),
        );
        return;
    }
    let inv_total: f64 = sq_dists.iter().map(|s| 1.0 / s).sum();
    out.extend(sq_dists.iter().map(|s| (1.0 / s) / inv_total));
}

pub fn class_centroids(d: &Dataset, part: &ClassPartition, subset: &FeatureSubset) -> Result<Centroids> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("centroids need a non-empty subset".into()));
    }
    let points = part
        .classes
        .iter()
        .map(|members| {
            let mut sum = vec![0.0; subset.len()];
            for &i in members {
                let row = d.row(i);
                for (s, &j) in sum.iter_mut().zip(subset.indices()) {
                    *s += row[j];
                }
            }
            let count = members.len() as f64;
            sum.into_iter().map(|s| s / count).collect()
        })
        .collect();
    Ok(Centroids {
        points,
        subset: subset.clone(),
    })
}

/// Membership of instance `i` in every class, driven by its distances to the
/// class centroids. Components sum to 1.
pub fn instance_memberships(d: &Dataset, cents: &Centroids, i: usize, eps_norm: f64) -> Vec<f64> {
    let x = cents.subset.project(d, i);
    let sq: Vec<f64> = cents.points.iter().map(|c| sq_dist(&x, c)).collect();
    fuzzy_memberships(&sq, eps_norm)
}

pub fn within_compactness_distance(d: &Dataset, part: &ClassPartition, cents: &Centroids) -> f64 {
    let total: f64 = part
        .classes
        .iter()
        .zip(&cents.points)
        .flat_map(|(members, c)| members.iter().map(move |&i| (i, c)))
        .map(|(i, c)| dist(&cents.subset.project(d, i), c))
        .sum();
    total / d.n() as f64
}

pub fn within_compactness_direction(
    d: &Dataset,
    part: &ClassPartition,
    cents: &Centroids,
    eps_norm: f64,
) -> f64 {
    let mut total = 0.0;
    for (q, members) in part.classes.iter().enumerate() {
        for &i in members {
            let x = cents.subset.project(d, i);
            let to_own = diff(&cents.points[q], &x);
            let sq: Vec<f64> = cents.points.iter().map(|c| sq_dist(&x, c)).collect();
            let mu = fuzzy_memberships(&sq, eps_norm);
            // q' = q is included; its term is 1 - cos(v, v) = 0.
            for (c, w) in cents.points.iter().zip(&mu) {
                let to_other = diff(c, &x);
                let cos = cosine(&to_own, &to_other, eps_norm).expect("same dimension");
                total += w * (1.0 - cos);
            }
        }
    }
    total / d.n() as f64
}

/// Index of the closest other centroid for each class; ties go to the
/// smaller index.
pub fn nearest_class(cents: &Centroids) -> Vec<usize> {
    let p = cents.p();
    (0..p)
        .map(|q| {
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            for o in (0..p).filter(|&o| o != q) {
                let dd = sq_dist(&cents.points[q], &cents.points[o]);
                if dd < best_d || best == usize::MAX {
                    best = o;
                    best_d = dd;
                }
            }
            best
        })
        .collect()
}

pub fn between_separation_distance(cents: &Centroids) -> f64 {
    let nearest = nearest_class(cents);
    let total: f64 = nearest
        .iter()
        .enumerate()
        .map(|(q, &o)| dist(&cents.points[q], &cents.points[o]))
        .sum();
    total / cents.p() as f64
}

/// Memberships of centroid `anchor` in every class.
///
/// The anchor's own entry is fixed to 1; the remaining entries are fuzzy
/// memberships over the other centroids only, so they sum to 1 among
/// themselves.
pub fn centroid_memberships(cents: &Centroids, anchor: usize, eps_norm: f64) -> Vec<f64> {
    let others: Vec<usize> = (0..cents.p()).filter(|&o| o != anchor).collect();
    let sq: Vec<f64> = others
        .iter()
        .map(|&o| sq_dist(&cents.points[anchor], &cents.points[o]))
        .collect();
    let mu = fuzzy_memberships(&sq, eps_norm);
    let mut out = vec![1.0; cents.p()];
    for (&o, w) in others.iter().zip(mu) {
        out[o] = w;
    }
    out
}

pub fn between_separation_direction(cents: &Centroids, eps_norm: f64) -> f64 {
    let p = cents.p();
    if p < 3 {
        return 0.0;
    }
    let nearest = nearest_class(cents);
    let mut total = 0.0;
    for q in 0..p {
        let near = nearest[q];
        let mu = centroid_memberships(cents, near, eps_norm);
        let to_near = diff(&cents.points[near], &cents.points[q]);
        for other in (0..p).filter(|&o| o != q && o != near) {
            let to_other = diff(&cents.points[other], &cents.points[q]);
            let cos = cosine(&to_near, &to_other, eps_norm).expect("same dimension");
            total += mu[other] * (1.0 - cos);
        }
    }
    total / p as f64
}

/// The criterion on `subset`. The empty subset scores all zeros.
pub fn separability(
    d: &Dataset,
    part: &ClassPartition,
    subset: &FeatureSubset,
    params: &SeparabilityParams,
) -> SeparabilityScore {
    if subset.is_empty() {
        return SeparabilityScore::default();
    }
    let cents = class_centroids(d, part, subset).expect("non-empty subset");
    SeparabilityScore::compose(
        within_compactness_distance(d, part, &cents),
        within_compactness_direction(d, part, &cents, params.eps_norm),
        between_separation_distance(&cents),
        between_separation_direction(&cents, params.eps_norm),
        params,
    )
}
