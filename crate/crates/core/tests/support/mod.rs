//! Test-only helpers: a literal, loop-by-loop transcription of the
//! separability criterion (no code shared with the library) and a seeded
//! random dataset generator.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sepselect::{Dataset, Variant};

pub const EPS: f64 = 1e-12;

pub struct OracleScore {
    pub theta_dis: f64,
    pub theta_dir: f64,
    pub lambda_dis: f64,
    pub lambda_dir: f64,
    pub sep: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn d_cos(u: &[f64], v: &[f64]) -> f64 {
    let (nu, nv) = (norm(u), norm(v));
    if nu < EPS || nv < EPS {
        return 1.0;
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    (dot / (nu * nv)).clamp(-1.0, 1.0)
}

/// Instance membership by the ratio form `1 / sum_{q*} (d_q' / d_q*)^2`,
/// hard-split among coincident centroids.
pub fn oracle_mu(x: &[f64], cents: &[Vec<f64>], q_prime: usize) -> f64 {
    let d: Vec<f64> = cents.iter().map(|c| norm(&sub(x, c))).collect();
    let coincident: Vec<usize> = (0..d.len()).filter(|&q| d[q] < EPS).collect();
    if !coincident.is_empty() {
        return if coincident.contains(&q_prime) {
            1.0 / coincident.len() as f64
        } else {
            0.0
        };
    }
    let mut denom = 0.0;
    for q_star in 0..cents.len() {
        denom += (d[q_prime] / d[q_star]).powi(2);
    }
    1.0 / denom
}

/// Centroid membership `1 / (1 + sum_{q* != q', q''} (d(q',q'') / d(q',q*))^2)`,
/// self entry 1, hard-split among coincident centroids.
pub fn oracle_mu_bar(cents: &[Vec<f64>], q_prime: usize, q_dprime: usize) -> f64 {
    if q_dprime == q_prime {
        return 1.0;
    }
    let p = cents.len();
    let d = |a: usize, b: usize| norm(&sub(&cents[a], &cents[b]));
    let coincident: Vec<usize> = (0..p).filter(|&o| o != q_prime && d(q_prime, o) < EPS).collect();
    if !coincident.is_empty() {
        return if coincident.contains(&q_dprime) {
            1.0 / coincident.len() as f64
        } else {
            0.0
        };
    }
    let mut denom = 1.0;
    for q_star in 0..p {
        if q_star == q_prime || q_star == q_dprime {
            continue;
        }
        denom += (d(q_prime, q_dprime) / d(q_prime, q_star)).powi(2);
    }
    1.0 / denom
}

pub fn oracle_centroids(rows: &[Vec<f64>], labels: &[usize], p: usize, subset: &[usize]) -> Vec<Vec<f64>> {
    let n = rows.len();
    (0..p)
        .map(|q| {
            // omega_iq indicator
            let omega = |i: usize| if labels[i] == q { 1.0 } else { 0.0 };
            let count: f64 = (0..n).map(omega).sum();
            subset
                .iter()
                .map(|&f| (0..n).map(|i| rows[i][f] * omega(i)).sum::<f64>() / count)
                .collect()
        })
        .collect()
}

/// Brute-force criterion on `subset` from raw rows and 0-based class labels.
pub fn oracle_separability(
    rows: &[Vec<f64>],
    labels: &[usize],
    p: usize,
    subset: &[usize],
    alpha: f64,
    beta: f64,
    variant: Variant,
) -> OracleScore {
    let n = rows.len();
    let phi_x = |i: usize| -> Vec<f64> { subset.iter().map(|&f| rows[i][f]).collect() };
    let c = oracle_centroids(rows, labels, p, subset);
    let omega = |i: usize, q: usize| if labels[i] == q { 1.0 } else { 0.0 };

    let mut theta_dis = 0.0;
    for q in 0..p {
        for i in 0..n {
            theta_dis += norm(&sub(&phi_x(i), &c[q])) * omega(i, q);
        }
    }
    theta_dis /= n as f64;

    let mut theta_dir = 0.0;
    for i in 0..n {
        let x = phi_x(i);
        for q in 0..p {
            let v_iq = sub(&c[q], &x);
            let mut inner = 0.0;
            for q_prime in 0..p {
                let v_iqp = sub(&c[q_prime], &x);
                inner += oracle_mu(&x, &c, q_prime) * (1.0 - d_cos(&v_iq, &v_iqp));
            }
            theta_dir += inner * omega(i, q);
        }
    }
    theta_dir /= n as f64;

    // phi_qq': nearest foreign class, smallest index on ties
    let dist = |a: usize, b: usize| norm(&sub(&c[a], &c[b]));
    let nearest: Vec<usize> = (0..p)
        .map(|q| {
            let mut best = if q == 0 { 1 } else { 0 };
            for o in 0..p {
                if o != q && dist(q, o) < dist(q, best) {
                    best = o;
                }
            }
            best
        })
        .collect();
    let phi = |q: usize, qp: usize| if nearest[q] == qp { 1.0 } else { 0.0 };
    let tau = |q: usize, qpp: usize| if qpp == q || qpp == nearest[q] { 1.0 } else { 0.0 };

    let mut lambda_dis = 0.0;
    for q in 0..p {
        for qp in 0..p {
            lambda_dis += dist(q, qp) * phi(q, qp);
        }
    }
    lambda_dis /= p as f64;

    let mut lambda_dir = 0.0;
    for q in 0..p {
        let mut outer = 0.0;
        for qpp in 0..p {
            let mut inner = 0.0;
            for qp in 0..p {
                if phi(q, qp) == 0.0 {
                    continue;
                }
                let v_qqp = sub(&c[qp], &c[q]);
                let v_qqpp = sub(&c[qpp], &c[q]);
                inner += oracle_mu_bar(&c, qp, qpp) * (1.0 - d_cos(&v_qqp, &v_qqpp)) * phi(q, qp);
            }
            outer += inner * (1.0 - tau(q, qpp));
        }
        lambda_dir += outer;
    }
    lambda_dir /= p as f64;

    let (num, den) = match variant {
        Variant::Full => (lambda_dis + beta * lambda_dir, theta_dis + alpha * theta_dir),
        Variant::NoDirWithin => (lambda_dis + beta * lambda_dir, theta_dis),
        Variant::NoDirBetween => (lambda_dis, theta_dis + alpha * theta_dir),
        Variant::DistanceOnly => (lambda_dis, theta_dis),
    };
    OracleScore {
        theta_dis,
        theta_dir,
        lambda_dis,
        lambda_dir,
        sep: num / den.max(EPS),
    }
}

/// A random labeled table with values in [0, 1).
pub struct RandomCase {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub p: usize,
    pub dataset: Dataset,
}

/// `n` in `p..=max_n`, `m` in `1..=max_m`, `p` in `2..=4`; every class
/// non-empty. Class `q` is labelled `c{q}` so label order equals class index.
pub fn random_case(seed: u64, max_n: usize, max_m: usize) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.gen_range(2..=4);
    let n = rng.gen_range(p.max(4)..=max_n);
    let m = rng.gen_range(1..=max_m);
    let mut labels: Vec<usize> = (0..n).map(|i| if i < p { i } else { rng.gen_range(0..p) }).collect();
    // shuffle so class heads are not always the first rows
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        labels.swap(i, j);
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.gen::<f64>()).collect()).collect();
    let names: Vec<String> = labels.iter().map(|q| format!("c{q}")).collect();
    let dataset = Dataset::from_rows(&rows, &names).unwrap();
    RandomCase {
        rows,
        labels,
        p,
        dataset,
    }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
