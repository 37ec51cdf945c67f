mod support;

use proptest::prelude::*;
use sepselect::evaluation::kmeans_run;
use sepselect::separability::{centroid_memberships, class_centroids, instance_memberships};
use sepselect::{
    kmeans_seeds, knn_accuracy, minmax_normalize, nemenyi_cd, nmi, partition_by_class, rank_rows, select,
    separability, stratified_folds, Dataset, EvalConfig, FeatureSubset, SeparabilityParams, Variant,
};
use support::{close, oracle_separability, random_case, EPS};

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![
        Just(Variant::Full),
        Just(Variant::NoDirWithin),
        Just(Variant::NoDirBetween),
        Just(Variant::DistanceOnly),
    ]
}

fn all(m: usize) -> FeatureSubset {
    FeatureSubset::new((0..m).collect(), m).unwrap()
}

fn components(d: &Dataset, params: &SeparabilityParams) -> [f64; 5] {
    let s = separability(d, &partition_by_class(d), &all(d.m()), params);
    [s.theta_dis, s.theta_dir, s.lambda_dis, s.lambda_dir, s.sep]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn matches_brute_force(seed in any::<u64>(), alpha in 0.0..10.0f64, beta in 0.0..10.0f64, v in variant(), mask in any::<u16>()) {
        let case = random_case(seed, 30, 8);
        let m = case.dataset.m();
        let mut subset: Vec<usize> = (0..m).filter(|j| mask & (1 << j) != 0).collect();
        if subset.is_empty() {
            subset.push((mask as usize) % m);
        }
        let params = SeparabilityParams::new(alpha, beta, v).unwrap();
        let got = separability(&case.dataset, &partition_by_class(&case.dataset), &FeatureSubset::new(subset.clone(), m).unwrap(), &params);
        let want = oracle_separability(&case.rows, &case.labels, case.p, &subset, alpha, beta, v);
        prop_assert!(close(got.theta_dis, want.theta_dis, 1e-9));
        prop_assert!(close(got.theta_dir, want.theta_dir, 1e-9));
        prop_assert!(close(got.lambda_dis, want.lambda_dis, 1e-9));
        prop_assert!(close(got.lambda_dir, want.lambda_dir, 1e-9));
        prop_assert!(close(got.sep, want.sep, 1e-9), "{} vs {}", got.sep, want.sep);
    }

    #[test]
    fn memberships_are_distributions(seed in any::<u64>()) {
        let case = random_case(seed, 30, 8);
        let d = &case.dataset;
        let cents = class_centroids(d, &partition_by_class(d), &all(d.m())).unwrap();
        for i in 0..d.n() {
            let mu = instance_memberships(d, &cents, i, EPS);
            prop_assert!(mu.iter().all(|&w| (0.0..=1.0).contains(&w)));
            prop_assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for a in 0..cents.p() {
            let mu = centroid_memberships(&cents, a, EPS);
            prop_assert_eq!(mu[a], 1.0);
            let s: f64 = (0..cents.p()).filter(|&q| q != a).map(|q| mu[q]).sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn components_are_non_negative(seed in any::<u64>(), alpha in 0.0..10.0f64, beta in 0.0..10.0f64) {
        let case = random_case(seed, 30, 8);
        let c = components(&case.dataset, &SeparabilityParams::new(alpha, beta, Variant::Full).unwrap());
        prop_assert!(c.iter().all(|&x| x >= 0.0 && x.is_finite()), "{:?}", c);
    }

    #[test]
    fn translation_and_scale(seed in any::<u64>(), shift in -5.0..5.0f64, scale in 0.1..10.0f64) {
        let case = random_case(seed, 30, 8);
        let d = &case.dataset;
        let params = SeparabilityParams::default();
        let base = components(d, &params);
        let moved = components(&d.affine(&vec![shift; d.m()], 1.0).unwrap(), &params);
        for (a, b) in base.iter().zip(&moved) {
            prop_assert!(close(*a, *b, 1e-8), "{:?} vs {:?}", base, moved);
        }
        let scaled = components(&d.affine(&vec![0.0; d.m()], scale).unwrap(), &params);
        // distances scale, directions do not
        prop_assert!(close(scaled[0], scale * base[0], 1e-9));
        prop_assert!(close(scaled[1], base[1], 1e-8));
        prop_assert!(close(scaled[2], scale * base[2], 1e-9));
        prop_assert!(close(scaled[3], base[3], 1e-8));
    }

    #[test]
    fn row_and_column_order_do_not_matter(seed in any::<u64>(), rot in 0usize..30) {
        let case = random_case(seed, 30, 8);
        let n = case.rows.len();
        let m = case.dataset.m();
        let order: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let rows: Vec<Vec<f64>> = order.iter().map(|&i| case.rows[i].iter().rev().copied().collect()).collect();
        let labels: Vec<String> = order.iter().map(|&i| format!("c{}", case.labels[i])).collect();
        let permuted = Dataset::from_rows(&rows, &labels).unwrap();
        let params = SeparabilityParams::default();
        let a = components(&case.dataset, &params);
        let b = components(&permuted, &params);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(close(*x, *y, 1e-9), "{:?} vs {:?}", a, b);
        }
        // class names only fix the order of classes, not the score
        let renamed: Vec<String> = order.iter().map(|&i| format!("z{}", 9 - case.labels[i])).collect();
        let c = components(&Dataset::from_rows(&rows, &renamed).unwrap(), &params);
        for (x, y) in a.iter().zip(&c) {
            prop_assert!(close(*x, *y, 1e-9));
        }
        prop_assert_eq!(m, permuted.m());
    }

    #[test]
    fn normalization_is_idempotent(seed in any::<u64>(), shift in -3.0..3.0f64, scale in 0.5..20.0f64) {
        let case = random_case(seed, 30, 8);
        let d = case.dataset.affine(&vec![shift; case.dataset.m()], scale).unwrap();
        let once = minmax_normalize(&d);
        prop_assert!(once.features().iter().all(|&x| (0.0..=1.0).contains(&x)));
        let twice = minmax_normalize(&once);
        for (a, b) in once.features().iter().zip(twice.features()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn folds_are_stratified(seed in any::<u64>(), fold_seed in any::<u64>(), folds in 2usize..6) {
        let case = random_case(seed, 30, 3);
        let d = &case.dataset;
        let folds = folds.min(d.n());
        let f = stratified_folds(d, folds, fold_seed).unwrap();
        prop_assert!(f.fold_of.iter().all(|&k| k < folds));
        let part = partition_by_class(d);
        for members in &part.classes {
            let counts: Vec<usize> = (0..folds).map(|k| members.iter().filter(|&&i| f.fold_of[i] == k).count()).collect();
            prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
        prop_assert_eq!(&f, &stratified_folds(d, folds, fold_seed).unwrap());
    }

    #[test]
    fn greedy_prefix_property(seed in any::<u64>(), k in 1usize..8) {
        let case = random_case(seed, 24, 8);
        let d = &case.dataset;
        let part = partition_by_class(d);
        let params = SeparabilityParams::default();
        let k = k.min(d.m());
        let short = select(d, &part, k, &params).unwrap();
        let long = select(d, &part, d.m(), &params).unwrap();
        prop_assert_eq!(short.features(), long.features()[..k].to_vec());
        let mut seen = long.features();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), d.m());
    }

    #[test]
    fn knn_accuracy_in_unit_interval(seed in any::<u64>(), knn_k in 1usize..7) {
        let case = random_case(seed, 30, 4);
        let d = &case.dataset;
        let folds = stratified_folds(d, 3, 7).unwrap();
        let acc = knn_accuracy(d, &all(d.m()), &folds, knn_k).unwrap();
        prop_assert!((0.0..=1.0).contains(&acc));
        prop_assert_eq!(acc, knn_accuracy(d, &all(d.m()), &folds, knn_k).unwrap());
    }

    #[test]
    fn kmeans_objective_never_increases(seed in any::<u64>()) {
        let case = random_case(seed, 30, 4);
        let d = &case.dataset;
        let r = kmeans_run(d, &all(d.m()), d.p(), &EvalConfig::default()).unwrap();
        prop_assert!(r.objective.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{:?}", r.objective);
        prop_assert!(r.assignments.iter().all(|&c| c < d.p()));
    }

    #[test]
    fn seeds_are_spread_inside_range(n in 2usize..500, p in 2usize..40) {
        prop_assume!(p <= n);
        let s = kmeans_seeds(n, p).unwrap();
        prop_assert_eq!(s.len(), p);
        prop_assert!(s[0] >= 1 && *s.last().unwrap() <= n);
        prop_assert!(s.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn nmi_symmetric_and_relabel_invariant(a in prop::collection::vec(0usize..4, 2..40), shift in 1usize..5) {
        let b: Vec<usize> = a.iter().enumerate().map(|(i, &x)| (x * 7 + i) % 3).collect();
        let ab = nmi(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - nmi(&b, &a).unwrap()).abs() < 1e-12);
        let relabeled: Vec<usize> = a.iter().map(|&x| (x + shift) % 4 + 10).collect();
        prop_assert!((ab - nmi(&relabeled, &b).unwrap()).abs() < 1e-12);
        prop_assert!((nmi(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ranks_ignore_monotone_transforms(rows in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 4), 2..8)) {
        let t = rank_rows(&rows, true).unwrap();
        for r in &t.ranks {
            prop_assert!((r.iter().sum::<f64>() - 10.0).abs() < 1e-12);
        }
        let warped: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| 3.0 * x.powi(3) + 1.0).collect()).collect();
        prop_assert_eq!(&t.ranks, &rank_rows(&warped, true).unwrap().ranks);
        let flipped: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| -x).collect()).collect();
        prop_assert_eq!(&t.ranks, &rank_rows(&flipped, false).unwrap().ranks);
    }

    #[test]
    fn cd_monotone(s in 2usize..12, n in 1usize..50, q in 0.5..4.0f64) {
        let cd = nemenyi_cd(s, n, q).unwrap();
        prop_assert!(nemenyi_cd(s, n + 1, q).unwrap() < cd);
        prop_assert!(nemenyi_cd(s + 1, n, q).unwrap() > cd);
    }
}
