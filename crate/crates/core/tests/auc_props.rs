mod common;

use lunar::auc;
use lunar::evaluation::run_benchmark;
use lunar::evaluation::{toy_dataset, BenchConfig};
use lunar::DetectorKind;
use proptest::prelude::*;

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2usize..=200).prop_flat_map(|n| {
        (
            prop::collection::vec(prop_oneof![(0i32..10).prop_map(f64::from), -1.0f64..1.0], n),
            prop::collection::vec(0u8..2, n).prop_filter("both classes", |l| l.contains(&0) && l.contains(&1)),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rank_auc_equals_pair_count((s, l) in scored()) {
        prop_assert_eq!(auc(&s, &l).unwrap(), common::auc_pairs(&s, &l));
    }

    #[test]
    fn monotone_transforms_keep_auc((s, l) in scored()) {
        let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() + 7.0).collect();
        prop_assert_eq!(auc(&s, &l).unwrap(), auc(&t, &l).unwrap());
    }

    #[test]
    fn permutations_keep_auc((s, l) in scored(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.shuffle(&mut lunar::rng::stream(seed, 0));
        let ps: Vec<f64> = order.iter().map(|&i| s[i]).collect();
        let pl: Vec<u8> = order.iter().map(|&i| l[i]).collect();
        prop_assert_eq!(auc(&s, &l).unwrap(), auc(&ps, &pl).unwrap());
    }
}

#[test]
fn test_auc_ignores_row_order() {
    let data = toy_dataset(4);
    let parts = lunar::split(&data, 1).unwrap();
    let norm = lunar::Normalizer::fit(&parts.train).unwrap();
    let train = norm.apply_matrix(parts.train.features()).unwrap();
    let test = norm.apply_matrix(parts.test.features()).unwrap();
    let labels = parts.test.labels().unwrap();
    for det in [lunar::ClassicDetector::Knn, lunar::ClassicDetector::Lof] {
        let fitted = lunar::FittedDetector::fit(det, train.clone(), 5).unwrap();
        let s = fitted.score(test.view()).unwrap();
        let rev: Vec<usize> = (0..test.nrows()).rev().collect();
        let s_rev = fitted.score(test.select(ndarray::Axis(0), &rev).view()).unwrap();
        let l_rev: Vec<u8> = rev.iter().map(|&i| labels[i]).collect();
        assert_eq!(auc(&s, labels).unwrap(), auc(&s_rev, &l_rev).unwrap());
    }
}

#[test]
fn benchmark_cells_have_valid_aucs() {
    let r = run_benchmark(&toy_dataset(2), &[DetectorKind::Knn, DetectorKind::Inflo], &[3, 7], &[1, 2], &BenchConfig::default()).unwrap();
    assert_eq!(r.cells.len(), 8);
    for c in &r.cells {
        let a = c.outcome.clone().unwrap();
        assert!((0.0..=1.0).contains(&a));
    }
    for a in r.aggregates() {
        assert_eq!(a.count, 2);
    }
}
