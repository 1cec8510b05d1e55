use std::collections::BTreeSet;

use midistill::dataset::{
    inject_random_features, kfold_indices, load_csv, minmax_normalize, split_indices, Dataset, DatasetError,
    RANDOM_FEATURE_NAMES,
};
use midistill::infotheory::{discretize, mutual_information, BinningConfig, BinningStrategy, DiscreteColumn};
use midistill::synthetic;
use proptest::prelude::*;

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Dataset> {
    (2usize..=max_rows, 1usize..=max_cols).prop_flat_map(|(n, f)| {
        (
            prop::collection::vec(prop::collection::vec(-1e3f64..1e3, n), f),
            prop::collection::vec(0u8..2, n),
        )
            .prop_map(move |(cols, labels)| {
                let names = (0..f).map(|i| format!("f{i}")).collect();
                Dataset::new(names, cols, labels).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn split_partitions_every_index(n in 10usize..3000, seed in any::<u64>()) {
        let s = split_indices(n, seed).unwrap();
        let mut all: Vec<usize> = s.learn.iter().chain(&s.test).chain(&s.validation).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let v = s.validation.len() as f64;
        prop_assert!((v - 0.15 * n as f64).abs() <= 1.0);
        let rest = (n - s.validation.len()) as f64;
        prop_assert!((s.test.len() as f64 - 0.15 * rest).abs() <= 1.0);
    }

    #[test]
    fn kfold_partitions_every_index(n in 2usize..500, k in 2usize..8, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let folds = kfold_indices(n, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let sizes: BTreeSet<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn minmax_is_idempotent(ds in matrix(40, 5)) {
        let once = minmax_normalize(&ds);
        let twice = minmax_normalize(&once);
        for (a, b) in once.columns().iter().flatten().zip(twice.columns().iter().flatten()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert!(once.columns().iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn projection_commutes_with_normalization(ds in matrix(30, 6), pick in prop::collection::vec(any::<bool>(), 6)) {
        let chosen: Vec<String> = ds
            .feature_names()
            .iter()
            .zip(&pick)
            .filter(|(_, &p)| p)
            .map(|(n, _)| n.clone())
            .collect();
        prop_assume!(!chosen.is_empty());
        let a = minmax_normalize(&ds.project(&chosen, "p").unwrap());
        let b = minmax_normalize(&ds).project(&chosen, "p").unwrap();
        for (x, y) in a.columns().iter().flatten().zip(b.columns().iter().flatten()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        prop_assert_eq!(a.labels(), ds.labels());
    }

    #[test]
    fn csv_round_trip(ds in matrix(20, 4)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        ds.write_csv(&p).unwrap();
        let back = load_csv(&p, "label").unwrap();
        prop_assert_eq!(back.columns(), ds.columns());
        prop_assert_eq!(back.labels(), ds.labels());
        prop_assert_eq!(back.feature_names(), ds.feature_names());
    }
}

#[test]
fn split_counts_match_known_sizes() {
    let s = split_indices(64554, 0).unwrap();
    assert_eq!((s.validation.len(), s.test.len(), s.learn.len()), (9684, 8231, 46639));
    let s = split_indices(100, 0).unwrap();
    assert_eq!((s.validation.len(), s.test.len(), s.learn.len()), (15, 13, 72));
    assert_eq!(split_indices(100, 3).unwrap(), split_indices(100, 3).unwrap());
    assert!(matches!(split_indices(9, 0), Err(DatasetError::TooFewSamples { .. })));
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[test]
fn random_features_are_independent_of_labels() {
    let ds = synthetic::planted(12000, 3, 1, 0.0, 21);
    let tampered = inject_random_features(&ds, 5).unwrap();
    assert_eq!(tampered.n_features(), ds.n_features() + 3);
    let labels: Vec<f64> = ds.labels().iter().map(|&l| f64::from(l)).collect();
    let c = DiscreteColumn::from_labels(ds.labels());
    let bins = BinningConfig::new(10, BinningStrategy::EqualFrequency).unwrap();
    for name in RANDOM_FEATURE_NAMES {
        let col = tampered.column(tampered.feature_index(name).unwrap());
        let r = pearson(col, &labels);
        assert!(r.abs() < 0.05, "{name}: r = {r}");
        let mi = mutual_information(&discretize(col, &bins).unwrap(), &c).unwrap();
        assert!(mi < 0.01, "{name}: MI = {mi}");
    }
    assert_eq!(inject_random_features(&ds, 5).unwrap(), tampered);
    assert!(matches!(inject_random_features(&tampered, 5), Err(DatasetError::NameCollision(_))));
}

#[test]
fn random_feature_shapes() {
    let ds = synthetic::planted(3000, 2, 0, 0.0, 2);
    let t = inject_random_features(&ds, 9).unwrap();
    let col = |i: usize| t.column(t.feature_index(RANDOM_FEATURE_NAMES[i]).unwrap()).to_vec();
    let classes: BTreeSet<u64> = col(0).iter().map(|v| v.to_bits()).collect();
    assert_eq!(classes.len(), 3);
    // three well separated clusters around -5, 0, 5
    let blobs = col(1);
    for centre in [-5.0, 0.0, 5.0] {
        let near = blobs.iter().filter(|v| (*v - centre).abs() < 2.0).count();
        assert!(near > 700, "cluster at {centre}: {near}");
    }
    assert!(col(2).iter().all(|v| (0.0..1.0).contains(v)));
}

#[test]
fn minmax_examples() {
    let ds = Dataset::new(
        vec!["a".into(), "b".into()],
        vec![vec![2.0, 4.0, 6.0], vec![5.0, 5.0, 5.0]],
        vec![0, 1, 0],
    )
    .unwrap();
    let n = minmax_normalize(&ds);
    assert_eq!(n.column(0), &[0.0, 0.5, 1.0]);
    assert_eq!(n.column(1), &[0.0, 0.0, 0.0]);
    assert!(n.is_scaled());
}
