use std::collections::BTreeSet;

use midistill::dataset::{split, Dataset};
use midistill::infotheory::BinningConfig;
use midistill::neural::GateConfig;
use midistill::ranking::{Algorithm, Criterion, FeatureRanking, RankedFeature, RankingParams, TIE_RULE};
use midistill::selection::{
    average_fold_ranks, backward_eliminate, extract_optimized, tampering_audit, SelectionError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `bits` fair coin features with label = their majority, then `noise`
/// uniform features.
fn majority(n: usize, bits: usize, noise: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = vec![Vec::with_capacity(n); bits + noise];
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut ones = 0;
        for col in cols.iter_mut().take(bits) {
            let b = rng.random_range(0..2u8);
            ones += usize::from(b);
            col.push(f64::from(b));
        }
        for col in cols.iter_mut().skip(bits) {
            col.push(rng.random());
        }
        labels.push(u8::from(2 * ones > bits));
    }
    let names = (0..bits)
        .map(|i| format!("bit{i}"))
        .chain((0..noise).map(|i| format!("noise{i}")))
        .collect();
    Dataset::new(names, cols, labels).unwrap()
}

fn ranking(order: &[&str]) -> FeatureRanking {
    FeatureRanking {
        algorithm: Algorithm::Mrmr,
        params: RankingParams {
            beta: None,
            binning: BinningConfig::default(),
            tie_rule: TIE_RULE.into(),
        },
        entries: order
            .iter()
            .enumerate()
            .map(|(i, f)| RankedFeature {
                feature: f.to_string(),
                score: 0.0,
                rank: i + 1,
            })
            .collect(),
    }
}

#[test]
fn average_ranks_examples() {
    let r = ranking(&["a", "b", "c"]);
    let same = average_fold_ranks(&[r.clone(), r.clone()]).unwrap();
    assert_eq!(same["a"], 1.0);
    assert_eq!(same["c"], 3.0);
    let mixed = average_fold_ranks(&[ranking(&["f", "x", "y"]), ranking(&["x", "y", "f"])]).unwrap();
    assert_eq!(mixed["f"], 2.0);
    assert!(matches!(
        average_fold_ranks(&[ranking(&["a", "b"]), ranking(&["a", "c"])]),
        Err(SelectionError::FeatureSetMismatch)
    ));
}

#[test]
fn average_ranks_of_permutations_stay_in_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let names: Vec<String> = (0..36).map(|i| format!("f{i}")).collect();
    let rankings: Vec<FeatureRanking> = (0..5)
        .map(|_| {
            let mut order: Vec<&str> = names.iter().map(String::as_str).collect();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            ranking(&order)
        })
        .collect();
    let avg = average_fold_ranks(&rankings).unwrap();
    assert_eq!(avg.len(), 36);
    assert!(avg.values().all(|&r| (1.0..=36.0).contains(&r)));
    let total: f64 = avg.values().sum();
    assert!((total - (1..=36).sum::<usize>() as f64).abs() < 1e-9);
}

#[test]
fn audit_ranks_random_features_last_on_informative_data() {
    // 3 majority bits plus 2 noisy copies of the label: 5 informative features
    let mut good = 0;
    for seed in 0..10 {
        let base = majority(2000, 3, 0, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut names = base.feature_names().to_vec();
        let mut cols = base.columns().to_vec();
        for k in 0..2 {
            names.push(format!("echo{k}"));
            cols.push(
                base.labels()
                    .iter()
                    .map(|&l| if rng.random_bool(0.2) { f64::from(1 - l) } else { f64::from(l) })
                    .collect(),
            );
        }
        let ds = Dataset::new(names, cols, base.labels().to_vec()).unwrap();
        // bottom 3 of 8 positions: rank > 5
        let audit = tampering_audit(
            &ds,
            &[Criterion::new(Algorithm::Mrmr)],
            5,
            seed,
            0.375,
            &BinningConfig::default(),
        )
        .unwrap();
        assert_eq!(audit.positions, 8);
        assert_eq!(audit.pass_rank_bound, 5.0);
        good += usize::from(audit.per_algorithm[0].pass);
    }
    assert!(good >= 9, "{good}/10");
}

#[test]
fn vacuous_threshold_passes_everyone() {
    let ds = majority(300, 2, 4, 1);
    let criteria: Vec<Criterion> = Algorithm::ALL.iter().copied().map(Criterion::new).collect();
    let audit = tampering_audit(&ds, &criteria, 3, 1, 1.0, &BinningConfig::default()).unwrap();
    assert_eq!(audit.passing(), Algorithm::ALL.to_vec());
    for a in &audit.per_algorithm {
        assert!(a.random_feature_ranks.values().all(|&r| (1.0..=9.0).contains(&r)));
    }
    assert!(tampering_audit(&ds, &criteria, 1, 1, 0.3, &BinningConfig::default()).is_err());
}

#[test]
fn planted_bits_survive_elimination() {
    // removing any majority bit costs the gate about 18% accuracy; noise
    // removal costs nothing
    let mut ok = 0;
    for seed in 0..10 {
        let ds = majority(2000, 5, 15, seed);
        let s = split(&ds, seed).unwrap();
        let trace = backward_eliminate(
            &ds,
            Criterion::new(Algorithm::Mrmr),
            &s,
            0.9,
            &BinningConfig::default(),
            &GateConfig::default(),
        )
        .unwrap();
        ok += usize::from(trace.mdrt >= 5);
    }
    assert!(ok >= 9, "{ok}/10");
}

#[test]
fn perfect_feature_survives_longest() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 400;
    let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let mut cols: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| rng.random()).collect()).collect();
    cols.insert(2, labels.iter().map(|&l| f64::from(l)).collect());
    let names = ["n0", "n1", "perfect", "n2", "n3"].map(String::from).to_vec();
    let ds = Dataset::new(names, cols, labels).unwrap();
    let s = split(&ds, 6).unwrap();
    let trace = backward_eliminate(
        &ds,
        Criterion::new(Algorithm::Mrmr),
        &s,
        0.97,
        &BinningConfig::default(),
        &GateConfig::default(),
    )
    .unwrap();
    assert_eq!(trace.mdrt, 1);
    assert_eq!(trace.mdrt_features(), ["perfect"]);
    assert_eq!(trace.stopped_at, None);
    assert_eq!(trace.steps.len(), 4);
}

#[test]
fn zero_gamma_runs_to_one_feature_and_steps_are_nested() {
    let ds = majority(500, 3, 4, 2);
    let s = split(&ds, 2).unwrap();
    let run = || {
        backward_eliminate(
            &ds,
            Criterion::new(Algorithm::Jmi),
            &s,
            0.0,
            &BinningConfig::default(),
            &GateConfig::default(),
        )
        .unwrap()
    };
    let trace = run();
    assert_eq!(trace.steps.len(), ds.n_features() - 1);
    assert_eq!(trace.stopped_at, None);
    let mut seen = BTreeSet::new();
    for (i, step) in trace.steps.iter().enumerate() {
        assert!(seen.insert(step.removed_feature.clone()), "feature removed twice");
        let before: BTreeSet<String> = trace.features_at(ds.n_features() - i).unwrap().into_iter().collect();
        let after: BTreeSet<String> = trace.features_at(ds.n_features() - i - 1).unwrap().into_iter().collect();
        assert_eq!(before.difference(&after).cloned().collect::<Vec<_>>(), std::slice::from_ref(&step.removed_feature));
        assert!([step.accuracy, step.precision, step.recall].iter().all(|m| (0.0..=1.0).contains(m)));
    }
    assert_eq!(run(), trace);
}

#[test]
fn gamma_out_of_range_is_rejected() {
    let ds = majority(100, 2, 1, 0);
    let s = split(&ds, 0).unwrap();
    for gamma in [1.0, -0.1, f64::NAN] {
        assert!(backward_eliminate(
            &ds,
            Criterion::new(Algorithm::Mrmr),
            &s,
            gamma,
            &BinningConfig::default(),
            &GateConfig::default()
        )
        .is_err());
    }
}

#[test]
fn extraction_examples() {
    let ds = majority(50, 2, 2, 4);
    let all = extract_optimized(&ds, ds.feature_names()).unwrap();
    assert_eq!(all.columns(), ds.columns());
    let one = extract_optimized(&ds, &["noise1".to_string()]).unwrap();
    assert_eq!(one.n_features(), 1);
    assert_eq!(one.column(0), ds.column(3));
    assert_eq!(one.labels(), ds.labels());
    assert!(extract_optimized(&ds, &["nope".to_string()]).is_err());
}
