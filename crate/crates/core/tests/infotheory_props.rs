use midistill::infotheory::{
    conditional_mutual_information, discretize, entropy, joint_entropy, joint_entropy3, mutual_information, pair,
    BinningConfig, BinningStrategy, DiscreteColumn,
};
use proptest::prelude::*;

fn column(k: u32, n: usize) -> impl Strategy<Value = DiscreteColumn> {
    prop::collection::vec(0..k, n).prop_map(move |codes| DiscreteColumn::from_codes(codes, k).unwrap())
}

fn triple() -> impl Strategy<Value = (DiscreteColumn, DiscreteColumn, DiscreteColumn)> {
    (1usize..=64, 1u32..=4, 1u32..=4, 1u32..=4)
        .prop_flat_map(|(n, a, b, c)| (column(a, n), column(b, n), column(c, n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn measures_are_non_negative((x, y, z) in triple()) {
        prop_assert!(entropy(&x) >= 0.0);
        prop_assert!(mutual_information(&x, &y).unwrap() >= 0.0);
        prop_assert!(conditional_mutual_information(&x, &y, &z).unwrap() >= 0.0);
    }

    #[test]
    fn symmetric_exactly((x, y, _z) in triple()) {
        prop_assert_eq!(mutual_information(&x, &y).unwrap(), mutual_information(&y, &x).unwrap());
        prop_assert_eq!(joint_entropy(&x, &y).unwrap(), joint_entropy(&y, &x).unwrap());
    }

    #[test]
    fn chain_identity((x, y, z) in triple()) {
        let stratified = conditional_mutual_information(&x, &y, &z).unwrap();
        let chained = joint_entropy(&x, &z).unwrap() + joint_entropy(&y, &z).unwrap()
            - entropy(&z)
            - joint_entropy3(&x, &y, &z).unwrap();
        prop_assert!((stratified - chained.max(0.0)).abs() < 1e-9, "{} vs {}", stratified, chained);
    }

    #[test]
    fn joint_entropy_bounds((x, y, _z) in triple()) {
        let (hx, hy, hxy) = (entropy(&x), entropy(&y), joint_entropy(&x, &y).unwrap());
        prop_assert!(hxy + 1e-12 >= hx.max(hy));
        prop_assert!(hxy <= hx + hy + 1e-12);
    }

    #[test]
    fn deterministic_function_keeps_its_entropy((x, _y, _z) in triple(), m in 1u32..=3) {
        let codes: Vec<u32> = x.codes().iter().map(|c| c % m).collect();
        let y = DiscreteColumn::from_codes(codes, m).unwrap();
        prop_assert!((mutual_information(&x, &y).unwrap() - entropy(&y)).abs() < 1e-12);
    }

    #[test]
    fn self_conditioning_is_conditional_entropy((x, _y, z) in triple()) {
        let cmi = conditional_mutual_information(&x, &x, &z).unwrap();
        let h = joint_entropy(&x, &z).unwrap() - entropy(&z);
        prop_assert!((cmi - h).abs() < 1e-9);
    }

    #[test]
    fn paired_variable_is_the_joint((x, y, z) in triple()) {
        let p = pair(&x, &y).unwrap();
        prop_assert!((entropy(&p) - joint_entropy(&x, &y).unwrap()).abs() < 1e-12);
        prop_assert!((joint_entropy(&p, &z).unwrap() - joint_entropy3(&x, &y, &z).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn discretized_codes_are_in_range(
        values in prop::collection::vec(-1e6f64..1e6, 1..200),
        bins in 2usize..20,
        equal_width in any::<bool>(),
    ) {
        let strategy = if equal_width { BinningStrategy::EqualWidth } else { BinningStrategy::EqualFrequency };
        let d = discretize(&values, &BinningConfig::new(bins, strategy).unwrap()).unwrap();
        prop_assert!(d.k() as usize <= bins.max(1));
        prop_assert!(d.codes().iter().all(|&c| c < d.k()));
        // every bin is occupied
        for b in 0..d.k() {
            prop_assert!(d.codes().contains(&b));
        }
        // binning is monotone in the value
        for i in 0..values.len() {
            for j in 0..values.len() {
                if values[i] < values[j] {
                    prop_assert!(d.codes()[i] <= d.codes()[j]);
                }
            }
        }
    }
}

#[test]
fn known_values() {
    let c = |v: Vec<u32>| {
        let k = v.iter().max().unwrap() + 1;
        DiscreteColumn::from_codes(v, k).unwrap()
    };
    assert!((entropy(&c(vec![0, 0, 0, 1])) - 0.811278).abs() < 1e-6);
    assert_eq!(joint_entropy(&c(vec![0, 0, 1, 1]), &c(vec![0, 1, 0, 1])).unwrap(), 2.0);
    assert_eq!(mutual_information(&c(vec![0, 0, 1, 1]), &c(vec![0, 1, 0, 1])).unwrap(), 0.0);
    assert!((mutual_information(&c(vec![0, 0, 1, 1]), &c(vec![0, 1, 1, 1])).unwrap() - 0.311278).abs() < 1e-6);

    let ew = BinningConfig::new(2, BinningStrategy::EqualWidth).unwrap();
    let d = discretize(&[0.0, 0.2, 0.5, 1.0], &ew).unwrap();
    assert_eq!((d.codes(), d.k()), (&[0, 0, 0, 1][..], 2));
    let d = discretize(&[0.0, 1.0, 0.0, 1.0], &BinningConfig::default()).unwrap();
    assert_eq!((d.codes(), d.k()), (&[0, 1, 0, 1][..], 2));
    let d = discretize(&[3.0; 5], &BinningConfig::default()).unwrap();
    assert_eq!((d.codes(), d.k()), (&[0; 5][..], 1));
}

#[test]
fn constant_conditioning_equals_plain_mi() {
    let x = DiscreteColumn::from_codes(vec![0, 1, 1, 2, 0, 2, 1], 3).unwrap();
    let y = DiscreteColumn::from_codes(vec![1, 1, 0, 0, 1, 0, 1], 2).unwrap();
    let z = DiscreteColumn::from_codes(vec![0; 7], 1).unwrap();
    let a = conditional_mutual_information(&x, &y, &z).unwrap();
    let b = mutual_information(&x, &y).unwrap();
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn length_mismatch_is_an_error() {
    let x = DiscreteColumn::from_codes(vec![0, 1], 2).unwrap();
    let y = DiscreteColumn::from_codes(vec![0, 1, 1], 2).unwrap();
    assert!(mutual_information(&x, &y).is_err());
    assert!(joint_entropy(&x, &y).is_err());
    assert!(conditional_mutual_information(&x, &x, &y).is_err());
}
