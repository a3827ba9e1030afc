use std::f64::consts::PI;

use nsul_core::evolve::random_bandlimited;
use nsul_core::ulnorm::{admissibility_check, ball_sum_at, ball_sums, ul_norm, weighted_norm, WeightFunction};
use nsul_core::{GridSpec, ScalarField};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn prefix_ball_sums_match_brute_force(seed in any::<u64>(), r in 0.3f64..2.0, i1 in 0usize..32, i2 in 0usize..32) {
        let g = GridSpec::square(32, 8.0).unwrap();
        let f = random_bandlimited(&g, 1.0, 8.0, 1.0, seed).unwrap();
        let fast = ball_sums(&f, r).unwrap();
        let slow = ball_sum_at(&f, g.node(i1, i2), r);
        prop_assert!((fast.at(i1, i2) - slow).abs() < 1e-12);
    }

    #[test]
    fn norms_are_absolutely_homogeneous(seed in any::<u64>(), c in -4.0f64..4.0) {
        let g = GridSpec::square(64, 16.0).unwrap();
        let f = random_bandlimited(&g, 1.0, 10.0, 1.0, seed).unwrap();
        let cf = f.map(|v| c * v);
        let w = WeightFunction::exponential();
        let (a, b) = (ul_norm(&f, 2.0, 1.0).unwrap(), ul_norm(&cf, 2.0, 1.0).unwrap());
        prop_assert!((b - c.abs() * a).abs() <= 1e-12 * a.max(1e-300) * 10.0);
        let (a, b) = (weighted_norm(&f, 2.0, &w).unwrap(), weighted_norm(&cf, 2.0, &w).unwrap());
        prop_assert!((b - c.abs() * a).abs() <= 1e-12 * a.max(1e-300) * 10.0);
    }
}

#[test]
fn built_in_weights_are_admissible_and_spike_is_not() {
    assert!(admissibility_check(&WeightFunction::exponential()).passed());
    assert!(admissibility_check(&WeightFunction::algebraic(3.0).unwrap()).passed());
    let spike = admissibility_check(&WeightFunction::spike());
    assert!(!spike.passed());
    assert!(spike.to_error().unwrap().to_string().contains("(b)"));
}

#[test]
fn constant_field_weighted_norm() {
    let g = GridSpec::square(256, 48.0).unwrap();
    let f = ScalarField::constant(g, 1.0);
    let v = weighted_norm(&f, 1.0, &WeightFunction::exponential()).unwrap();
    assert!((v - 2.0 * PI).abs() / (2.0 * PI) < 1e-3, "{v}");
}
