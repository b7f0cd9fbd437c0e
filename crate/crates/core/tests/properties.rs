use interface_pinning::green::{occupation_green, WalkSpec};
use interface_pinning::model::{build_lattice, make_interaction, InteractionKind, Lattice, Offset, PinningSpec};
use interface_pinning::oracle::{
    enumerate_delta_pinning, gaussian_covariance, DeltaQuery, ExactMeasure, Observable, PinnedSet, QuadratureScheme,
};
use proptest::prelude::*;

fn anisotropic(cx: f64, cy: f64, cd: f64) -> interface_pinning::model::InteractionSpec {
    let mut couplings = vec![
        (Offset(1, 0), cx),
        (Offset(-1, 0), cx),
        (Offset(0, 1), cy),
        (Offset(0, -1), cy),
    ];
    if cd > 0.0 {
        couplings.extend([(Offset(1, 1), cd), (Offset(-1, -1), cd)]);
    }
    make_interaction(InteractionKind::Gaussian { couplings }).unwrap()
}

fn mask_set(n: usize, mask: u64) -> PinnedSet {
    PinnedSet::from_indices(n, &(0..n).filter(|i| mask >> i & 1 == 1).collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn green_function_is_symmetric(
        cx in 0.2f64..2.0, cy in 0.2f64..2.0, cd in 0.0f64..1.0, mask in 0u64..(1 << 25),
    ) {
        let lat = build_lattice(2, 1, 0.0).unwrap();
        let walk = WalkSpec::from_gaussian(&anisotropic(cx, cy, cd)).unwrap().with_absorbing(mask_set(25, mask));
        let g = occupation_green(&lat, &walk).unwrap();
        for i in 0..25 {
            for j in 0..25 {
                prop_assert!((g.get(i, j) - g.get(j, i)).abs() <= 1e-10 * (1.0 + g.get(i, i)));
            }
        }
    }

    #[test]
    fn green_function_matches_covariance(
        cx in 0.2f64..2.0, cy in 0.2f64..2.0, cd in 0.0f64..1.0, mask in 0u64..(1 << 25),
    ) {
        let lat = build_lattice(2, 1, 0.0).unwrap();
        let spec = anisotropic(cx, cy, cd);
        let a = mask_set(25, mask);
        let g = occupation_green(&lat, &WalkSpec::from_gaussian(&spec).unwrap().with_absorbing(a.clone())).unwrap();
        let c = gaussian_covariance(&lat, &spec, &a).unwrap();
        for i in 0..25 {
            for j in 0..25 {
                prop_assert!((g.get(i, j) - c.cov(i, j)).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn enlarging_the_absorbing_set_lowers_green(
        rate in 0.2f64..3.0, small in 0u64..(1 << 25), extra in 0u64..(1 << 25),
    ) {
        let lat = build_lattice(2, 1, 0.0).unwrap();
        let walk = WalkSpec::nearest_neighbor(rate).unwrap();
        let g_small = occupation_green(&lat, &walk.clone().with_absorbing(mask_set(25, small))).unwrap();
        let g_big = occupation_green(&lat, &walk.with_absorbing(mask_set(25, small | extra))).unwrap();
        for i in 0..25 {
            for j in 0..25 {
                prop_assert!(g_big.get(i, j) <= g_small.get(i, j) + 1e-12);
                prop_assert!(g_big.get(i, j) >= -1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn brascamp_lieb_bounds_quartic_variance(
        kappa in 0.3f64..2.0, lambda in 0.0f64..3.0, w in proptest::collection::vec(-1.0f64..1.0, 3),
    ) {
        let lat = Lattice::chain(3, 1, 0.0).unwrap();
        let spec = make_interaction(InteractionKind::quartic_nn(kappa, lambda)).unwrap();
        let gauss = gaussian_covariance(&lat, &spec.comparison_gaussian(), &PinnedSet::empty(3)).unwrap();
        let alpha: Vec<(usize, f64)> = w.iter().copied().enumerate().collect();
        let lin = {
            let alpha = alpha.clone();
            move |h: &[f64]| alpha.iter().map(|&(i, a)| a * h[i]).sum::<f64>()
        };
        let sq = lin.clone();
        let r = ExactMeasure::new(&lat, &spec, QuadratureScheme::with_points(40))
            .unwrap()
            .evaluate(&[
                Observable::custom("lin", lin),
                Observable::custom("sq", move |h| sq(h).powi(2)),
            ])
            .unwrap();
        let var = r.moment_at(1).value - r.moment_at(0).value.powi(2);
        let bound = gauss.linear_variance(&alpha) / spec.floor();
        prop_assert!(var <= bound * (1.0 + 1e-3) + r.moment_at(1).error_estimate, "{var} > {bound}");
    }

    #[test]
    fn delta_pinning_moments_are_monotone_in_weight(j in -2.0f64..2.0, dj in 0.1f64..2.0) {
        let lat = Lattice::chain(3, 1, 0.0).unwrap();
        let spec = make_interaction(InteractionKind::quartic_nn(1.0, 1.0)).unwrap();
        let q = DeltaQuery { observables: vec![Observable::second_moment(1)], avoid: vec![] };
        let scheme = QuadratureScheme::with_points(32);
        let weak = enumerate_delta_pinning(&lat, &spec, j, &q, scheme).unwrap().moment_at(0);
        let strong = enumerate_delta_pinning(&lat, &spec, j + dj, &q, scheme).unwrap().moment_at(0);
        prop_assert!(strong.value <= weak.value + weak.error_estimate + strong.error_estimate);
    }

    #[test]
    fn pinning_spec_round_trips_through_json(j in -5.0f64..5.0, eps in 0.01f64..4.0, a in 0.01f64..3.0) {
        for p in [PinningSpec::delta(j).unwrap(), PinningSpec::square_well(eps, a).unwrap(), PinningSpec::Free] {
            let back: PinningSpec = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
            prop_assert_eq!(back, p);
        }
    }
}
