use proptest::prelude::*;
use qst_core::measure::{build_operators, generalized_q, husimi, MeasurementKind, PhaseGrid};
use qst_core::noise::{gaussian_convolve, photon_loss};
use qst_core::states::{
    make_binomial, make_cat, make_coherent, make_fock, make_gkp_finite, make_num_1562, make_random_density,
    make_thermal, sample_spec, FAMILY_NAMES,
};
use qst_core::{fidelity, rng_from_seed, DensityMatrix, C64};

fn assert_physical(rho: &DensityMatrix) {
    DensityMatrix::new(rho.matrix().clone()).expect("state passes invariants");
}

#[test]
fn every_family_builds_physical_states() {
    let mut rng = rng_from_seed(2024);
    for name in FAMILY_NAMES {
        for _ in 0..8 {
            let spec = sample_spec(name, 32, &mut rng).unwrap();
            spec.validate().unwrap();
            let rho = spec.build().unwrap();
            assert_physical(&rho);
            if !matches!(name, "thermal" | "random") {
                assert!((rho.purity() - 1.0).abs() < 1e-8, "{name} purity {}", rho.purity());
            }
        }
    }
}

#[test]
fn logical_pairs_are_orthogonal() {
    let c = 40;
    let pairs = [
        (make_num_1562(0, c).unwrap(), make_num_1562(1, c).unwrap(), 1e-6),
        (make_binomial(2, 3, 0, c).unwrap(), make_binomial(2, 3, 1, c).unwrap(), 1e-6),
        (make_cat(C64::new(2.0, 0.5), 1, 0, c).unwrap(), make_cat(C64::new(2.0, 0.5), 1, 1, c).unwrap(), 1e-6),
        (make_gkp_finite(0.3, 0, 20, c).unwrap(), make_gkp_finite(0.3, 1, 20, c).unwrap(), 0.05),
    ];
    for (zero, one, bound) in pairs {
        let f = fidelity(&zero, &one).unwrap();
        assert!(f < bound, "{f}");
    }
}

#[test]
fn gkp_overlap_fixture() {
    // regression value recorded from the first verified run
    let f = fidelity(&make_gkp_finite(0.3, 0, 20, 32).unwrap(), &make_gkp_finite(0.3, 1, 20, 32).unwrap()).unwrap();
    assert!((f - 6.773505111784e-7).abs() < 1e-12, "{f:e}");
}

#[test]
fn sensing_matrix_consistency() {
    let rho = make_random_density(0.8, 12, 3).unwrap();
    let grid = PhaseGrid::scatter(40, 4.0, 5).unwrap();
    for n in [0, 2] {
        let ops = build_operators(&grid, MeasurementKind::GeneralizedQ { n }, 12, 2).unwrap();
        let via_ops = ops.apply(&rho).unwrap();
        let direct = generalized_q(&rho, &grid, n, 2).unwrap();
        for (a, b) in via_ops.iter().zip(&direct.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn binomial_support_is_spaced(s in 1usize..5, n in 2usize..5, mu in 0u8..2) {
        let rho = make_binomial(s, n, mu, 40).unwrap();
        for (k, p) in rho.populations().iter().enumerate() {
            if k % (s + 1) != 0 {
                prop_assert!(*p == 0.0);
            }
        }
    }

    #[test]
    fn husimi_bounded(re in -2.0f64..2.0, im in -2.0f64..2.0, n_th in 0.0f64..4.0) {
        let grid = PhaseGrid::square(-5.0, 5.0, 11, 11).unwrap();
        for rho in [make_coherent(C64::new(re, im), 32).unwrap(), make_thermal(n_th, 32).unwrap()] {
            let q = husimi(&rho, &grid, 2).unwrap();
            prop_assert!(q.values.iter().all(|v| *v >= -1e-12 && *v <= 1.0 / std::f64::consts::PI + 1e-9));
        }
    }

    #[test]
    fn loss_semigroup_on_populations(seed in any::<u64>(), f1 in 0.0f64..0.9, f2 in 0.0f64..0.9) {
        let rho = make_random_density(0.8, 8, seed).unwrap();
        let two = photon_loss(&photon_loss(&rho, f1).unwrap(), f2).unwrap();
        let one = photon_loss(&rho, 1.0 - (1.0 - f1) * (1.0 - f2)).unwrap();
        for (a, b) in two.populations().iter().zip(one.populations()) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn convolution_is_linear_and_positive(seed in any::<u64>(), x in 0.0f64..2.0, y in 0.0f64..2.0, n_th in 0.05f64..3.0) {
        let grid = PhaseGrid::square(-3.0, 3.0, 9, 9).unwrap();
        let a = husimi(&make_random_density(0.5, 6, seed).unwrap(), &grid, 2).unwrap();
        let b = husimi(&make_fock(1, 6).unwrap(), &grid, 2).unwrap();
        let combo = a.with_values(a.values.iter().zip(&b.values).map(|(p, q)| x * p + y * q).collect());
        let lhs = gaussian_convolve(&combo, &grid, n_th).unwrap();
        let ca = gaussian_convolve(&a, &grid, n_th).unwrap();
        let cb = gaussian_convolve(&b, &grid, n_th).unwrap();
        for ((l, p), q) in lhs.values.iter().zip(&ca.values).zip(&cb.values) {
            prop_assert!((l - (x * p + y * q)).abs() < 1e-12);
            prop_assert!(*l >= -1e-15);
        }
    }
}
