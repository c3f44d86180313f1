mod common;

use equiproj::linalg::{hs_inner, ComplexMatrix};
use equiproj::random::{random_matrix, rng};
use equiproj::reynolds::{commutant_oracle, orbit_decompose, project_finite};
use proptest::prelude::*;

use common::{acceptance_groups, random_layer};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_is_an_orthogonal_projector(seed in 0u64..1_000_000, gi in 0usize..5) {
        let g = &acceptance_groups()[gi];
        let mut r = rng(seed);
        let layer = random_layer(g, &mut r);
        let p = project_finite(&layer).unwrap();
        let pp = project_finite(&layer.with_weight(p.clone()).unwrap()).unwrap();
        prop_assert!(pp.frobenius_distance(&p) <= 1e-12 * (1.0 + p.frobenius()));

        let other = random_matrix(layer.weight().rows(), layer.weight().cols(), &mut r);
        let q = project_finite(&layer.with_weight(other.clone()).unwrap()).unwrap();
        let lhs = hs_inner(&p, &other).unwrap();
        let rhs = hs_inner(layer.weight(), &q).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10);
    }

    #[test]
    fn projection_lands_in_the_commutant(seed in 0u64..1_000_000, gi in 0usize..5) {
        let g = &acceptance_groups()[gi];
        let layer = random_layer(g, &mut rng(seed));
        let p = project_finite(&layer).unwrap();
        prop_assert!(layer.with_weight(p.clone()).unwrap().commutation_error() <= 1e-10);
        let oracle = commutant_oracle(&layer).unwrap();
        prop_assert!(oracle.max_abs_diff(&p) <= 1e-10);
    }

    #[test]
    fn orbit_parts_are_orthogonal_and_complete(seed in 0u64..1_000_000, gi in 0usize..5) {
        let g = &acceptance_groups()[gi];
        let layer = random_layer(g, &mut rng(seed));
        let (eq, anti) = orbit_decompose(&layer).unwrap();
        prop_assert!(hs_inner(&eq, &anti).unwrap().norm() <= 1e-10 * (1.0 + layer.weight().frobenius().powi(2)));
        prop_assert!(eq.add(&anti).unwrap().max_abs_diff(layer.weight()) <= 1e-12 * (1.0 + layer.weight().frobenius()));
        let anti_proj = project_finite(&layer.with_weight(anti).unwrap()).unwrap();
        prop_assert!(anti_proj.max_abs_diff(&ComplexMatrix::zeros(anti_proj.rows(), anti_proj.cols())) <= 1e-10);
    }
}
