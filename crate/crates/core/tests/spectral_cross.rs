use std::sync::Arc;

use equiproj::group::{cyclic_irreps, make_cyclic, regular_representation, trivial_representation};
use equiproj::linalg::ComplexMatrix;
use equiproj::random::{random_matrix, rng};
use equiproj::reynolds::{commutant_basis, project_finite, LinearLayerSpec};
use equiproj::spectral::{operator_fourier, project_equivariant_circulant, project_equivariant_spectral};

#[test]
fn regular_commutant_is_block_diagonal_in_fourier_space() {
    for n in [2, 3, 4, 6, 8] {
        let g = Arc::new(make_cyclic(n).unwrap());
        let cat = cyclic_irreps(n).unwrap();
        let reg = regular_representation(g.clone()).unwrap();
        let scalar = trivial_representation(cat.group().clone(), 1).unwrap();
        let basis = commutant_basis(&reg, &reg).unwrap();
        assert_eq!(basis.len(), n);
        for v in basis {
            let t = ComplexMatrix::from_vec(n, n, v).unwrap();
            let blocks = operator_fourier(&t, &cat, &scalar, &scalar).unwrap();
            for p in 0..n {
                for s in 0..n {
                    if p != s {
                        assert!(blocks.block(p, s).frobenius() < 1e-12, "n={n} block ({p},{s})");
                    }
                }
            }
        }
    }
}

#[test]
fn three_projection_paths_agree() {
    let mut r = rng(31);
    for n in [4, 5, 8] {
        let cat = cyclic_irreps(n).unwrap();
        let g = cat.group().clone();
        let reg = regular_representation(g.clone()).unwrap();
        let scalar = trivial_representation(g, 1).unwrap();
        let t = random_matrix(n, n, &mut r);
        let finite = project_finite(&LinearLayerSpec::new(t.clone(), reg.clone(), reg).unwrap()).unwrap();
        let fft = project_equivariant_circulant(&t).unwrap();
        let spectral = project_equivariant_spectral(&t, &cat, &scalar, &scalar).unwrap();
        assert!(finite.max_abs_diff(&fft) < 1e-11);
        assert!(finite.max_abs_diff(&spectral) < 1e-11);
    }
}
