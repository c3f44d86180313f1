//! Random groups, representations and layers shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use equiproj::group::{
    change_of_basis, cyclic_irrep, dihedral_natural, dihedral_sign, direct_sum, make_cyclic, make_dihedral,
    regular_representation, trivial_representation, FiniteGroup, Representation,
};
use equiproj::random::{random_matrix, random_unitary, SeededRng};
use equiproj::reynolds::LinearLayerSpec;
use rand::Rng;

#[derive(Clone)]
pub struct TestGroup {
    pub label: &'static str,
    pub group: Arc<FiniteGroup>,
    pub dihedral: bool,
}

/// C2, C4, C8, D3, D4.
pub fn acceptance_groups() -> Vec<TestGroup> {
    let c = |label, n| TestGroup {
        label,
        group: Arc::new(make_cyclic(n).unwrap()),
        dihedral: false,
    };
    let d = |label, n| TestGroup {
        label,
        group: Arc::new(make_dihedral(n).unwrap()),
        dihedral: true,
    };
    vec![c("C2", 2), c("C4", 4), c("C8", 8), d("D3", 3), d("D4", 4)]
}

fn small_irrep_sum(g: &TestGroup, r: &mut SeededRng) -> Representation {
    let pieces = r.gen_range(1..=3);
    let pick = |r: &mut SeededRng| -> Representation {
        if g.dihedral {
            match r.gen_range(0..3) {
                0 => dihedral_natural(g.group.clone()).unwrap(),
                1 => dihedral_sign(g.group.clone()).unwrap(),
                _ => trivial_representation(g.group.clone(), 1).unwrap(),
            }
        } else {
            cyclic_irrep(g.group.clone(), r.gen_range(0..g.group.order())).unwrap()
        }
    };
    let mut rep = pick(r);
    for _ in 1..pieces {
        rep = direct_sum(&rep, &pick(r)).unwrap();
    }
    rep
}

/// A random representation of dimension at most 8, possibly in a
/// scrambled (non-permutation) basis.
pub fn random_rep(g: &TestGroup, r: &mut SeededRng) -> Representation {
    let rep = match r.gen_range(0..4) {
        0 => regular_representation(g.group.clone()).unwrap(),
        1 => trivial_representation(g.group.clone(), r.gen_range(1..=2)).unwrap(),
        _ => small_irrep_sum(g, r),
    };
    if r.gen_bool(0.5) {
        let u = random_unitary(rep.dim(), r);
        change_of_basis(&rep, &u).unwrap()
    } else {
        rep
    }
}

pub fn random_layer(g: &TestGroup, r: &mut SeededRng) -> LinearLayerSpec {
    let rin = random_rep(g, r);
    let rout = random_rep(g, r);
    let w = random_matrix(rout.dim(), rin.dim(), r);
    LinearLayerSpec::new(w, rin, rout).unwrap()
}

pub fn layer_between(rin: &Representation, rout: &Representation, r: &mut SeededRng) -> LinearLayerSpec {
    let w = random_matrix(rout.dim(), rin.dim(), r);
    LinearLayerSpec::new(w, rin.clone(), rout.clone()).unwrap()
}
