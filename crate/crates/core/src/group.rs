//! Finite groups as Cayley tables and their unitary representations.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::linalg::ComplexMatrix;

/// Elementwise tolerance for the homomorphism and unitarity checks.
pub const REP_TOL: f64 = 1e-12;
/// Tolerance for character orthonormality in irrep catalogues.
pub const CHARACTER_TOL: f64 = 1e-10;
/// Largest order for which associativity is checked exhaustively.
pub const ASSOCIATIVITY_CHECK_MAX: usize = 64;

/// A finite group given by its multiplication table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteGroup {
    name: String,
    order: usize,
    cayley: Vec<usize>,
    inverse: Vec<usize>,
    identity: usize,
}

impl FiniteGroup {
    /// Builds a group from a row-major Cayley table (`cayley[g*n + h] = g·h`),
    /// deriving identity and inverses and validating the group axioms.
    pub fn from_cayley(name: impl Into<String>, order: usize, cayley: Vec<usize>) -> Result<Self> {
        if order == 0 {
            return invalid("group order must be positive");
        }
        if cayley.len() != order * order {
            return invalid(format!(
                "Cayley table has {} entries, expected {}",
                cayley.len(),
                order * order
            ));
        }
        if cayley.iter().any(|&x| x >= order) {
            return invalid("Cayley table entry out of range");
        }
        let identity = (0..order)
            .find(|&e| (0..order).all(|g| cayley[e * order + g] == g && cayley[g * order + e] == g))
            .ok_or_else(|| Error::InvalidArgument("Cayley table has no identity".into()))?;
        let mut inverse = Vec::with_capacity(order);
        for g in 0..order {
            let inv = (0..order)
                .find(|&h| cayley[g * order + h] == identity)
                .ok_or_else(|| Error::InvalidArgument(format!("element {g} has no inverse")))?;
            if cayley[inv * order + g] != identity {
                return invalid(format!("element {g} has no two-sided inverse"));
            }
            inverse.push(inv);
        }
        let group = Self {
            name: name.into(),
            order,
            cayley,
            inverse,
            identity,
        };
        if order <= ASSOCIATIVITY_CHECK_MAX {
            group.check_associativity()?;
        }
        Ok(group)
    }

    fn check_associativity(&self) -> Result<()> {
        let n = self.order;
        for a in 0..n {
            for b in 0..n {
                let ab = self.mul(a, b);
                for c in 0..n {
                    if self.mul(ab, c) != self.mul(a, self.mul(b, c)) {
                        return invalid(format!("associativity fails at ({a},{b},{c})"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn mul(&self, g: usize, h: usize) -> usize {
        self.cayley[g * self.order + h]
    }

    pub fn inverse(&self, g: usize) -> usize {
        self.inverse[g]
    }

    pub fn cayley_row(&self, g: usize) -> &[usize] {
        &self.cayley[g * self.order..(g + 1) * self.order]
    }

    pub fn is_abelian(&self) -> bool {
        (0..self.order).all(|g| (0..self.order).all(|h| self.mul(g, h) == self.mul(h, g)))
    }
}

impl fmt::Display for FiniteGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// Cyclic group Z/nZ; element `k` is the rotation by `k` steps.
pub fn make_cyclic(n: usize) -> Result<FiniteGroup> {
    if n == 0 {
        return invalid("cyclic group order must be positive");
    }
    let cayley = (0..n * n).map(|idx| (idx / n + idx % n) % n).collect();
    FiniteGroup::from_cayley(format!("C{n}"), n, cayley)
}

/// Dihedral group of order `2n`. Indices `0..n` are `r^k`, indices `n..2n`
/// are `s·r^k`, with `s r s = r⁻¹`.
pub fn make_dihedral(n: usize) -> Result<FiniteGroup> {
    if n == 0 {
        return invalid("dihedral group parameter must be positive");
    }
    let order = 2 * n;
    let split = |g: usize| (g / n, g % n);
    let mut cayley = Vec::with_capacity(order * order);
    for g in 0..order {
        for h in 0..order {
            let (gs, gk) = split(g);
            let (hs, hk) = split(h);
            // s^a r^i · s^b r^j = s^{a+b} r^{(-1)^b i + j}
            let k = if hs == 1 { (hk + n - gk) % n } else { (gk + hk) % n };
            cayley.push(((gs + hs) % 2) * n + k);
        }
    }
    FiniteGroup::from_cayley(format!("D{n}"), order, cayley)
}

/// Group selector parsed from `cyclic:n` / `dihedral:n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupSpec {
    Cyclic(usize),
    Dihedral(usize),
}

impl GroupSpec {
    pub fn build(self) -> Result<FiniteGroup> {
        match self {
            GroupSpec::Cyclic(n) => make_cyclic(n),
            GroupSpec::Dihedral(n) => make_dihedral(n),
        }
    }
}

impl std::str::FromStr for GroupSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, n) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("malformed group '{s}', expected kind:n")))?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("malformed group order in '{s}'")))?;
        match kind.trim().to_ascii_lowercase().as_str() {
            "cyclic" | "c" => Ok(GroupSpec::Cyclic(n)),
            "dihedral" | "d" => Ok(GroupSpec::Dihedral(n)),
            other => invalid(format!("unknown group kind '{other}'")),
        }
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpec::Cyclic(n) => write!(f, "cyclic:{n}"),
            GroupSpec::Dihedral(n) => write!(f, "dihedral:{n}"),
        }
    }
}

/// Unitary representation: one `dim × dim` matrix per group element.
#[derive(Clone, Debug)]
pub struct Representation {
    group: Arc<FiniteGroup>,
    dim: usize,
    matrices: Vec<ComplexMatrix>,
}

impl Representation {
    /// Validates shapes, exact identity, homomorphism and unitarity.
    pub fn new(group: Arc<FiniteGroup>, matrices: Vec<ComplexMatrix>) -> Result<Self> {
        let rep = Self::new_unchecked(group, matrices)?;
        rep.validate()?;
        Ok(rep)
    }

    /// Skips the algebraic checks (shapes are still checked). Intended for
    /// benchmarks where the representation is known to be valid.
    pub fn new_unchecked(group: Arc<FiniteGroup>, matrices: Vec<ComplexMatrix>) -> Result<Self> {
        if matrices.len() != group.order() {
            return invalid(format!(
                "representation has {} matrices for a group of order {}",
                matrices.len(),
                group.order()
            ));
        }
        let dim = matrices[0].rows();
        if dim == 0 {
            return invalid("representation dimension must be positive");
        }
        if matrices.iter().any(|m| m.shape() != (dim, dim)) {
            return invalid("representation matrices must all be square of the same size");
        }
        Ok(Self { group, dim, matrices })
    }

    fn validate(&self) -> Result<()> {
        let g = &self.group;
        if self.matrices[g.identity()] != ComplexMatrix::identity(self.dim) {
            return invalid("identity element must map to the exact identity matrix");
        }
        for (idx, m) in self.matrices.iter().enumerate() {
            if !m.is_finite() {
                return invalid(format!("matrix for element {idx} has non-finite entries"));
            }
            let err = m.matmul(&m.conj_transpose())?.max_abs_diff(&ComplexMatrix::identity(self.dim));
            if err > REP_TOL {
                return invalid(format!("matrix for element {idx} is not unitary (error {err:e})"));
            }
        }
        for a in 0..g.order() {
            for b in 0..g.order() {
                let prod = self.matrices[a].matmul(&self.matrices[b])?;
                let err = prod.max_abs_diff(&self.matrices[g.mul(a, b)]);
                if err > REP_TOL {
                    return invalid(format!(
                        "homomorphism fails at ({a},{b}) with error {err:e}"
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self, g: usize) -> &ComplexMatrix {
        &self.matrices[g]
    }

    pub fn matrices(&self) -> &[ComplexMatrix] {
        &self.matrices
    }

    pub fn same_group(&self, other: &Representation) -> bool {
        Arc::ptr_eq(&self.group, &other.group) || *self.group == *other.group
    }

    pub fn character(&self) -> Vec<Complex64> {
        self.matrices.iter().map(|m| m.trace()).collect()
    }

    pub fn is_real(&self) -> bool {
        self.matrices.iter().all(|m| m.is_real())
    }

    /// True when every matrix is a 0/1 permutation matrix.
    pub fn is_permutation(&self) -> bool {
        self.matrices.iter().all(|m| {
            m.is_real()
                && (0..self.dim).all(|i| {
                    let row = m.row(i);
                    row.iter().all(|z| z.re == 0.0 || z.re == 1.0)
                        && row.iter().filter(|z| z.re == 1.0).count() == 1
                })
                && (0..self.dim).all(|j| (0..self.dim).filter(|&i| m[(i, j)].re == 1.0).count() == 1)
        })
    }
}

pub fn trivial_representation(group: Arc<FiniteGroup>, dim: usize) -> Result<Representation> {
    let matrices = vec![ComplexMatrix::identity(dim); group.order()];
    Representation::new(group, matrices)
}

/// Left regular representation: `matrices[g][x][y] = 1` iff `x = g·y`.
pub fn regular_representation(group: Arc<FiniteGroup>) -> Result<Representation> {
    let n = group.order();
    let one = Complex64::new(1.0, 0.0);
    let matrices = (0..n)
        .map(|g| {
            let mut m = ComplexMatrix::zeros(n, n);
            for y in 0..n {
                m[(group.mul(g, y), y)] = one;
            }
            m
        })
        .collect();
    Representation::new(group, matrices)
}

pub fn tensor_representation(a: &Representation, b: &Representation) -> Result<Representation> {
    if !a.same_group(b) {
        return invalid("tensor product of representations of different groups");
    }
    let matrices = a
        .matrices
        .iter()
        .zip(&b.matrices)
        .map(|(x, y)| x.kron(y))
        .collect();
    Representation::new(a.group.clone(), matrices)
}

pub fn conjugate_representation(a: &Representation) -> Result<Representation> {
    let matrices = a.matrices.iter().map(|m| m.conj()).collect();
    Representation::new(a.group.clone(), matrices)
}

pub fn direct_sum(a: &Representation, b: &Representation) -> Result<Representation> {
    if !a.same_group(b) {
        return invalid("direct sum of representations of different groups");
    }
    let matrices = a
        .matrices
        .iter()
        .zip(&b.matrices)
        .map(|(x, y)| x.direct_sum(y))
        .collect();
    Representation::new(a.group.clone(), matrices)
}

/// `g ↦ U ρ(g) U*` for a unitary `U`. The identity element is pinned to the
/// exact identity matrix.
pub fn change_of_basis(a: &Representation, u: &ComplexMatrix) -> Result<Representation> {
    if u.shape() != (a.dim, a.dim) {
        return invalid("change-of-basis matrix has the wrong shape");
    }
    let ustar = u.conj_transpose();
    let mut matrices = Vec::with_capacity(a.matrices.len());
    for m in &a.matrices {
        matrices.push(u.matmul(m)?.matmul(&ustar)?);
    }
    matrices[a.group.identity()] = ComplexMatrix::identity(a.dim);
    Representation::new(a.group.clone(), matrices)
}

fn require_dihedral(group: &FiniteGroup) -> Result<usize> {
    let n = group.order() / 2;
    if group.order() % 2 != 0 || n == 0 || *group != make_dihedral(n)? {
        return invalid(format!("{} is not a dihedral group in standard indexing", group.name()));
    }
    Ok(n)
}

/// Two-dimensional real representation of `D_n` on the plane: rotations by
/// `2πk/n`, and `s = diag(1, −1)`.
pub fn dihedral_natural(group: Arc<FiniteGroup>) -> Result<Representation> {
    let n = require_dihedral(&group)?;
    let flip = ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])?;
    let mut matrices = Vec::with_capacity(2 * n);
    for s in 0..2 {
        for k in 0..n {
            let rot = if k == 0 {
                ComplexMatrix::identity(2)
            } else {
                let t = 2.0 * PI * k as f64 / n as f64;
                ComplexMatrix::from_real(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()])?
            };
            matrices.push(if s == 0 { rot } else { flip.matmul(&rot)? });
        }
    }
    Representation::new(group, matrices)
}

/// One-dimensional sign representation of `D_n` (reflections act by −1).
pub fn dihedral_sign(group: Arc<FiniteGroup>) -> Result<Representation> {
    let n = require_dihedral(&group)?;
    let matrices = (0..2 * n)
        .map(|g| ComplexMatrix::diagonal(&[Complex64::new(if g < n { 1.0 } else { -1.0 }, 0.0)]))
        .collect();
    Representation::new(group, matrices)
}

/// Labelled list of irreducible representations of a group.
#[derive(Clone, Debug)]
pub struct IrrepCatalogue {
    group: Arc<FiniteGroup>,
    irreps: Vec<(usize, Representation)>,
    completeness_checked: bool,
}

impl IrrepCatalogue {
    /// Checks character orthonormality and, when `check_complete`, the
    /// dimension count `Σ d_π² = |G|`.
    pub fn new(
        group: Arc<FiniteGroup>,
        irreps: Vec<(usize, Representation)>,
        check_complete: bool,
    ) -> Result<Self> {
        if irreps.is_empty() {
            return invalid("irrep catalogue is empty");
        }
        for (_, rep) in &irreps {
            if !Arc::ptr_eq(&rep.group, &group) && *rep.group != *group {
                return invalid("irrep belongs to a different group");
            }
        }
        let chars: Vec<Vec<Complex64>> = irreps.iter().map(|(_, r)| r.character()).collect();
        let gram = character_gram(&chars, group.order());
        let err = gram.max_abs_diff(&ComplexMatrix::identity(chars.len()));
        if err > CHARACTER_TOL {
            return invalid(format!("characters are not orthonormal (error {err:e})"));
        }
        if check_complete {
            let total: usize = irreps.iter().map(|(_, r)| r.dim * r.dim).sum();
            if total != group.order() {
                return invalid(format!(
                    "irrep dimensions give Σd² = {total}, group order is {}",
                    group.order()
                ));
            }
        }
        Ok(Self {
            group,
            irreps,
            completeness_checked: check_complete,
        })
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn len(&self) -> usize {
        self.irreps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.irreps.is_empty()
    }

    pub fn completeness_checked(&self) -> bool {
        self.completeness_checked
    }

    pub fn irreps(&self) -> &[(usize, Representation)] {
        &self.irreps
    }

    pub fn irrep(&self, i: usize) -> &Representation {
        &self.irreps[i].1
    }

    pub fn label(&self, i: usize) -> usize {
        self.irreps[i].0
    }

    pub fn position_of_label(&self, label: usize) -> Option<usize> {
        self.irreps.iter().position(|(l, _)| *l == label)
    }

    /// Position of the trivial irrep, if present.
    pub fn trivial_index(&self) -> Option<usize> {
        self.irreps
            .iter()
            .position(|(_, r)| r.dim == 1 && r.matrices.iter().all(|m| m[(0, 0)] == Complex64::new(1.0, 0.0)))
    }

    /// Gram matrix `⟨χ_π, χ_σ⟩` of the catalogue characters.
    pub fn character_gram(&self) -> ComplexMatrix {
        let chars: Vec<Vec<Complex64>> = self.irreps.iter().map(|(_, r)| r.character()).collect();
        character_gram(&chars, self.group.order())
    }
}

/// `(1/|G|) Σ_g χ_a(g) conj(χ_b(g))` for every pair.
pub fn character_gram(chars: &[Vec<Complex64>], order: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(chars.len(), chars.len(), |a, b| {
        chars[a]
            .iter()
            .zip(&chars[b])
            .map(|(x, y)| x * y.conj())
            .sum::<Complex64>()
            / order as f64
    })
}

/// Character inner product of two representations of the same group.
pub fn character_inner(a: &Representation, b: &Representation) -> Complex64 {
    let n = a.group.order() as f64;
    a.character()
        .iter()
        .zip(b.character())
        .map(|(x, y)| x * y.conj())
        .sum::<Complex64>()
        / n
}

/// `exp(2πi·m/n)` with exact values at the eighth roots of unity.
pub fn root_of_unity(m: usize, n: usize) -> Complex64 {
    let m = m % n;
    if m == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if 4 * m % n == 0 {
        return match 4 * m / n {
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
    }
    Complex64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64)
}

/// The `n` one-dimensional irreps `π_k(g) = exp(2πi·kg/n)` of `C_n`.
pub fn cyclic_irreps(n: usize) -> Result<IrrepCatalogue> {
    let group = Arc::new(make_cyclic(n)?);
    cyclic_irreps_for(group)
}

/// Same as [`cyclic_irreps`] but reusing an existing cyclic group value.
pub fn cyclic_irreps_for(group: Arc<FiniteGroup>) -> Result<IrrepCatalogue> {
    let n = group.order();
    if *group != make_cyclic(n)? {
        return invalid(format!("{} is not a cyclic group in standard indexing", group.name()));
    }
    let mut irreps = Vec::with_capacity(n);
    for k in 0..n {
        irreps.push((k, cyclic_irrep(group.clone(), k)?));
    }
    IrrepCatalogue::new(group, irreps, true)
}

pub fn cyclic_irrep(group: Arc<FiniteGroup>, k: usize) -> Result<Representation> {
    let n = group.order();
    let matrices = (0..n)
        .map(|g| ComplexMatrix::diagonal(&[root_of_unity(k * g, n)]))
        .collect();
    Representation::new(group, matrices)
}
