//! Fourier analysis on finite groups and projections by block masking.
//!
//! Signals in `L²(G, V)` are stored with the element index slowest and the
//! fiber index fastest, so the group acts through `kron(τ(g), ρ(g))` where
//! `τ` is the regular representation. The Peter–Weyl frame uses the basis
//! functions `e_{π,a,b}(x) = sqrt(d_π/|G|)·π(x)_{ab}`; coordinates are laid
//! out by irrep in catalogue order, and within an irrep block by `a`
//! (slowest), then `b`, then the fiber index.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};
use crate::group::{FiniteGroup, IrrepCatalogue, Representation};
use crate::linalg::{solve_least_squares, ComplexMatrix};

/// Threshold on `|⟨χ_A, χ_B⟩|` below which two block actions share no
/// irreducible constituent and the connecting block is zeroed outright.
const SCHUR_TOL: f64 = 1e-9;

/// A complex-valued function on a finite group.
#[derive(Clone, Debug)]
pub struct GroupFunction {
    group: Arc<FiniteGroup>,
    values: Vec<Complex64>,
}

impl GroupFunction {
    pub fn new(group: Arc<FiniteGroup>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != group.order() {
            return invalid(format!(
                "group function has {} values for a group of order {}",
                values.len(),
                group.order()
            ));
        }
        if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return invalid("group function has non-finite values");
        }
        Ok(Self { group, values })
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `⟨f, h⟩ = (1/|G|) Σ f(g)·conj(h(g))`.
    pub fn inner(&self, other: &GroupFunction) -> Complex64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum::<Complex64>()
            / self.values.len() as f64
    }

    /// Left translate `x ↦ f(h⁻¹x)`.
    pub fn translate(&self, h: usize) -> GroupFunction {
        let hinv = self.group.inverse(h);
        let values = (0..self.values.len()).map(|x| self.values[self.group.mul(hinv, x)]).collect();
        GroupFunction {
            group: self.group.clone(),
            values,
        }
    }
}

fn same_group(a: &FiniteGroup, b: &Arc<FiniteGroup>) -> bool {
    std::ptr::eq(a, b.as_ref()) || *a == **b
}

/// Fourier coefficients `f̂(π)`, one block per catalogue entry.
#[derive(Clone, Debug)]
pub struct FourierBlocks<'a> {
    catalogue: &'a IrrepCatalogue,
    blocks: Vec<ComplexMatrix>,
}

impl<'a> FourierBlocks<'a> {
    pub fn new(catalogue: &'a IrrepCatalogue, blocks: Vec<ComplexMatrix>) -> Result<Self> {
        if blocks.len() != catalogue.len() {
            return invalid("one Fourier block per irrep is required");
        }
        for (i, b) in blocks.iter().enumerate() {
            let d = catalogue.irrep(i).dim();
            if b.shape() != (d, d) {
                return invalid(format!("Fourier block {i} must be {d}x{d}"));
            }
        }
        Ok(Self { catalogue, blocks })
    }

    pub fn catalogue(&self) -> &IrrepCatalogue {
        self.catalogue
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &ComplexMatrix {
        &self.blocks[i]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut ComplexMatrix {
        &mut self.blocks[i]
    }
}

/// `f̂(π) = (1/|G|) Σ_g f(g)·π(g)*`.
pub fn fourier_transform<'a>(f: &GroupFunction, cat: &'a IrrepCatalogue) -> Result<FourierBlocks<'a>> {
    if !same_group(&f.group, cat.group()) {
        return invalid("function and catalogue live on different groups");
    }
    let n = f.values.len() as f64;
    let blocks = cat
        .irreps()
        .iter()
        .map(|(_, rep)| {
            let mut acc = ComplexMatrix::zeros(rep.dim(), rep.dim());
            for (g, fg) in f.values.iter().enumerate() {
                let term = rep.matrix(g).conj_transpose().scale(*fg);
                acc.add_assign(&term).expect("same shape");
            }
            acc.scale_real(1.0 / n)
        })
        .collect();
    FourierBlocks::new(cat, blocks)
}

/// `f(g) = Σ_π d_π·tr(f̂(π)·π(g))`.
pub fn inverse_fourier_transform(b: &FourierBlocks<'_>) -> Result<GroupFunction> {
    let cat = b.catalogue;
    if !cat.completeness_checked() {
        return invalid("inverse Fourier transform needs a complete irrep catalogue");
    }
    let group = cat.group().clone();
    let values = (0..group.order())
        .map(|g| {
            cat.irreps()
                .iter()
                .zip(&b.blocks)
                .map(|((_, rep), blk)| {
                    let d = rep.dim();
                    let m = rep.matrix(g);
                    let mut tr = Complex64::new(0.0, 0.0);
                    for i in 0..d {
                        for k in 0..d {
                            tr += blk[(i, k)] * m[(k, i)];
                        }
                    }
                    tr * d as f64
                })
                .sum()
        })
        .collect();
    GroupFunction::new(group, values)
}

/// Keeps only the trivial Fourier block and inverts.
pub fn project_invariant(f: &GroupFunction, cat: &IrrepCatalogue) -> Result<GroupFunction> {
    if !cat.completeness_checked() {
        return invalid("invariant projection needs a complete irrep catalogue");
    }
    let trivial = cat
        .trivial_index()
        .ok_or_else(|| crate::Error::InvalidArgument("catalogue has no trivial irrep".into()))?;
    let mut blocks = fourier_transform(f, cat)?;
    for i in 0..cat.len() {
        if i != trivial {
            let d = cat.irrep(i).dim();
            *blocks.block_mut(i) = ComplexMatrix::zeros(d, d);
        }
    }
    inverse_fourier_transform(&blocks)
}

/// Position of each irrep block in Peter–Weyl coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeterWeylLayout {
    /// Irrep dimensions in catalogue order.
    pub irrep_dims: Vec<usize>,
    pub fiber_dim: usize,
    /// Start offset of each irrep block.
    pub offsets: Vec<usize>,
}

impl PeterWeylLayout {
    pub fn new(cat: &IrrepCatalogue, fiber_dim: usize) -> Self {
        let irrep_dims: Vec<usize> = cat.irreps().iter().map(|(_, r)| r.dim()).collect();
        let mut offsets = Vec::with_capacity(irrep_dims.len());
        let mut at = 0;
        for d in &irrep_dims {
            offsets.push(at);
            at += d * d * fiber_dim;
        }
        Self {
            irrep_dims,
            fiber_dim,
            offsets,
        }
    }

    pub fn block_size(&self, i: usize) -> usize {
        self.irrep_dims[i] * self.irrep_dims[i] * self.fiber_dim
    }

    pub fn total(&self) -> usize {
        (0..self.irrep_dims.len()).map(|i| self.block_size(i)).sum()
    }

    /// Coordinate of `(π, a, b, v)`.
    pub fn index(&self, irrep: usize, a: usize, b: usize, v: usize) -> usize {
        let d = self.irrep_dims[irrep];
        self.offsets[irrep] + (a * d + b) * self.fiber_dim + v
    }
}

/// Unitary `U` with `U[(π,a,b,v), (x,v')] = conj(e_{π,a,b}(x))·δ_{vv'}`.
pub fn peter_weyl_basis(cat: &IrrepCatalogue, fiber_dim: usize) -> Result<(ComplexMatrix, PeterWeylLayout)> {
    if !cat.completeness_checked() {
        return invalid("Peter–Weyl change of basis needs a complete irrep catalogue");
    }
    let order = cat.group().order();
    let layout = PeterWeylLayout::new(cat, fiber_dim);
    let n = order * fiber_dim;
    let mut u = ComplexMatrix::zeros(layout.total(), n);
    for (p, (_, rep)) in cat.irreps().iter().enumerate() {
        let d = rep.dim();
        let scale = (d as f64 / order as f64).sqrt();
        for x in 0..order {
            let m = rep.matrix(x);
            for a in 0..d {
                for b in 0..d {
                    let coeff = m[(a, b)].conj() * scale;
                    for v in 0..fiber_dim {
                        u[(layout.index(p, a, b, v), x * fiber_dim + v)] = coeff;
                    }
                }
            }
        }
    }
    Ok((u, layout))
}

/// An operator expressed in Peter–Weyl coordinates on both sides.
#[derive(Clone, Debug)]
pub struct OperatorBlocks {
    pub layout_out: PeterWeylLayout,
    pub layout_in: PeterWeylLayout,
    pub matrix: ComplexMatrix,
}

impl OperatorBlocks {
    /// Block `T̂(π, σ)` by catalogue position.
    pub fn block(&self, out_irrep: usize, in_irrep: usize) -> ComplexMatrix {
        let r0 = self.layout_out.offsets[out_irrep];
        let c0 = self.layout_in.offsets[in_irrep];
        ComplexMatrix::from_fn(
            self.layout_out.block_size(out_irrep),
            self.layout_in.block_size(in_irrep),
            |i, j| self.matrix[(r0 + i, c0 + j)],
        )
    }

    pub fn set_block(&mut self, out_irrep: usize, in_irrep: usize, b: &ComplexMatrix) {
        let r0 = self.layout_out.offsets[out_irrep];
        let c0 = self.layout_in.offsets[in_irrep];
        assert_eq!(
            b.shape(),
            (self.layout_out.block_size(out_irrep), self.layout_in.block_size(in_irrep)),
            "block shape mismatch"
        );
        for i in 0..b.rows() {
            for j in 0..b.cols() {
                self.matrix[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    pub fn irrep_count(&self) -> usize {
        self.layout_out.irrep_dims.len()
    }
}

fn check_operator_shape(
    t: &ComplexMatrix,
    cat: &IrrepCatalogue,
    fiber_in: &Representation,
    fiber_out: &Representation,
) -> Result<()> {
    if !same_group(fiber_in.group(), cat.group()) || !same_group(fiber_out.group(), cat.group()) {
        return invalid("fiber representations and catalogue live on different groups");
    }
    let n = cat.group().order();
    if t.shape() != (n * fiber_out.dim(), n * fiber_in.dim()) {
        return invalid(format!(
            "operator is {}x{}, expected {}x{}",
            t.rows(),
            t.cols(),
            n * fiber_out.dim(),
            n * fiber_in.dim()
        ));
    }
    Ok(())
}

/// `T̂ = U_out·T·U_in*`.
pub fn operator_fourier(
    t: &ComplexMatrix,
    cat: &IrrepCatalogue,
    fiber_in: &Representation,
    fiber_out: &Representation,
) -> Result<OperatorBlocks> {
    check_operator_shape(t, cat, fiber_in, fiber_out)?;
    let (u_out, layout_out) = peter_weyl_basis(cat, fiber_out.dim())?;
    let (u_in, layout_in) = peter_weyl_basis(cat, fiber_in.dim())?;
    let matrix = u_out.matmul(t)?.matmul(&u_in.conj_transpose())?;
    Ok(OperatorBlocks {
        layout_out,
        layout_in,
        matrix,
    })
}

/// `T = U_out*·T̂·U_in`.
pub fn inverse_operator_fourier(blocks: &OperatorBlocks, cat: &IrrepCatalogue) -> Result<ComplexMatrix> {
    let (u_out, _) = peter_weyl_basis(cat, blocks.layout_out.fiber_dim)?;
    let (u_in, _) = peter_weyl_basis(cat, blocks.layout_in.fiber_dim)?;
    u_out.adjoint_matmul(&blocks.matrix)?.matmul(&u_in)
}

/// Action of `g` on the Peter–Weyl block of `irrep`: `π̄(g) ⊗ I ⊗ ρ(g)`.
fn block_action(irrep: &Representation, fiber: &Representation, g: usize) -> ComplexMatrix {
    irrep
        .matrix(g)
        .conj()
        .kron(&ComplexMatrix::identity(irrep.dim()))
        .kron(fiber.matrix(g))
}

fn block_character(irrep: &Representation, fiber: &Representation) -> Vec<Complex64> {
    let d = irrep.dim() as f64;
    irrep
        .character()
        .iter()
        .zip(fiber.character())
        .map(|(chi, phi)| chi.conj() * d * phi)
        .collect()
}

/// Spectral-domain projection onto the operators intertwining `τ⊗ρ_in` and
/// `τ⊗ρ_out`.
///
/// Diagonal blocks are replaced by their Haar average under the block
/// actions. Off-diagonal blocks between actions with no common irreducible
/// constituent are zeroed (Schur); the remaining ones, which only arise for
/// non-scalar fibers, are averaged in the same way.
pub fn project_equivariant_spectral(
    t: &ComplexMatrix,
    cat: &IrrepCatalogue,
    fiber_in: &Representation,
    fiber_out: &Representation,
) -> Result<ComplexMatrix> {
    let mut blocks = operator_fourier(t, cat, fiber_in, fiber_out)?;
    let order = cat.group().order();
    let chars_out: Vec<Vec<Complex64>> =
        cat.irreps().iter().map(|(_, r)| block_character(r, fiber_out)).collect();
    let chars_in: Vec<Vec<Complex64>> =
        cat.irreps().iter().map(|(_, r)| block_character(r, fiber_in)).collect();
    for p in 0..cat.len() {
        for s in 0..cat.len() {
            let shared: Complex64 = chars_out[p]
                .iter()
                .zip(&chars_in[s])
                .map(|(a, b)| a * b.conj())
                .sum::<Complex64>()
                / order as f64;
            let b = blocks.block(p, s);
            let projected = if p != s && shared.norm() < SCHUR_TOL {
                ComplexMatrix::zeros(b.rows(), b.cols())
            } else {
                let mut acc = ComplexMatrix::zeros(b.rows(), b.cols());
                for g in 0..order {
                    let a_out = block_action(cat.irrep(p), fiber_out, g);
                    let a_in = block_action(cat.irrep(s), fiber_in, g);
                    acc.add_assign(&a_out.adjoint_matmul(&b)?.matmul(&a_in)?)?;
                }
                acc.scale_real(1.0 / order as f64)
            };
            blocks.set_block(p, s, &projected);
        }
    }
    inverse_operator_fourier(&blocks, cat)
}

/// Least-squares fit of `block ≈ I_{d} ⊗ B`; returns `(B, residual)`.
pub fn fit_identity_tensor(block: &ComplexMatrix, d: usize) -> Result<(ComplexMatrix, f64)> {
    if d == 0 || block.rows() % d != 0 || block.cols() % d != 0 {
        return invalid("block shape is not divisible by the irrep dimension");
    }
    let (m, n) = (block.rows() / d, block.cols() / d);
    // one unknown per entry of B; kron(I, B)[(a·m+i, c·n+j)] = δ_ac·B[i][j]
    let unknowns = m * n;
    let equations = block.rows() * block.cols();
    let mut design = ComplexMatrix::zeros(equations, unknowns);
    let mut rhs = ComplexMatrix::zeros(equations, 1);
    for r in 0..block.rows() {
        for c in 0..block.cols() {
            let eq = r * block.cols() + c;
            rhs[(eq, 0)] = block[(r, c)];
            if r / m == c / n {
                design[(eq, (r % m) * n + c % n)] = Complex64::new(1.0, 0.0);
            }
        }
    }
    let sol = solve_least_squares(&design, &rhs)?;
    let b = ComplexMatrix::from_vec(m, n, sol.solution.into_vec())?;
    Ok((b, sol.residual))
}

/// Nearest circulant via the 2-D cross-spectrum `F·T·F⁻¹`: only its
/// diagonal survives, which is then transformed back.
pub fn project_equivariant_circulant(t: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !t.is_square() {
        return invalid("circulant projection needs a square matrix");
    }
    let n = t.rows();
    if n == 0 {
        return Ok(t.clone());
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    // column transforms: X = F·T
    let mut x = t.transpose();
    for col in x.as_mut_slice().chunks_mut(n) {
        fwd.process(col);
    }
    let mut x = x.transpose();
    // row inverse transforms: X·F⁻¹ = (1/n)·IFFT along rows
    for row in x.as_mut_slice().chunks_mut(n) {
        inv.process(row);
    }
    let mut spectrum: Vec<Complex64> = (0..n).map(|k| x[(k, k)] / n as f64).collect();
    // F⁻¹·diag(d)·F is circulant with first column IFFT(d)/n
    inv.process(&mut spectrum);
    let first_col: Vec<Complex64> = spectrum.iter().map(|z| z / n as f64).collect();
    Ok(ComplexMatrix::from_fn(n, n, |i, j| first_col[(i + n - j) % n]))
}

/// Reference implementation: mean over each wrapped diagonal.
pub fn circulant_diagonal_mean(t: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !t.is_square() {
        return invalid("circulant projection needs a square matrix");
    }
    let n = t.rows();
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| t[((i + k) % n, (j + k) % n)]).sum::<Complex64>() / n as f64
    }))
}

/// Zeroes every block connecting different harmonic degrees. Rows and
/// columns are laid out degree-major, channel-minor.
pub fn harmonic_mask(weights: &ComplexMatrix, degrees_out: &[i32], degrees_in: &[i32]) -> Result<ComplexMatrix> {
    let mask = harmonic_mask_pattern(weights.rows(), weights.cols(), degrees_out, degrees_in)?;
    Ok(ComplexMatrix::from_fn(weights.rows(), weights.cols(), |i, j| {
        if mask[i * weights.cols() + j] {
            weights[(i, j)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

/// Boolean keep-pattern (row-major) used by [`harmonic_mask`].
pub fn harmonic_mask_pattern(
    rows: usize,
    cols: usize,
    degrees_out: &[i32],
    degrees_in: &[i32],
) -> Result<Vec<bool>> {
    if degrees_out.is_empty() || degrees_in.is_empty() {
        return invalid("degree lists must be non-empty");
    }
    if rows % degrees_out.len() != 0 || cols % degrees_in.len() != 0 {
        return invalid(format!(
            "a {rows}x{cols} weight does not split into {}x{} degree blocks",
            degrees_out.len(),
            degrees_in.len()
        ));
    }
    let c_out = rows / degrees_out.len();
    let c_in = cols / degrees_in.len();
    let mut mask = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            mask.push(degrees_out[i / c_out] == degrees_in[j / c_in]);
        }
    }
    Ok(mask)
}
