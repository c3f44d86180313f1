//! Spatial-domain Reynolds projection and its independent commutant oracle.

mod kernel;

pub use kernel::{
    kernel_from_matrix, kernel_matrix, kernel_representations, project_c4_kernel,
    project_c4_kernel_indexwise, rot90_kernel, SteerableKernel, ORIENTATIONS,
};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::group::Representation;
use crate::linalg::ComplexMatrix;

/// Largest `d_out·d_in` the dense commutant oracle accepts.
pub const COMMUTANT_MAX_DIM: usize = 4096;
const DEPENDENCE_TOL: f64 = 1e-10;

/// A weight matrix together with the representations on its domain and codomain.
#[derive(Clone, Debug)]
pub struct LinearLayerSpec {
    weight: ComplexMatrix,
    rep_in: Representation,
    rep_out: Representation,
}

impl LinearLayerSpec {
    pub fn new(weight: ComplexMatrix, rep_in: Representation, rep_out: Representation) -> Result<Self> {
        if !rep_in.same_group(&rep_out) {
            return invalid("input and output representations act through different groups");
        }
        if weight.shape() != (rep_out.dim(), rep_in.dim()) {
            return invalid(format!(
                "weight is {}x{} but representations need {}x{}",
                weight.rows(),
                weight.cols(),
                rep_out.dim(),
                rep_in.dim()
            ));
        }
        if !weight.is_finite() {
            return invalid("weight has non-finite entries");
        }
        Ok(Self {
            weight,
            rep_in,
            rep_out,
        })
    }

    pub fn weight(&self) -> &ComplexMatrix {
        &self.weight
    }

    pub fn rep_in(&self) -> &Representation {
        &self.rep_in
    }

    pub fn rep_out(&self) -> &Representation {
        &self.rep_out
    }

    /// Same representations, different weight.
    pub fn with_weight(&self, weight: ComplexMatrix) -> Result<Self> {
        Self::new(weight, self.rep_in.clone(), self.rep_out.clone())
    }

    /// `max_g ‖ρ_out(g) W − W ρ_in(g)‖_F`.
    pub fn commutation_error(&self) -> f64 {
        commutation_error(&self.weight, &self.rep_in, &self.rep_out)
    }
}

pub fn commutation_error(w: &ComplexMatrix, rep_in: &Representation, rep_out: &Representation) -> f64 {
    (0..rep_in.group().order())
        .map(|g| {
            let lhs = rep_out.matrix(g).matmul(w).expect("shape checked");
            let rhs = w.matmul(rep_in.matrix(g)).expect("shape checked");
            lhs.frobenius_distance(&rhs)
        })
        .fold(0.0, f64::max)
}

/// `P(W) = (1/|G|) Σ_g ρ_out(g)* W ρ_in(g)`.
pub fn project_finite(layer: &LinearLayerSpec) -> Result<ComplexMatrix> {
    let w = &layer.weight;
    let order = layer.rep_in.group().order();
    let mut acc = ComplexMatrix::zeros(w.rows(), w.cols());
    for g in 0..order {
        let term = layer.rep_out.matrix(g).adjoint_matmul(w)?.matmul(layer.rep_in.matrix(g))?;
        acc.add_assign(&term)?;
    }
    Ok(acc.scale_real(1.0 / order as f64))
}

/// Returns `(P(W), W − P(W))`.
pub fn orbit_decompose(layer: &LinearLayerSpec) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let p = project_finite(layer)?;
    let anti = layer.weight.sub(&p)?;
    Ok((p, anti))
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// Removes the components of `v` along an orthonormal set, twice.
fn orthogonalise(v: &mut [Complex64], basis: &[Vec<Complex64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            for (x, y) in v.iter_mut().zip(q) {
                *x -= c * y;
            }
        }
    }
}

fn push_if_independent(mut v: Vec<Complex64>, basis: &mut Vec<Vec<Complex64>>, others: &[Vec<Complex64>]) -> bool {
    orthogonalise(&mut v, others);
    orthogonalise(&mut v, basis);
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n < DEPENDENCE_TOL {
        return false;
    }
    v.iter_mut().for_each(|z| *z /= n);
    basis.push(v);
    true
}

/// Orthonormal basis (row-major vectorisation) of the commutant
/// `{X : ρ_out(g) X = X ρ_in(g) ∀g}`.
pub fn commutant_basis(rep_in: &Representation, rep_out: &Representation) -> Result<Vec<Vec<Complex64>>> {
    if !rep_in.same_group(rep_out) {
        return invalid("input and output representations act through different groups");
    }
    let (d_out, d_in) = (rep_out.dim(), rep_in.dim());
    let d = d_out * d_in;
    if d > COMMUTANT_MAX_DIM {
        return Err(Error::Capacity(format!(
            "commutant oracle supports d_out·d_in ≤ {COMMUTANT_MAX_DIM}, got {d}"
        )));
    }
    // Row for constraint (g,i,j): coefficient of X[k][l] is
    // ρ_out[i][k]·δ_lj − δ_ik·ρ_in[l][j]. A vector x satisfies it iff x ⟂ conj(row).
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for g in 0..rep_in.group().order() {
        let (ro, ri) = (rep_out.matrix(g), rep_in.matrix(g));
        for i in 0..d_out {
            for j in 0..d_in {
                let mut row = vec![Complex64::new(0.0, 0.0); d];
                for k in 0..d_out {
                    row[k * d_in + j] += ro[(i, k)].conj();
                }
                for l in 0..d_in {
                    row[i * d_in + l] -= ri[(l, j)].conj();
                }
                if row.iter().any(|z| z.norm() > 0.0) {
                    push_if_independent(row, &mut rows, &[]);
                }
                if rows.len() == d {
                    return Ok(Vec::new());
                }
            }
        }
    }
    let mut null: Vec<Vec<Complex64>> = Vec::new();
    for m in 0..d {
        if rows.len() + null.len() == d {
            break;
        }
        let mut e = vec![Complex64::new(0.0, 0.0); d];
        e[m] = Complex64::new(1.0, 0.0);
        push_if_independent(e, &mut null, &rows);
    }
    Ok(null)
}

/// Orthogonal projection of the vectorised weight onto the commutant basis.
pub fn commutant_oracle(layer: &LinearLayerSpec) -> Result<ComplexMatrix> {
    let basis = commutant_basis(&layer.rep_in, &layer.rep_out)?;
    let x = layer.weight.as_slice();
    let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
    for q in &basis {
        let c = dot(x, q);
        for (o, y) in out.iter_mut().zip(q) {
            *o += c * y;
        }
    }
    ComplexMatrix::from_vec(layer.weight.rows(), layer.weight.cols(), out)
}
