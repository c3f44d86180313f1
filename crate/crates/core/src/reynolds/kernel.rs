//! C4 steerable-kernel projection.
//!
//! Kernels are real arrays indexed `[p][q][α][β][i][j]` with `p < c_out`,
//! `q < c_in`, orientations `α, β < 4` and spatial indices `i, j < s`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::group::{make_cyclic, Representation};
use crate::linalg::ComplexMatrix;

pub const ORIENTATIONS: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct SteerableKernel {
    c_out: usize,
    c_in: usize,
    size: usize,
    values: Vec<f64>,
}

impl SteerableKernel {
    pub fn new(c_out: usize, c_in: usize, size: usize, values: Vec<f64>) -> Result<Self> {
        if c_out == 0 || c_in == 0 {
            return invalid("kernel channel counts must be positive");
        }
        if size % 2 == 0 {
            return invalid(format!("kernel size must be odd, got {size}"));
        }
        let expected = c_out * c_in * ORIENTATIONS * ORIENTATIONS * size * size;
        if values.len() != expected {
            return invalid(format!("kernel needs {expected} values, got {}", values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("kernel has non-finite values");
        }
        Ok(Self {
            c_out,
            c_in,
            size,
            values,
        })
    }

    pub fn zeros(c_out: usize, c_in: usize, size: usize) -> Result<Self> {
        let n = c_out * c_in * ORIENTATIONS * ORIENTATIONS * size * size;
        Self::new(c_out, c_in, size, vec![0.0; n])
    }

    pub fn from_fn(
        c_out: usize,
        c_in: usize,
        size: usize,
        mut f: impl FnMut([usize; 6]) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(c_out * c_in * 16 * size * size);
        for p in 0..c_out {
            for q in 0..c_in {
                for a in 0..ORIENTATIONS {
                    for b in 0..ORIENTATIONS {
                        for i in 0..size {
                            for j in 0..size {
                                values.push(f([p, q, a, b, i, j]));
                            }
                        }
                    }
                }
            }
        }
        Self::new(c_out, c_in, size, values)
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn shape(&self) -> [usize; 6] {
        [self.c_out, self.c_in, ORIENTATIONS, ORIENTATIONS, self.size, self.size]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn offset(&self, [p, q, a, b, i, j]: [usize; 6]) -> usize {
        let s = self.size;
        ((((p * self.c_in + q) * ORIENTATIONS + a) * ORIENTATIONS + b) * s + i) * s + j
    }

    pub fn get(&self, idx: [usize; 6]) -> f64 {
        self.values[self.offset(idx)]
    }

    pub fn set(&mut self, idx: [usize; 6], v: f64) {
        let o = self.offset(idx);
        self.values[o] = v;
    }

    /// Entrywise inner product.
    pub fn dot(&self, other: &SteerableKernel) -> f64 {
        assert_eq!(self.shape(), other.shape(), "kernel shape mismatch");
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs_diff(&self, other: &SteerableKernel) -> f64 {
        assert_eq!(self.shape(), other.shape(), "kernel shape mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Source index of a `r`-fold quarter turn: `out[a][b] = in[rot_src(a, b)]`.
/// One turn moves the value at `(i, j)` to `(j, s−1−i)`.
fn rot_source(i: usize, j: usize, r: usize, s: usize) -> (usize, usize) {
    let (mut a, mut b) = (i, j);
    for _ in 0..r % 4 {
        // inverse of (i, j) ↦ (j, s−1−i)
        let (na, nb) = (s - 1 - b, a);
        a = na;
        b = nb;
    }
    (a, b)
}

/// Rotates every spatial slice by `r` quarter turns.
pub fn rot90_kernel(k: &SteerableKernel, r: usize) -> SteerableKernel {
    let s = k.size;
    let mut out = k.clone();
    let slices = k.values.len() / (s * s);
    for t in 0..slices {
        let base = t * s * s;
        for i in 0..s {
            for j in 0..s {
                let (a, b) = rot_source(i, j, r, s);
                out.values[base + i * s + j] = k.values[base + a * s + b];
            }
        }
    }
    out
}

/// Cyclic shift with `S[α][β] = 1` iff `α = β + 1 (mod 4)`, raised to `r`.
fn shift_matrix(r: usize) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for (b, _) in m.clone().iter().enumerate() {
        m[(b + r) % 4][b] = 1.0;
    }
    m
}

fn mat4(a: &[[f64; 4]; 4], b: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// `P(K) = ¼ Σ_r S^r (rot_r K) S^{−r}`, evaluated with explicit 4×4
/// orientation matrices at every `(p, q, i, j)`.
pub fn project_c4_kernel(k: &SteerableKernel) -> Result<SteerableKernel> {
    SteerableKernel::new(k.c_out, k.c_in, k.size, k.values.clone())?;
    let s = k.size;
    let rotated: Vec<SteerableKernel> = (0..4).map(|r| rot90_kernel(k, r)).collect();
    let mut out = SteerableKernel::zeros(k.c_out, k.c_in, s)?;
    for p in 0..k.c_out {
        for q in 0..k.c_in {
            for i in 0..s {
                for j in 0..s {
                    let mut terms = Vec::with_capacity(4);
                    for (r, rk) in rotated.iter().enumerate() {
                        let mut x = [[0.0; 4]; 4];
                        for (a, row) in x.iter_mut().enumerate() {
                            for (b, v) in row.iter_mut().enumerate() {
                                *v = rk.get([p, q, a, b, i, j]);
                            }
                        }
                        let conj = mat4(&mat4(&shift_matrix(r), &x), &shift_matrix((4 - r) % 4));
                        terms.push(conj);
                    }
                    for a in 0..4 {
                        for b in 0..4 {
                            let sum = ((terms[0][a][b] + terms[1][a][b]) + terms[2][a][b]) + terms[3][a][b];
                            out.set([p, q, a, b, i, j], 0.25 * sum);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Index-wise form: `[P(K)]_{p,α;q,β}[i,j] = ¼ Σ_r [rot_r K]_{p,α−r;q,β−r}[i,j]`.
pub fn project_c4_kernel_indexwise(k: &SteerableKernel) -> Result<SteerableKernel> {
    SteerableKernel::new(k.c_out, k.c_in, k.size, k.values.clone())?;
    let s = k.size;
    SteerableKernel::from_fn(k.c_out, k.c_in, s, |[p, q, a, b, i, j]| {
        let term = |r: usize| {
            let (si, sj) = rot_source(i, j, r, s);
            k.get([p, q, (a + 4 - r) % 4, (b + 4 - r) % 4, si, sj])
        };
        0.25 * (((term(0) + term(1)) + term(2)) + term(3))
    })
}

/// Flattens a kernel to a matrix with rows `(p, α)` and columns `(q, β, i, j)`.
pub fn kernel_matrix(k: &SteerableKernel) -> ComplexMatrix {
    let cols = k.c_in * 4 * k.size * k.size;
    let block = k.size * k.size;
    ComplexMatrix::from_fn(k.c_out * 4, cols, |row, col| {
        let (p, a) = (row / 4, row % 4);
        let q = col / (4 * block);
        let b = (col / block) % 4;
        let (i, j) = ((col % block) / k.size, col % k.size);
        Complex64::new(k.get([p, q, a, b, i, j]), 0.0)
    })
}

/// Inverse of [`kernel_matrix`]; imaginary parts must vanish.
pub fn kernel_from_matrix(m: &ComplexMatrix, c_out: usize, c_in: usize, size: usize) -> Result<SteerableKernel> {
    if m.shape() != (c_out * 4, c_in * 4 * size * size) {
        return invalid("matrix shape does not match the kernel shape");
    }
    if m.as_slice().iter().any(|z| z.im.abs() > 1e-12) {
        return invalid("kernel matrix has non-negligible imaginary parts");
    }
    let block = size * size;
    SteerableKernel::from_fn(c_out, c_in, size, |[p, q, a, b, i, j]| {
        m[(p * 4 + a, ((q * 4 + b) * block) + i * size + j)].re
    })
}

/// Permutation representations of C4 on the flattened kernel rows and
/// columns: `I_Cout ⊗ S^r` and `I_Cin ⊗ S^r ⊗ Rot_r`.
pub fn kernel_representations(c_out: usize, c_in: usize, size: usize) -> Result<(Representation, Representation)> {
    if size % 2 == 0 {
        return invalid(format!("kernel size must be odd, got {size}"));
    }
    let group = Arc::new(make_cyclic(4)?);
    let one = Complex64::new(1.0, 0.0);
    let shift = |r: usize| {
        let m = shift_matrix(r);
        ComplexMatrix::from_fn(4, 4, |a, b| Complex64::new(m[a][b], 0.0))
    };
    let rot = |r: usize| {
        let n = size * size;
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..size {
            for j in 0..size {
                let (a, b) = rot_source(i, j, r, size);
                m[(i * size + j, a * size + b)] = one;
            }
        }
        m
    };
    let outs = (0..4).map(|r| ComplexMatrix::identity(c_out).kron(&shift(r))).collect();
    let ins = (0..4)
        .map(|r| ComplexMatrix::identity(c_in).kron(&shift(r)).kron(&rot(r)))
        .collect();
    Ok((
        Representation::new(group.clone(), ins)?,
        Representation::new(group, outs)?,
    ))
}
