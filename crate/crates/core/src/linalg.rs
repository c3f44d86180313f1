//! Dense complex matrices and the norm family used by the penalties.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return invalid(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diagonal(values: &[Complex64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    /// Standard product `self · rhs`.
    pub fn matmul(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != rhs.rows {
            return invalid(format!(
                "matmul shape mismatch: {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            ));
        }
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self* · rhs` without materialising the adjoint.
    pub fn adjoint_matmul(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.rows != rhs.rows {
            return invalid(format!(
                "adjoint product shape mismatch: ({}x{})* by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            ));
        }
        let mut out = ComplexMatrix::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
            for i in 0..self.cols {
                let a = self.data[k * self.cols + i].conj();
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.cols {
            return invalid(format!(
                "matvec shape mismatch: {}x{} by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            ));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `self* · v`.
    pub fn adjoint_matvec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.rows {
            return invalid(format!(
                "adjoint matvec shape mismatch: ({}x{})* by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            ));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for (k, vk) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(k)) {
                *o += a.conj() * vk;
            }
        }
        Ok(out)
    }

    pub fn conj_transpose(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Elementwise complex conjugate.
    pub fn conj(&self) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn scale_real(&self, c: f64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn add(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn add_assign(&mut self, rhs: &ComplexMatrix) -> Result<()> {
        self.check_same_shape(rhs, "add")?;
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
        Ok(())
    }

    fn zip_with(
        &self,
        rhs: &ComplexMatrix,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<ComplexMatrix> {
        self.check_same_shape(rhs, "elementwise op")?;
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    fn check_same_shape(&self, rhs: &ComplexMatrix, what: &str) -> Result<()> {
        if self.shape() != rhs.shape() {
            return invalid(format!(
                "{what}: shape mismatch {}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            ));
        }
        Ok(())
    }

    /// Kronecker product; `self` indexes the slow (outer) block position.
    pub fn kron(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let (r2, c2) = rhs.shape();
        ComplexMatrix::from_fn(self.rows * r2, self.cols * c2, |i, j| {
            self[(i / r2, j / c2)] * rhs[(i % r2, j % c2)]
        })
    }

    /// Block-diagonal direct sum.
    pub fn direct_sum(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.rows + rhs.rows, self.cols + rhs.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)];
            }
        }
        for i in 0..rhs.rows {
            for j in 0..rhs.cols {
                out[(self.rows + i, self.cols + j)] = rhs[(i, j)];
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest entrywise modulus of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &ComplexMatrix) -> f64 {
        assert_eq!(self.shape(), rhs.shape(), "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius distance, panicking on shape mismatch (test/diagnostic helper).
    pub fn frobenius_distance(&self, rhs: &ComplexMatrix) -> f64 {
        assert_eq!(self.shape(), rhs.shape(), "frobenius_distance shape mismatch");
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.matmul(b)
}

pub fn conj_transpose(a: &ComplexMatrix) -> ComplexMatrix {
    a.conj_transpose()
}

/// Hilbert–Schmidt inner product `Σ a_ij · conj(b_ij)`.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Complex64> {
    if a.shape() != b.shape() {
        return invalid(format!(
            "hs_inner shape mismatch: {}x{} vs {}x{}",
            a.rows, a.cols, b.rows, b.cols
        ));
    }
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x * y.conj()).sum())
}

/// Matrix norm selector for penalties and defect metrics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NormKind {
    Spectral,
    Frobenius,
    EntryInfinity,
    /// Row-wise mixed norm: inner exponent `p` over columns, outer `q` over rows.
    Mixed { p: u8, q: u8 },
}

impl NormKind {
    pub fn mixed(p: u8, q: u8) -> Result<Self> {
        if !(1..=3).contains(&p) || !(1..=3).contains(&q) {
            return invalid(format!("mixed norm exponents must lie in {{1,2,3}}, got ({p},{q})"));
        }
        Ok(NormKind::Mixed { p, q })
    }

    pub fn validate(self) -> Result<()> {
        if let NormKind::Mixed { p, q } = self {
            NormKind::mixed(p, q)?;
        }
        Ok(())
    }
}

impl Default for NormKind {
    fn default() -> Self {
        NormKind::Frobenius
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormKind::Spectral => write!(f, "spectral"),
            NormKind::Frobenius => write!(f, "frobenius"),
            NormKind::EntryInfinity => write!(f, "infinity"),
            NormKind::Mixed { p, q } => write!(f, "mixed:{p},{q}"),
        }
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "spectral" | "operator" | "2" => Ok(NormKind::Spectral),
            "frobenius" | "fro" | "f" => Ok(NormKind::Frobenius),
            "infinity" | "inf" | "entry-infinity" => Ok(NormKind::EntryInfinity),
            other => {
                let rest = other
                    .strip_prefix("mixed:")
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown norm '{other}'")))?;
                let (p, q) = rest
                    .split_once(',')
                    .ok_or_else(|| Error::InvalidArgument(format!("malformed mixed norm '{other}'")))?;
                let parse = |t: &str| {
                    t.trim()
                        .parse::<u8>()
                        .map_err(|_| Error::InvalidArgument(format!("malformed mixed norm '{other}'")))
                };
                NormKind::mixed(parse(p)?, parse(q)?)
            }
        }
    }
}

impl TryFrom<String> for NormKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<NormKind> for String {
    fn from(k: NormKind) -> String {
        k.to_string()
    }
}

pub const POWER_ITERATION_TOL: f64 = 1e-12;
pub const POWER_ITERATION_MAX_ITERS: usize = 10_000;

/// Top singular triple `(σ, u, v)` with `A v = σ u`.
#[derive(Clone, Debug)]
pub struct SingularTriple {
    pub sigma: f64,
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

fn start_vector(n: usize) -> Vec<Complex64> {
    // ones plus a small low-discrepancy perturbation (fractional golden-ratio
    // sequence) so no structured singular vector is exactly orthogonal to it
    const PHI: f64 = 0.618_033_988_749_894_9;
    let mut v: Vec<Complex64> = (0..n)
        .map(|j| {
            let frac = ((j as f64 + 1.0) * PHI).fract();
            Complex64::new(1.0 + 1e-3 * frac, 0.0)
        })
        .collect();
    normalise(&mut v);
    v
}

fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalise(v: &mut [Complex64]) -> f64 {
    let n = vec_norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|z| *z /= n);
    }
    n
}

const SQUARING_MAX_DIM: usize = 256;
const SQUARING_STEPS: usize = 40;

/// Applies `(A*A)^(2^k)` to `v` by repeated squaring of the Gram matrix,
/// i.e. `2^k` power steps at once. This removes the slow convergence of
/// plain power iteration when the top singular values are clustered.
fn accelerate(a: &ComplexMatrix, v: Vec<Complex64>) -> Result<Vec<Complex64>> {
    let mut g = a.adjoint_matmul(a)?;
    let mut best = v.clone();
    for _ in 0..SQUARING_STEPS {
        let sq = g.matmul(&g)?;
        let scale = sq.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 || !scale.is_finite() {
            break;
        }
        let sq = sq.scale_real(1.0 / scale);
        let mut x = sq.matvec(&v)?;
        if normalise(&mut x) == 0.0 {
            break;
        }
        let settled = sq.max_abs_diff(&g) < 1e-15;
        g = sq;
        best = x;
        if settled {
            break;
        }
    }
    Ok(best)
}

/// Power iteration on `A*A` for the largest singular value.
pub fn top_singular_triple(a: &ComplexMatrix) -> Result<SingularTriple> {
    if !a.is_finite() {
        return invalid("matrix has non-finite entries");
    }
    let (rows, cols) = a.shape();
    if a.data.iter().all(|z| z.re == 0.0 && z.im == 0.0) || rows == 0 || cols == 0 {
        let mut u = vec![Complex64::new(0.0, 0.0); rows];
        let mut v = vec![Complex64::new(0.0, 0.0); cols];
        if let Some(x) = u.first_mut() {
            *x = Complex64::new(1.0, 0.0);
        }
        if let Some(x) = v.first_mut() {
            *x = Complex64::new(1.0, 0.0);
        }
        return Ok(SingularTriple { sigma: 0.0, u, v });
    }
    let mut v = start_vector(cols);
    let mut w = a.matvec(&v)?;
    if vec_norm(&w) == 0.0 {
        // start vector in the kernel: restart from the heaviest column
        let j = (0..cols)
            .max_by(|&x, &y| {
                let nx: f64 = (0..rows).map(|i| a[(i, x)].norm_sqr()).sum();
                let ny: f64 = (0..rows).map(|i| a[(i, y)].norm_sqr()).sum();
                nx.partial_cmp(&ny).unwrap()
            })
            .unwrap();
        v = vec![Complex64::new(0.0, 0.0); cols];
        v[j] = Complex64::new(1.0, 0.0);
        w = a.matvec(&v)?;
    }
    if cols <= SQUARING_MAX_DIM {
        v = accelerate(a, v)?;
        w = a.matvec(&v)?;
    }
    let mut sigma = vec_norm(&w);
    for _ in 0..POWER_ITERATION_MAX_ITERS {
        let mut x = a.adjoint_matvec(&w)?;
        if normalise(&mut x) == 0.0 {
            break;
        }
        v = x;
        w = a.matvec(&v)?;
        let next = vec_norm(&w);
        let change = (next - sigma).abs();
        sigma = next;
        if change <= POWER_ITERATION_TOL * sigma {
            let mut u = w;
            normalise(&mut u);
            return Ok(SingularTriple { sigma, u, v });
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: POWER_ITERATION_MAX_ITERS,
    })
}

/// Matrix norm of `a` in the requested family.
pub fn norm(a: &ComplexMatrix, kind: NormKind) -> Result<f64> {
    kind.validate()?;
    if !a.is_finite() {
        return invalid("matrix has non-finite entries");
    }
    Ok(match kind {
        NormKind::Spectral => top_singular_triple(a)?.sigma,
        NormKind::Frobenius => a.frobenius(),
        NormKind::EntryInfinity => a.data.iter().map(|z| z.norm()).fold(0.0, f64::max),
        NormKind::Mixed { p, q } => {
            let (p, q) = (p as f64, q as f64);
            (0..a.rows)
                .map(|i| {
                    let s: f64 = a.row(i).iter().map(|z| z.norm().powf(p)).sum();
                    s.powf(q / p)
                })
                .sum::<f64>()
                .powf(1.0 / q)
        }
    })
}

/// Gradient of `norm(a, kind)` with respect to the real and imaginary parts of
/// each entry, packed as `∂/∂Re + i·∂/∂Im`.
///
/// Non-smooth points use a fixed subgradient: zero at zero entries, the
/// lexicographically first maximiser for [`NormKind::EntryInfinity`], and the
/// power-iteration singular pair for [`NormKind::Spectral`].
pub fn norm_gradient(a: &ComplexMatrix, kind: NormKind) -> Result<ComplexMatrix> {
    kind.validate()?;
    if !a.is_finite() {
        return invalid("matrix has non-finite entries");
    }
    let zero = Complex64::new(0.0, 0.0);
    let unit = |z: Complex64| {
        let r = z.norm();
        if r == 0.0 {
            zero
        } else {
            z / r
        }
    };
    match kind {
        NormKind::Frobenius => {
            let n = a.frobenius();
            if n == 0.0 {
                return Ok(ComplexMatrix::zeros(a.rows, a.cols));
            }
            Ok(a.scale_real(1.0 / n))
        }
        NormKind::EntryInfinity => {
            let mut best = 0;
            let mut best_val = -1.0;
            for (idx, z) in a.data.iter().enumerate() {
                let r = z.norm();
                if r > best_val {
                    best_val = r;
                    best = idx;
                }
            }
            let mut g = ComplexMatrix::zeros(a.rows, a.cols);
            if !a.data.is_empty() {
                g.data[best] = unit(a.data[best]);
            }
            Ok(g)
        }
        NormKind::Spectral => {
            let t = top_singular_triple(a)?;
            if t.sigma == 0.0 {
                return Ok(ComplexMatrix::zeros(a.rows, a.cols));
            }
            Ok(ComplexMatrix::from_fn(a.rows, a.cols, |i, j| t.u[i] * t.v[j].conj()))
        }
        NormKind::Mixed { p, q } => {
            let total = norm(a, kind)?;
            let mut g = ComplexMatrix::zeros(a.rows, a.cols);
            if total == 0.0 {
                return Ok(g);
            }
            let (pf, qf) = (p as f64, q as f64);
            for i in 0..a.rows {
                let s: f64 = a.row(i).iter().map(|z| z.norm().powf(pf)).sum();
                if s == 0.0 {
                    continue;
                }
                // ∂N/∂|a_ij| = N^{1-q} · s_i^{q/p-1} · |a_ij|^{p-1}
                let row_factor = total.powf(1.0 - qf) * s.powf(qf / pf - 1.0);
                for j in 0..a.cols {
                    let z = a[(i, j)];
                    let r = z.norm();
                    if r == 0.0 {
                        continue;
                    }
                    g[(i, j)] = unit(z) * (row_factor * r.powf(pf - 1.0));
                }
            }
            Ok(g)
        }
    }
}

/// Solution of a least-squares problem together with its residual norm.
#[derive(Clone, Debug)]
pub struct LeastSquares {
    pub solution: ComplexMatrix,
    /// Frobenius norm of `a·x − b`.
    pub residual: f64,
}

/// Minimises `‖a·x − b‖_F` through a modified Gram–Schmidt QR factorisation.
pub fn solve_least_squares(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<LeastSquares> {
    let (m, n) = a.shape();
    if m < n {
        return invalid(format!("least squares needs rows >= cols, got {m}x{n}"));
    }
    if b.rows != m {
        return invalid(format!("right-hand side has {} rows, expected {m}", b.rows));
    }
    if !a.is_finite() || !b.is_finite() {
        return invalid("least squares input has non-finite entries");
    }
    // columns of Q and upper-triangular R
    let mut q: Vec<Vec<Complex64>> = (0..n).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect();
    let mut r = ComplexMatrix::zeros(n, n);
    let scale = (0..n).map(|j| vec_norm(&q[j])).fold(0.0, f64::max);
    let mut rank = 0;
    for j in 0..n {
        for k in 0..j {
            // two passes of modified Gram–Schmidt for stability
            for _ in 0..2 {
                let dot: Complex64 = q[k].iter().zip(&q[j]).map(|(x, y)| x.conj() * y).sum();
                r[(k, j)] += dot;
                let qk = q[k].clone();
                for (y, x) in q[j].iter_mut().zip(&qk) {
                    *y -= dot * x;
                }
            }
        }
        let nrm = vec_norm(&q[j]);
        if nrm <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            continue;
        }
        rank += 1;
        r[(j, j)] = Complex64::new(nrm, 0.0);
        q[j].iter_mut().for_each(|z| *z /= nrm);
    }
    if rank < n {
        return Err(Error::RankDeficient { rank, cols: n });
    }
    let mut x = ComplexMatrix::zeros(n, b.cols);
    for c in 0..b.cols {
        let rhs: Vec<Complex64> = (0..n)
            .map(|k| (0..m).map(|i| q[k][i].conj() * b[(i, c)]).sum())
            .collect();
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for k in i + 1..n {
                acc -= r[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = acc / r[(i, i)];
        }
    }
    let residual = a.matmul(&x)?.sub(b)?.frobenius();
    Ok(LeastSquares { solution: x, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_matrix, rng};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn naive_matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = c(0.0, 0.0);
                for k in 0..a.cols() {
                    acc += a[(i, k)] * b[(k, j)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    #[test]
    fn identity_is_neutral() {
        let mut r = rng(1);
        let a = random_matrix(5, 5, &mut r);
        let i = ComplexMatrix::identity(5);
        assert_eq!(i.matmul(&a).unwrap(), a);
    }

    #[test]
    fn swap_matrix_swaps_rows() {
        let p = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let a = ComplexMatrix::from_vec(2, 2, vec![c(1.0, 1.0), c(2.0, 0.0), c(3.0, -1.0), c(4.0, 2.0)]).unwrap();
        let out = p.matmul(&a).unwrap();
        assert_eq!(out.row(0), a.row(1));
        assert_eq!(out.row(1), a.row(0));
    }

    #[test]
    fn matmul_matches_naive_loop() {
        let mut r = rng(2);
        let a = random_matrix(7, 3, &mut r);
        let b = random_matrix(3, 4, &mut r);
        let fast = a.matmul(&b).unwrap();
        assert_eq!(fast.shape(), (7, 4));
        assert!(fast.max_abs_diff(&naive_matmul(&a, &b)) < 1e-13);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn adjoint_products_match_explicit_adjoint() {
        let mut r = rng(3);
        let a = random_matrix(6, 4, &mut r);
        let b = random_matrix(6, 3, &mut r);
        let explicit = a.conj_transpose().matmul(&b).unwrap();
        assert!(a.adjoint_matmul(&b).unwrap().max_abs_diff(&explicit) < 1e-13);
        let v: Vec<Complex64> = (0..6).map(|i| c(i as f64, 1.0)).collect();
        let lhs = a.adjoint_matvec(&v).unwrap();
        let rhs = a.conj_transpose().matvec(&v).unwrap();
        for (x, y) in lhs.iter().zip(&rhs) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn conj_transpose_cases() {
        let sym = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 2.0, 5.0]).unwrap();
        assert_eq!(sym.conj_transpose(), sym);
        let i = ComplexMatrix::from_vec(1, 1, vec![c(0.0, 1.0)]).unwrap();
        assert_eq!(i.conj_transpose()[(0, 0)], c(0.0, -1.0));
        let mut r = rng(4);
        for _ in 0..20 {
            let a = random_matrix(4, 4, &mut r);
            let b = random_matrix(4, 4, &mut r);
            let lhs = a.matmul(&b).unwrap().conj_transpose();
            let rhs = b.conj_transpose().matmul(&a.conj_transpose()).unwrap();
            assert!(lhs.max_abs_diff(&rhs) < 1e-13);
        }
    }

    #[test]
    fn hs_inner_cases() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(hs_inner(&i2, &i2).unwrap(), c(2.0, 0.0));
        let mut r = rng(5);
        let a = random_matrix(3, 4, &mut r);
        let b = random_matrix(3, 4, &mut r);
        assert_eq!(hs_inner(&a, &ComplexMatrix::zeros(3, 4)).unwrap(), c(0.0, 0.0));
        let alpha = c(0.3, -1.7);
        let lhs = hs_inner(&a.scale(alpha), &b).unwrap();
        let rhs = alpha * hs_inner(&a, &b).unwrap();
        assert!((lhs - rhs).norm() < 1e-13);
        assert!(hs_inner(&a, &ComplexMatrix::zeros(4, 3)).is_err());
    }

    #[test]
    fn norm_examples() {
        let i3 = ComplexMatrix::identity(3);
        assert!((norm(&i3, NormKind::Frobenius).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        let d = ComplexMatrix::diagonal(&[c(3.0, 0.0), c(-1.0, 0.0)]);
        assert!((norm(&d, NormKind::Spectral).unwrap() - 3.0).abs() < 1e-12);
        let mut bad = ComplexMatrix::zeros(2, 2);
        bad[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(norm(&bad, NormKind::Frobenius), Err(Error::InvalidArgument(_))));
        assert_eq!(norm(&ComplexMatrix::zeros(3, 2), NormKind::Spectral).unwrap(), 0.0);
        assert!(NormKind::mixed(4, 1).is_err());
    }

    #[test]
    fn mixed_two_two_is_frobenius() {
        let mut r = rng(6);
        let k = NormKind::mixed(2, 2).unwrap();
        for _ in 0..50 {
            let a = random_matrix(6, 6, &mut r);
            let diff = norm(&a, k).unwrap() - norm(&a, NormKind::Frobenius).unwrap();
            assert!(diff.abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_norm_is_row_wise() {
        // rows (1, 2) and (3, 0): p=1 row sums 3 and 3, q=2 → sqrt(18)
        let a = ComplexMatrix::from_real(2, 2, &[1.0, -2.0, 3.0, 0.0]).unwrap();
        let v = norm(&a, NormKind::mixed(1, 2).unwrap()).unwrap();
        assert!((v - 18f64.sqrt()).abs() < 1e-14);
        let w = norm(&a, NormKind::mixed(2, 1).unwrap()).unwrap();
        assert!((w - (5f64.sqrt() + 3.0)).abs() < 1e-14);
    }

    #[test]
    fn spectral_matches_exact_svd() {
        let mut r = rng(7);
        for _ in 0..30 {
            let a = random_matrix(5, 3, &mut r);
            let m = nalgebra::DMatrix::from_fn(5, 3, |i, j| {
                nalgebra::Complex::new(a[(i, j)].re, a[(i, j)].im)
            });
            let exact = m.singular_values().max();
            assert!((norm(&a, NormKind::Spectral).unwrap() - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn spectral_dominates_sampled_directions() {
        let mut r = rng(8);
        let a = random_matrix(6, 6, &mut r);
        let s = norm(&a, NormKind::Spectral).unwrap();
        let mut best: f64 = 0.0;
        for _ in 0..10_000 {
            let v = crate::random::random_vector(6, &mut r);
            let av = a.matvec(&v).unwrap();
            best = best.max(vec_norm(&av) / vec_norm(&v));
        }
        assert!(best <= s + 1e-9);
    }

    #[test]
    fn norm_equivalence_spectral_frobenius() {
        let mut r = rng(9);
        for t in 0..200 {
            let rows = 1 + t % 7;
            let cols = 1 + (t / 7) % 6;
            let a = random_matrix(rows, cols, &mut r);
            let s = norm(&a, NormKind::Spectral).unwrap();
            let f = norm(&a, NormKind::Frobenius).unwrap();
            assert!(s <= f + 1e-12);
            assert!(f <= (rows.min(cols) as f64).sqrt() * s + 1e-12);
        }
    }

    fn finite_difference_gradient(a: &ComplexMatrix, kind: NormKind) -> ComplexMatrix {
        let h = 1e-6;
        ComplexMatrix::from_fn(a.rows(), a.cols(), |i, j| {
            let mut p = a.clone();
            let mut m = a.clone();
            p[(i, j)] += c(h, 0.0);
            m[(i, j)] -= c(h, 0.0);
            let dre = (norm(&p, kind).unwrap() - norm(&m, kind).unwrap()) / (2.0 * h);
            let mut p = a.clone();
            let mut m = a.clone();
            p[(i, j)] += c(0.0, h);
            m[(i, j)] -= c(0.0, h);
            let dim = (norm(&p, kind).unwrap() - norm(&m, kind).unwrap()) / (2.0 * h);
            c(dre, dim)
        })
    }

    #[test]
    fn norm_gradients_match_finite_differences() {
        let mut r = rng(10);
        let mut kinds = vec![NormKind::Frobenius, NormKind::Spectral, NormKind::EntryInfinity];
        for p in 1..=3 {
            for q in 1..=3 {
                kinds.push(NormKind::mixed(p, q).unwrap());
            }
        }
        for kind in kinds {
            let a = random_matrix(4, 3, &mut r);
            let g = norm_gradient(&a, kind).unwrap();
            let fd = finite_difference_gradient(&a, kind);
            assert!(g.max_abs_diff(&fd) < 1e-5, "{kind}: {}", g.max_abs_diff(&fd));
        }
    }

    #[test]
    fn least_squares_cases() {
        let mut r = rng(11);
        let b = random_matrix(4, 2, &mut r);
        let id = solve_least_squares(&ComplexMatrix::identity(4), &b).unwrap();
        assert!(id.solution.max_abs_diff(&b) < 1e-14);

        let a = random_matrix(8, 4, &mut r);
        let x_true = random_matrix(4, 1, &mut r);
        let consistent = a.matmul(&x_true).unwrap();
        let sol = solve_least_squares(&a, &consistent).unwrap();
        assert!(sol.residual < 1e-10);

        let rhs = random_matrix(8, 1, &mut r);
        let sol = solve_least_squares(&a, &rhs).unwrap();
        let resid = a.matmul(&sol.solution).unwrap().sub(&rhs).unwrap();
        let normal = a.adjoint_matmul(&resid).unwrap();
        assert!(normal.frobenius() < 1e-9);

        let mut deficient = a.clone();
        for i in 0..8 {
            deficient[(i, 3)] = deficient[(i, 0)] * 2.0;
        }
        assert!(matches!(
            solve_least_squares(&deficient, &rhs),
            Err(Error::RankDeficient { rank: 3, cols: 4 })
        ));
    }

    #[test]
    fn norm_kind_round_trips_through_strings() {
        for k in [
            NormKind::Spectral,
            NormKind::Frobenius,
            NormKind::EntryInfinity,
            NormKind::Mixed { p: 1, q: 3 },
        ] {
            assert_eq!(k.to_string().parse::<NormKind>().unwrap(), k);
        }
        assert!("mixed:0,2".parse::<NormKind>().is_err());
        assert!("nuclear".parse::<NormKind>().is_err());
    }

    proptest! {
        #[test]
        fn norms_are_absolutely_homogeneous(seed in 0u64..10_000, re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let mut r = rng(seed);
            let a = random_matrix(4, 5, &mut r);
            let s = c(re, im);
            for kind in [NormKind::Spectral, NormKind::Frobenius, NormKind::EntryInfinity, NormKind::Mixed { p: 3, q: 1 }] {
                let lhs = norm(&a.scale(s), kind).unwrap();
                let rhs = s.norm() * norm(&a, kind).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
            }
        }

        #[test]
        fn hs_self_inner_is_frobenius_squared(seed in 0u64..10_000) {
            let mut r = rng(seed);
            let a = random_matrix(3, 6, &mut r);
            let ip = hs_inner(&a, &a).unwrap();
            let f = norm(&a, NormKind::Frobenius).unwrap();
            prop_assert!(ip.im.abs() < 1e-12);
            prop_assert!((ip.re - f * f).abs() < 1e-12 * (1.0 + f * f));
        }
    }
}
