//! The approximately SO(2)-invariant toy classifier.
//!
//! Features are complex and indexed by circular-harmonic degree
//! `m = −M..=M` and channel, laid out degree-major, channel-minor:
//! row `(m + M)·C + c`.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::linalg::{ComplexMatrix, NormKind};
use crate::spectral::harmonic_mask_pattern;
use crate::train::tape::{Tape, Var};

pub const RADIAL_WIDTH: f64 = 0.5;
pub const RADIAL_SPAN: f64 = 4.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ToyModelParams {
    pub radial_centers: Vec<f64>,
    pub radial_width: f64,
    pub max_degree: usize,
    pub channels: usize,
    pub hidden: usize,
    /// `((2M+1)·C_hid) × ((2M+1)·C)`.
    pub w1: ComplexMatrix,
    /// `((2M+1)·C_hid) × ((2M+1)·C_hid)`.
    pub w2: ComplexMatrix,
    pub w_final: Vec<f64>,
    pub bias: f64,
}

/// Evenly spaced centres `c_n = 4(n−1)/(C−1)`.
pub fn radial_centers(channels: usize) -> Vec<f64> {
    if channels == 1 {
        return vec![0.0];
    }
    (0..channels)
        .map(|n| RADIAL_SPAN * n as f64 / (channels - 1) as f64)
        .collect()
}

fn uniform_complex<R: Rng>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.gen_range(-bound..=bound), rng.gen_range(-bound..=bound))
    })
}

impl ToyModelParams {
    /// Fan-in scaled uniform initialisation.
    pub fn init<R: Rng>(max_degree: usize, channels: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        if channels == 0 || hidden == 0 {
            return invalid("channel counts must be positive");
        }
        let d = 2 * max_degree + 1;
        let (n_in, n_hid) = (d * channels, d * hidden);
        let w1 = uniform_complex(n_hid, n_in, 1.0 / (n_in as f64).sqrt(), rng);
        let w2 = uniform_complex(n_hid, n_hid, 1.0 / (n_hid as f64).sqrt(), rng);
        let a = 1.0 / (hidden as f64).sqrt();
        let w_final = (0..hidden).map(|_| rng.gen_range(-a..=a)).collect();
        Ok(Self {
            radial_centers: radial_centers(channels),
            radial_width: RADIAL_WIDTH,
            max_degree,
            channels,
            hidden,
            w1,
            w2,
            w_final,
            bias: 0.0,
        })
    }

    pub fn degrees(&self) -> Vec<i32> {
        let m = self.max_degree as i32;
        (-m..=m).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let d = 2 * self.max_degree + 1;
        if self.radial_centers.len() != self.channels
            || self.w1.shape() != (d * self.hidden, d * self.channels)
            || self.w2.shape() != (d * self.hidden, d * self.hidden)
            || self.w_final.len() != self.hidden
        {
            return invalid("toy model parameter shapes are inconsistent");
        }
        if !(self.radial_width > 0.0) {
            return invalid("radial width must be positive");
        }
        Ok(())
    }

    /// Keep-patterns of the equivariant masks for `w1` and `w2`.
    pub fn masks(&self) -> Result<(Vec<bool>, Vec<bool>)> {
        let deg = self.degrees();
        Ok((
            harmonic_mask_pattern(self.w1.rows(), self.w1.cols(), &deg, &deg)?,
            harmonic_mask_pattern(self.w2.rows(), self.w2.cols(), &deg, &deg)?,
        ))
    }

    /// Replaces `w1`, `w2` by their masked (exactly equivariant) parts.
    pub fn project(&mut self) -> Result<()> {
        let (m1, m2) = self.masks()?;
        apply_mask(&mut self.w1, &m1);
        apply_mask(&mut self.w2, &m2);
        Ok(())
    }

    /// Flat parameter vector: `w1`, `w2` as interleaved pairs, then `w_final`, `bias`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        for m in [&self.w1, &self.w2] {
            for z in m.as_slice() {
                out.push(z.re);
                out.push(z.im);
            }
        }
        out.extend_from_slice(&self.w_final);
        out.push(self.bias);
        out
    }

    pub fn flat_len(&self) -> usize {
        2 * (self.w1.as_slice().len() + self.w2.as_slice().len()) + self.hidden + 1
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.flat_len() {
            return invalid("flat parameter vector has the wrong length");
        }
        let mut it = flat.iter().copied();
        for m in [&mut self.w1, &mut self.w2] {
            for z in m.as_mut_slice() {
                *z = Complex64::new(it.next().unwrap(), it.next().unwrap());
            }
        }
        for w in &mut self.w_final {
            *w = it.next().unwrap();
        }
        self.bias = it.next().unwrap();
        Ok(())
    }
}

fn apply_mask(w: &mut ComplexMatrix, keep: &[bool]) {
    for (z, &k) in w.as_mut_slice().iter_mut().zip(keep) {
        if !k {
            *z = Complex64::new(0.0, 0.0);
        }
    }
}

/// `H[m][n] = b_n(r)·ẑ^m` with `ẑ = z/r`, and `ẑ = 1` at the origin.
pub fn embed(point: [f64; 2], params: &ToyModelParams) -> Result<ComplexMatrix> {
    if !(point[0].is_finite() && point[1].is_finite()) {
        return invalid("point has non-finite coordinates");
    }
    let z = Complex64::new(point[0], point[1]);
    let r = z.norm();
    let unit = if r == 0.0 { Complex64::new(1.0, 0.0) } else { z / r };
    let m_max = params.max_degree;
    let mut powers = vec![Complex64::new(1.0, 0.0); m_max + 1];
    for k in 1..=m_max {
        powers[k] = powers[k - 1] * unit;
    }
    let radial: Vec<f64> = params
        .radial_centers
        .iter()
        .map(|c| (-(r - c).powi(2) / (2.0 * params.radial_width * params.radial_width)).exp())
        .collect();
    Ok(ComplexMatrix::from_fn(2 * m_max + 1, params.channels, |row, n| {
        let phase = if row >= m_max {
            powers[row - m_max]
        } else {
            powers[m_max - row].conj()
        };
        phase * radial[n]
    }))
}

/// Straight-line (tape-free) evaluation of the logit.
pub fn forward(point: [f64; 2], params: &ToyModelParams) -> Result<f64> {
    params.validate()?;
    let h = embed(point, params)?;
    let y1 = params.w1.matvec(h.as_slice())?;
    let y2 = params.w2.matvec(&y1)?;
    let d = 2 * params.max_degree + 1;
    let c_hid = params.hidden;
    let mut logit = params.bias;
    for c in 0..c_hid {
        let mut acc = Complex64::new(0.0, 0.0);
        for m in 0..d {
            acc += y2[m * c_hid + c] * y2[(d - 1 - m) * c_hid + c];
        }
        logit += params.w_final[c] * acc.re;
    }
    Ok(logit)
}

/// Embeddings of a batch as an interleaved `((2M+1)·C) × N` matrix.
pub fn embed_batch(points: &[[f64; 2]], params: &ToyModelParams) -> Result<Vec<f64>> {
    let rows = (2 * params.max_degree + 1) * params.channels;
    let n = points.len();
    let mut out = vec![0.0; 2 * rows * n];
    for (col, p) in points.iter().enumerate() {
        let h = embed(*p, params)?;
        for (row, z) in h.as_slice().iter().enumerate() {
            out[2 * (row * n + col)] = z.re;
            out[2 * (row * n + col) + 1] = z.im;
        }
    }
    Ok(out)
}

/// Regularisation weights and norm for the objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Penalty {
    pub lambda_g: f64,
    pub lambda_perp: f64,
    pub norm_kind: NormKind,
}

/// Handles of one objective evaluation on a tape.
#[derive(Clone, Copy, Debug)]
pub struct LossGraph {
    pub w1: Var,
    pub w2: Var,
    pub w_final: Var,
    pub bias: Var,
    pub logits: Var,
    pub task: Var,
    pub penalty_g: Var,
    pub penalty_perp: Var,
    pub total: Var,
}

fn complex_leaf(tape: &mut Tape, m: &ComplexMatrix) -> Var {
    tape.leaf(m.as_slice().iter().flat_map(|z| [z.re, z.im]).collect())
}

/// `L = BCE + λ_G Σ_i ‖W_i‖ + λ_⊥ Σ_i ‖W_i − M⊙W_i‖` over `W_1, W_2`.
pub fn build_loss(
    tape: &mut Tape,
    params: &ToyModelParams,
    points: &[[f64; 2]],
    labels: &[f64],
    penalty: Penalty,
) -> Result<LossGraph> {
    if points.is_empty() {
        return invalid("loss needs a non-empty batch");
    }
    if points.len() != labels.len() {
        return invalid("one label per point is required");
    }
    params.validate()?;
    let n = points.len();
    let d = 2 * params.max_degree + 1;
    let (n_in, n_hid) = (d * params.channels, d * params.hidden);

    let w1 = complex_leaf(tape, &params.w1);
    let w2 = complex_leaf(tape, &params.w2);
    let w_final = tape.leaf(params.w_final.clone());
    let bias = tape.leaf(vec![params.bias]);

    let h0 = tape.constant(embed_batch(points, params)?);
    let y1 = tape.complex_matmul(w1, h0, n_hid, n_in, n)?;
    let y2 = tape.complex_matmul(w2, y1, n_hid, n_hid, n)?;
    let z = tape.conjugate_pair_sum(y2, params.max_degree, params.hidden, n)?;
    let logits = tape.affine(w_final, bias, z, params.hidden, n)?;
    let targets = labels.iter().map(|&y| if y > 0.0 { 1.0 } else { 0.0 }).collect();
    let task = tape.bce_with_logits(logits, targets)?;

    let (m1, m2) = params.masks()?;
    let kind = penalty.norm_kind;
    let n1 = tape.norm(w1, n_hid, n_in, kind)?;
    let n2 = tape.norm(w2, n_hid, n_hid, kind)?;
    let penalty_g = tape.add(n1, n2)?;
    // W − M⊙W keeps exactly the entries the mask drops
    let a1 = tape.mask(w1, m1.iter().map(|k| !k).collect())?;
    let a2 = tape.mask(w2, m2.iter().map(|k| !k).collect())?;
    let p1 = tape.norm(a1, n_hid, n_in, kind)?;
    let p2 = tape.norm(a2, n_hid, n_hid, kind)?;
    let penalty_perp = tape.add(p1, p2)?;

    let sg = tape.scale(penalty_g, penalty.lambda_g);
    let sp = tape.scale(penalty_perp, penalty.lambda_perp);
    let reg = tape.add(sg, sp)?;
    let total = tape.add(task, reg)?;
    Ok(LossGraph {
        w1,
        w2,
        w_final,
        bias,
        logits,
        task,
        penalty_g,
        penalty_perp,
        total,
    })
}

/// Loss value and its gradient in the layout of [`ToyModelParams::to_flat`].
pub fn loss_and_gradient(
    params: &ToyModelParams,
    points: &[[f64; 2]],
    labels: &[f64],
    penalty: Penalty,
) -> Result<(LossValues, Vec<f64>)> {
    let mut tape = Tape::new();
    let g = build_loss(&mut tape, params, points, labels, penalty)?;
    let grads = tape.backward(g.total)?;
    let mut flat = Vec::with_capacity(params.flat_len());
    flat.extend_from_slice(grads.of(g.w1));
    flat.extend_from_slice(grads.of(g.w2));
    flat.extend_from_slice(grads.of(g.w_final));
    flat.extend_from_slice(grads.of(g.bias));
    Ok((
        LossValues {
            total: tape.scalar(g.total),
            task: tape.scalar(g.task),
            penalty_g: tape.scalar(g.penalty_g),
            penalty_perp: tape.scalar(g.penalty_perp),
        },
        flat,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossValues {
    pub total: f64,
    pub task: f64,
    /// Unweighted `Σ_i ‖W_i‖`.
    pub penalty_g: f64,
    /// Unweighted `Σ_i ‖W_i − M⊙W_i‖`.
    pub penalty_perp: f64,
}

/// Objective value without building gradients.
pub fn loss(params: &ToyModelParams, points: &[[f64; 2]], labels: &[f64], penalty: Penalty) -> Result<LossValues> {
    let mut tape = Tape::new();
    let g = build_loss(&mut tape, params, points, labels, penalty)?;
    Ok(LossValues {
        total: tape.scalar(g.total),
        task: tape.scalar(g.task),
        penalty_g: tape.scalar(g.penalty_g),
        penalty_perp: tape.scalar(g.penalty_perp),
    })
}
