//! Minimal reverse-mode differentiation over flat real arrays.
//!
//! Complex tensors are stored as interleaved `(re, im)` pairs in row-major
//! order. Gradients of complex inputs use the packing `∂/∂Re + i·∂/∂Im`,
//! stored in the same interleaved layout.

use crate::error::{invalid, Result};
use crate::linalg::{norm, norm_gradient, ComplexMatrix, NormKind};
use num_complex::Complex64;

/// Handle to a node on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Constant,
    /// `Y = W·X` with `W: rows×inner`, `X: inner×cols`, all complex.
    ComplexMatMul {
        w: Var,
        x: Var,
        rows: usize,
        inner: usize,
        cols: usize,
    },
    /// `z[c][n] = Re Σ_m h[(m,c)][n]·h[(−m,c)][n]` for degrees `−M..=M`.
    ConjugatePairSum {
        h: Var,
        max_degree: usize,
        channels: usize,
        cols: usize,
    },
    /// `y[n] = Σ_c w[c]·z[c][n] + b` (all real).
    Affine {
        w: Var,
        b: Var,
        z: Var,
        channels: usize,
        cols: usize,
    },
    /// Mean of `max(x,0) − x·y + ln(1 + e^{−|x|})`.
    BceWithLogits { x: Var, targets: Vec<f64> },
    /// Complex elementwise `keep ? a : 0`.
    Mask { a: Var, keep: Vec<bool> },
    Norm {
        a: Var,
        rows: usize,
        cols: usize,
        kind: NormKind,
    },
    Add(Var, Var),
    Scale(Var, f64),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Vec<f64>,
}

/// Append-only computation record.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn cmul(ar: f64, ai: f64, br: f64, bi: f64) -> (f64, f64) {
    (ar * br - ai * bi, ar * bi + ai * br)
}

fn to_complex(v: &[f64], rows: usize, cols: usize) -> ComplexMatrix {
    let data = v.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
    ComplexMatrix::from_vec(rows, cols, data).expect("length checked on construction")
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Vec<f64>) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn constant(&mut self, value: Vec<f64>) -> Var {
        self.push(Op::Constant, value)
    }

    pub fn complex_matmul(&mut self, w: Var, x: Var, rows: usize, inner: usize, cols: usize) -> Result<Var> {
        let (wv, xv) = (self.value(w), self.value(x));
        if wv.len() != 2 * rows * inner || xv.len() != 2 * inner * cols {
            return invalid("complex matmul operand sizes do not match the declared shape");
        }
        let mut out = vec![0.0; 2 * rows * cols];
        for r in 0..rows {
            let orow = &mut out[2 * r * cols..2 * (r + 1) * cols];
            for k in 0..inner {
                let (ar, ai) = (wv[2 * (r * inner + k)], wv[2 * (r * inner + k) + 1]);
                if ar == 0.0 && ai == 0.0 {
                    continue;
                }
                let xrow = &xv[2 * k * cols..2 * (k + 1) * cols];
                for (o, b) in orow.chunks_exact_mut(2).zip(xrow.chunks_exact(2)) {
                    let (pr, pi) = cmul(ar, ai, b[0], b[1]);
                    o[0] += pr;
                    o[1] += pi;
                }
            }
        }
        Ok(self.push(
            Op::ComplexMatMul {
                w,
                x,
                rows,
                inner,
                cols,
            },
            out,
        ))
    }

    pub fn conjugate_pair_sum(&mut self, h: Var, max_degree: usize, channels: usize, cols: usize) -> Result<Var> {
        let hv = self.value(h);
        let degrees = 2 * max_degree + 1;
        if hv.len() != 2 * degrees * channels * cols {
            return invalid("pair-sum input size does not match the declared shape");
        }
        let at = |m: usize, c: usize, n: usize| 2 * ((m * channels + c) * cols + n);
        let mut out = vec![0.0; channels * cols];
        for c in 0..channels {
            for n in 0..cols {
                let mut acc = 0.0;
                for m in 0..degrees {
                    let (i, j) = (at(m, c, n), at(degrees - 1 - m, c, n));
                    acc += hv[i] * hv[j] - hv[i + 1] * hv[j + 1];
                }
                out[c * cols + n] = acc;
            }
        }
        Ok(self.push(
            Op::ConjugatePairSum {
                h,
                max_degree,
                channels,
                cols,
            },
            out,
        ))
    }

    pub fn affine(&mut self, w: Var, b: Var, z: Var, channels: usize, cols: usize) -> Result<Var> {
        let (wv, bv, zv) = (self.value(w), self.value(b), self.value(z));
        if wv.len() != channels || bv.len() != 1 || zv.len() != channels * cols {
            return invalid("affine operand sizes do not match the declared shape");
        }
        let out = (0..cols)
            .map(|n| bv[0] + (0..channels).map(|c| wv[c] * zv[c * cols + n]).sum::<f64>())
            .collect();
        Ok(self.push(
            Op::Affine {
                w,
                b,
                z,
                channels,
                cols,
            },
            out,
        ))
    }

    pub fn bce_with_logits(&mut self, x: Var, targets: Vec<f64>) -> Result<Var> {
        let xv = self.value(x);
        if xv.is_empty() || xv.len() != targets.len() {
            return invalid("binary cross-entropy needs one target per logit and a non-empty batch");
        }
        let n = xv.len() as f64;
        let total: f64 = xv
            .iter()
            .zip(&targets)
            .map(|(&l, &y)| l.max(0.0) - l * y + (-l.abs()).exp().ln_1p())
            .sum();
        Ok(self.push(Op::BceWithLogits { x, targets }, vec![total / n]))
    }

    /// `keep` has one entry per complex element.
    pub fn mask(&mut self, a: Var, keep: Vec<bool>) -> Result<Var> {
        let av = self.value(a);
        if av.len() != 2 * keep.len() {
            return invalid("mask length does not match the operand");
        }
        let out = av
            .chunks_exact(2)
            .zip(&keep)
            .flat_map(|(p, &k)| if k { [p[0], p[1]] } else { [0.0, 0.0] })
            .collect();
        Ok(self.push(Op::Mask { a, keep }, out))
    }

    pub fn norm(&mut self, a: Var, rows: usize, cols: usize, kind: NormKind) -> Result<Var> {
        let av = self.value(a);
        if av.len() != 2 * rows * cols {
            return invalid("norm operand size does not match the declared shape");
        }
        let value = norm(&to_complex(av, rows, cols), kind)?;
        Ok(self.push(Op::Norm { a, rows, cols, kind }, vec![value]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.len() != bv.len() {
            return invalid("add operands differ in length");
        }
        let out = av.iter().zip(bv).map(|(x, y)| x + y).collect();
        Ok(self.push(Op::Add(a, b), out))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).iter().map(|x| x * c).collect();
        self.push(Op::Scale(a, c), out)
    }

    /// Reverse sweep from a scalar `root`; returns one gradient buffer per node.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if self.nodes[root.0].value.len() != 1 {
            return invalid("backward needs a scalar root");
        }
        let mut grads: Vec<Vec<f64>> = self.nodes.iter().map(|n| vec![0.0; n.value.len()]).collect();
        grads[root.0][0] = 1.0;
        for idx in (0..=root.0).rev() {
            let g = std::mem::take(&mut grads[idx]);
            if g.iter().all(|x| *x == 0.0) {
                grads[idx] = g;
                continue;
            }
            match &self.nodes[idx].op {
                Op::Leaf | Op::Constant => {}
                Op::ComplexMatMul {
                    w,
                    x,
                    rows,
                    inner,
                    cols,
                } => {
                    let (rows, inner, cols) = (*rows, *inner, *cols);
                    let (wv, xv) = (self.value(*w), self.value(*x));
                    let mut gw = vec![0.0; wv.len()];
                    let mut gx = vec![0.0; xv.len()];
                    for r in 0..rows {
                        let grow = &g[2 * r * cols..2 * (r + 1) * cols];
                        for k in 0..inner {
                            let xrow = &xv[2 * k * cols..2 * (k + 1) * cols];
                            // g_W[r][k] = Σ_n g_Y[r][n]·conj(X[k][n])
                            let (mut sr, mut si) = (0.0, 0.0);
                            for (gy, xx) in grow.chunks_exact(2).zip(xrow.chunks_exact(2)) {
                                let (pr, pi) = cmul(gy[0], gy[1], xx[0], -xx[1]);
                                sr += pr;
                                si += pi;
                            }
                            gw[2 * (r * inner + k)] += sr;
                            gw[2 * (r * inner + k) + 1] += si;
                            // g_X[k][n] += conj(W[r][k])·g_Y[r][n]
                            let (ar, ai) = (wv[2 * (r * inner + k)], -wv[2 * (r * inner + k) + 1]);
                            let gxrow = &mut gx[2 * k * cols..2 * (k + 1) * cols];
                            for (o, gy) in gxrow.chunks_exact_mut(2).zip(grow.chunks_exact(2)) {
                                let (pr, pi) = cmul(ar, ai, gy[0], gy[1]);
                                o[0] += pr;
                                o[1] += pi;
                            }
                        }
                    }
                    accumulate(&mut grads[w.0], &gw);
                    accumulate(&mut grads[x.0], &gx);
                }
                Op::ConjugatePairSum {
                    h,
                    max_degree,
                    channels,
                    cols,
                } => {
                    let (channels, cols) = (*channels, *cols);
                    let degrees = 2 * max_degree + 1;
                    let hv = self.value(*h);
                    let at = |m: usize, c: usize, n: usize| 2 * ((m * channels + c) * cols + n);
                    let gh = &mut grads[h.0];
                    for m in 0..degrees {
                        for c in 0..channels {
                            for n in 0..cols {
                                // g_{h_m} = 2·g_z·conj(h_{−m})
                                let gz = g[c * cols + n];
                                let (i, j) = (at(m, c, n), at(degrees - 1 - m, c, n));
                                gh[i] += 2.0 * gz * hv[j];
                                gh[i + 1] -= 2.0 * gz * hv[j + 1];
                            }
                        }
                    }
                }
                Op::Affine {
                    w,
                    b,
                    z,
                    channels,
                    cols,
                } => {
                    let (channels, cols) = (*channels, *cols);
                    let (wv, zv) = (self.value(*w), self.value(*z));
                    let mut gw = vec![0.0; channels];
                    let mut gz = vec![0.0; channels * cols];
                    let mut gb = 0.0;
                    for n in 0..cols {
                        gb += g[n];
                        for c in 0..channels {
                            gw[c] += g[n] * zv[c * cols + n];
                            gz[c * cols + n] += g[n] * wv[c];
                        }
                    }
                    accumulate(&mut grads[w.0], &gw);
                    accumulate(&mut grads[z.0], &gz);
                    grads[b.0][0] += gb;
                }
                Op::BceWithLogits { x, targets } => {
                    let xv = self.value(*x);
                    let n = xv.len() as f64;
                    let gx = &mut grads[x.0];
                    for ((o, &l), &y) in gx.iter_mut().zip(xv).zip(targets) {
                        *o += g[0] * (sigmoid(l) - y) / n;
                    }
                }
                Op::Mask { a, keep } => {
                    let ga = &mut grads[a.0];
                    for (k, (&kp, gp)) in keep.iter().zip(g.chunks_exact(2)).enumerate() {
                        if kp {
                            ga[2 * k] += gp[0];
                            ga[2 * k + 1] += gp[1];
                        }
                    }
                }
                Op::Norm { a, rows, cols, kind } => {
                    let grad = norm_gradient(&to_complex(self.value(*a), *rows, *cols), *kind)?;
                    let ga = &mut grads[a.0];
                    for (k, z) in grad.as_slice().iter().enumerate() {
                        ga[2 * k] += g[0] * z.re;
                        ga[2 * k + 1] += g[0] * z.im;
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], &g);
                    accumulate(&mut grads[b.0], &g);
                }
                Op::Scale(a, c) => {
                    let ga = &mut grads[a.0];
                    for (o, x) in ga.iter_mut().zip(&g) {
                        *o += c * x;
                    }
                }
            }
            grads[idx] = g;
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gradient buffers from [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn of(&self, v: Var) -> &[f64] {
        &self.grads[v.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::rng;
    use rand::Rng;

    fn random(len: usize, seed: u64) -> Vec<f64> {
        let mut r = rng(seed);
        (0..len).map(|_| r.gen_range(-1.0..1.0)).collect()
    }

    /// Central-difference check of `f` against the tape gradient at `x0`.
    fn check(build: impl Fn(&mut Tape, Var) -> Var, x0: Vec<f64>) {
        let mut tape = Tape::new();
        let x = tape.leaf(x0.clone());
        let out = build(&mut tape, x);
        let g = tape.backward(out).unwrap().of(x).to_vec();
        let h = 1e-6;
        for i in 0..x0.len() {
            let eval = |delta: f64| {
                let mut t = Tape::new();
                let mut xs = x0.clone();
                xs[i] += delta;
                let v = t.leaf(xs);
                let o = build(&mut t, v);
                t.scalar(o)
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + fd.abs()), "coord {i}: fd {fd} vs tape {}", g[i]);
        }
    }

    #[test]
    fn matmul_gradient() {
        let x_fixed = random(2 * 3 * 4, 1);
        check(
            |t, w| {
                let x = t.leaf(x_fixed.clone());
                let y = t.complex_matmul(w, x, 2, 3, 4).unwrap();
                t.norm(y, 2, 4, NormKind::Frobenius).unwrap()
            },
            random(2 * 2 * 3, 2),
        );
        let w_fixed = random(2 * 2 * 3, 3);
        check(
            |t, x| {
                let w = t.constant(w_fixed.clone());
                let y = t.complex_matmul(w, x, 2, 3, 4).unwrap();
                t.norm(y, 2, 4, NormKind::Frobenius).unwrap()
            },
            random(2 * 3 * 4, 4),
        );
    }

    #[test]
    fn pair_sum_affine_bce_gradient() {
        let targets = vec![1.0, 0.0, 1.0];
        let w = random(2, 5);
        check(
            |t, h| {
                let z = t.conjugate_pair_sum(h, 1, 2, 3).unwrap();
                let wv = t.constant(w.clone());
                let b = t.constant(vec![0.1]);
                let y = t.affine(wv, b, z, 2, 3).unwrap();
                t.bce_with_logits(y, targets.clone()).unwrap()
            },
            random(2 * 3 * 2 * 3, 6),
        );
    }

    #[test]
    fn mask_scale_add_gradient() {
        let keep = vec![true, false, true, true, false, true];
        check(
            |t, a| {
                let m = t.mask(a, keep.clone()).unwrap();
                let n1 = t.norm(m, 2, 3, NormKind::Mixed { p: 1, q: 3 }).unwrap();
                let n2 = t.norm(a, 2, 3, NormKind::Spectral).unwrap();
                let s = t.scale(n1, 0.7);
                t.add(s, n2).unwrap()
            },
            random(12, 7),
        );
    }

    #[test]
    fn bce_is_stable_for_large_logits() {
        let mut t = Tape::new();
        let x = t.leaf(vec![20.0, -20.0]);
        let l = t.bce_with_logits(x, vec![1.0, 0.0]).unwrap();
        assert!(t.scalar(l) < 1e-8);
        let mut t = Tape::new();
        let x = t.leaf(vec![800.0]);
        let l = t.bce_with_logits(x, vec![0.0]).unwrap();
        assert!((t.scalar(l) - 800.0).abs() < 1e-9);
    }

    #[test]
    fn shape_errors() {
        let mut t = Tape::new();
        let a = t.leaf(vec![0.0; 4]);
        assert!(t.complex_matmul(a, a, 2, 2, 2).is_err());
        assert!(t.bce_with_logits(a, vec![]).is_err());
        assert!(t.backward(a).is_err());
    }
}
