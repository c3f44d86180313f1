//! Circular cross-correlation with C4 steerable kernels and its rotation defect.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::random::rng;
use crate::reynolds::{SteerableKernel, ORIENTATIONS};

/// Side length of the square feature maps used by the defect harness.
pub const CONV_GRID: usize = 16;

/// Real feature map indexed `[channel][orientation][row][col]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub side: usize,
    pub values: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, side: usize) -> Self {
        Self {
            channels,
            side,
            values: vec![0.0; channels * ORIENTATIONS * side * side],
        }
    }

    fn offset(&self, c: usize, o: usize, u: usize, v: usize) -> usize {
        ((c * ORIENTATIONS + o) * self.side + u) * self.side + v
    }

    pub fn get(&self, c: usize, o: usize, u: usize, v: usize) -> f64 {
        self.values[self.offset(c, o, u, v)]
    }

    pub fn frobenius(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// `y[p,α](u) = Σ_{q,β,d} K[p,q,α,β][d]·x[q,β](u + d)` with wrap-around,
/// where `d` ranges over kernel offsets relative to the centre.
pub fn correlate_circular(k: &SteerableKernel, x: &FeatureMap) -> Result<FeatureMap> {
    if x.channels != k.c_in() {
        return invalid(format!("kernel expects {} input channels, map has {}", k.c_in(), x.channels));
    }
    let (n, s) = (x.side, k.size());
    let c = s / 2;
    let mut y = FeatureMap::zeros(k.c_out(), n);
    for p in 0..k.c_out() {
        for a in 0..ORIENTATIONS {
            for u in 0..n {
                for v in 0..n {
                    let mut acc = 0.0;
                    for q in 0..k.c_in() {
                        for b in 0..ORIENTATIONS {
                            for i in 0..s {
                                let uu = (u + n + i - c) % n;
                                for j in 0..s {
                                    let vv = (v + n + j - c) % n;
                                    acc += k.get([p, q, a, b, i, j]) * x.get(q, b, uu, vv);
                                }
                            }
                        }
                    }
                    let o = y.offset(p, a, u, v);
                    y.values[o] = acc;
                }
            }
        }
    }
    Ok(y)
}

/// `(A_r x)[β] = rot_r(x[β − r])`; one quarter turn moves `(u, v)` to `(v, n−1−u)`.
pub fn rotate_feature_map(x: &FeatureMap, r: usize) -> FeatureMap {
    let n = x.side;
    let mut out = FeatureMap::zeros(x.channels, n);
    for c in 0..x.channels {
        for o in 0..ORIENTATIONS {
            let src_o = (o + ORIENTATIONS - r % 4) % ORIENTATIONS;
            for u in 0..n {
                for v in 0..n {
                    let (mut a, mut b) = (u, v);
                    for _ in 0..r % 4 {
                        let (na, nb) = (n - 1 - b, a);
                        a = na;
                        b = nb;
                    }
                    let dst = out.offset(c, o, u, v);
                    out.values[dst] = x.get(c, src_o, a, b);
                }
            }
        }
    }
    out
}

/// Largest relative rotation defect `‖A_r y − conv(A_r x)‖_F / ‖y‖_F` over
/// `r ∈ {1,2,3}` and `trials` random inputs on a 16×16 grid.
pub fn c4_conv_defect(k: &SteerableKernel, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return invalid("at least one trial is required");
    }
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let mut x = FeatureMap::zeros(k.c_in(), CONV_GRID);
        x.values.iter_mut().for_each(|v| *v = r.gen_range(-1.0..1.0));
        let y = correlate_circular(k, &x)?;
        let base = y.frobenius();
        if base == 0.0 {
            continue;
        }
        for rot in 1..4 {
            let lhs = rotate_feature_map(&y, rot);
            let rhs = correlate_circular(k, &rotate_feature_map(&x, rot))?;
            let diff = lhs
                .values
                .iter()
                .zip(&rhs.values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(diff / base);
        }
    }
    Ok(worst)
}
