//! Equivariance-defect metrics and executable checks of the defect bounds.

mod conv;

pub use conv::{c4_conv_defect, correlate_circular, rotate_feature_map, FeatureMap, CONV_GRID};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::group::Representation;
use crate::linalg::{norm, ComplexMatrix, NormKind};
use crate::random::{random_vector, rng};
use crate::reynolds::{project_finite, LinearLayerSpec};

/// Additive slack for every bound comparison.
pub const BOUND_SLACK: f64 = 1e-9;
const GAIN_SAMPLES: usize = 256;
const GAIN_SAMPLE_SEED: u64 = 0x5eed;

/// Per-element defects of one layer together with its distance to the
/// equivariant subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct DefectReport {
    pub per_element: Vec<(usize, f64)>,
    pub worst_case: f64,
    pub projection_distance: f64,
    pub norm_kind: NormKind,
}

/// `Δ_g(W) = ρ_out(g)·W − W·ρ_in(g)`.
pub fn defect_matrix(layer: &LinearLayerSpec, g: usize) -> Result<ComplexMatrix> {
    let order = layer.rep_in().group().order();
    if g >= order {
        return invalid(format!("element index {g} out of range for a group of order {order}"));
    }
    let w = layer.weight();
    layer
        .rep_out()
        .matrix(g)
        .matmul(w)?
        .sub(&w.matmul(layer.rep_in().matrix(g))?)
}

/// `‖Δ_g(W)‖` in the requested norm.
pub fn defect_at(layer: &LinearLayerSpec, g: usize, kind: NormKind) -> Result<f64> {
    norm(&defect_matrix(layer, g)?, kind)
}

/// Exact `E(W) = max_g ‖Δ_g(W)‖`. With the spectral norm the sandwich
/// `‖W − P(W)‖ ≤ E(W) ≤ 2‖W − P(W)‖` is checked before returning.
pub fn worst_case_defect(layer: &LinearLayerSpec, kind: NormKind) -> Result<DefectReport> {
    let order = layer.rep_in().group().order();
    let mut per_element = Vec::with_capacity(order);
    for g in 0..order {
        per_element.push((g, defect_at(layer, g, kind)?));
    }
    let worst_case = per_element.iter().map(|(_, d)| *d).fold(0.0, f64::max);
    let p = project_finite(layer)?;
    let projection_distance = norm(&layer.weight().sub(&p)?, kind)?;
    if kind == NormKind::Spectral {
        let lower_ok = projection_distance <= worst_case + BOUND_SLACK;
        let upper_ok = worst_case <= 2.0 * projection_distance + BOUND_SLACK;
        if !(lower_ok && upper_ok) {
            return Err(Error::BoundViolation(format!(
                "defect sandwich failed: distance {projection_distance:e}, worst case {worst_case:e}"
            )));
        }
    }
    Ok(DefectReport {
        per_element,
        worst_case,
        projection_distance,
        norm_kind: kind,
    })
}

/// Unnormalised empirical defect
/// `Σ_{k,l} ‖act_out(T(x_k), θ_l) − T(act_in(x_k, θ_l))‖₂`.
///
/// Model failures are reported with the offending `(sample, rotation)`.
pub fn empirical_defect<X, M, AI, AO>(
    model: M,
    inputs: &[X],
    rotations: &[f64],
    act_in: AI,
    act_out: AO,
) -> Result<f64>
where
    M: Fn(&X) -> std::result::Result<Vec<f64>, String>,
    AI: Fn(&X, f64) -> X,
    AO: Fn(&[f64], f64) -> Vec<f64>,
{
    if rotations.is_empty() {
        return invalid("empirical defect needs at least one rotation");
    }
    let mut total = 0.0;
    for (k, x) in inputs.iter().enumerate() {
        let eval = |v: &X, l: usize| {
            model(v).map_err(|message| Error::Evaluation {
                sample: k,
                rotation: l,
                message,
            })
        };
        let base = eval(x, 0)?;
        for (l, &theta) in rotations.iter().enumerate() {
            let expected = act_out(&base, theta);
            let actual = eval(&act_in(x, theta), l)?;
            if expected.len() != actual.len() {
                return Err(Error::Evaluation {
                    sample: k,
                    rotation: l,
                    message: "output length changed under rotation".into(),
                });
            }
            let term = expected
                .iter()
                .zip(&actual)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if !term.is_finite() {
                return Err(Error::Evaluation {
                    sample: k,
                    rotation: l,
                    message: "non-finite model output".into(),
                });
            }
            total += term;
        }
    }
    Ok(total)
}

/// Planar rotation by `theta` (counter-clockwise).
pub fn rotate_point(p: [f64; 2], theta: f64) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

/// Pointwise nonlinearity placed between two linear stages.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Identity,
    /// `max(Re z, 0) + i·Im z`.
    Relu,
    Scaling(f64),
}

impl Activation {
    pub fn lipschitz(self) -> f64 {
        match self {
            Activation::Identity | Activation::Relu => 1.0,
            Activation::Scaling(c) => c.abs(),
        }
    }

    pub fn apply(self, v: &mut [Complex64]) {
        match self {
            Activation::Identity => {}
            Activation::Relu => v.iter_mut().for_each(|z| z.re = z.re.max(0.0)),
            Activation::Scaling(c) => v.iter_mut().for_each(|z| *z *= c),
        }
    }
}

/// Alternating linear layers and activations: `W_n ∘ σ_{n−1} ∘ … ∘ σ_1 ∘ W_1`.
#[derive(Clone, Debug)]
pub struct LayerChain {
    layers: Vec<LinearLayerSpec>,
    activations: Vec<Activation>,
}

impl LayerChain {
    /// `activations[i]` sits between `layers[i]` and `layers[i+1]`.
    pub fn new(layers: Vec<LinearLayerSpec>, activations: Vec<Activation>) -> Result<Self> {
        if layers.is_empty() {
            return invalid("a layer chain needs at least one layer");
        }
        if activations.len() + 1 != layers.len() {
            return invalid(format!(
                "{} layers need {} activations, got {}",
                layers.len(),
                layers.len() - 1,
                activations.len()
            ));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            let (a, b) = (pair[0].rep_out(), pair[1].rep_in());
            if !a.same_group(b) || a.matrices() != b.matrices() {
                return invalid(format!("representation mismatch between stages {i} and {}", i + 1));
            }
            if activations[i] == Activation::Relu && !a.is_permutation() {
                return invalid(format!(
                    "relu after stage {i} needs a permutation representation to stay equivariant"
                ));
            }
        }
        Ok(Self { layers, activations })
    }

    pub fn layers(&self) -> &[LinearLayerSpec] {
        &self.layers
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn rep_in(&self) -> &Representation {
        self.layers[0].rep_in()
    }

    pub fn rep_out(&self) -> &Representation {
        self.layers[self.layers.len() - 1].rep_out()
    }

    pub fn is_linear(&self) -> bool {
        !self.activations.contains(&Activation::Relu)
    }

    /// Lipschitz constants of every stage in order: spectral norms of the
    /// linear stages interleaved with the declared activation constants.
    pub fn lipschitz(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(2 * self.layers.len() - 1);
        for (i, layer) in self.layers.iter().enumerate() {
            out.push(norm(layer.weight(), NormKind::Spectral)?);
            if let Some(a) = self.activations.get(i) {
                out.push(a.lipschitz());
            }
        }
        Ok(out)
    }

    /// The composed map as a matrix; only for chains without relu.
    pub fn composed_matrix(&self) -> Result<ComplexMatrix> {
        if !self.is_linear() {
            return invalid("a chain containing relu has no matrix form");
        }
        let mut t = self.layers[0].weight().clone();
        for (a, layer) in self.activations.iter().zip(&self.layers[1..]) {
            if let Activation::Scaling(c) = a {
                t = t.scale_real(*c);
            }
            t = layer.weight().matmul(&t)?;
        }
        Ok(t)
    }

    pub fn evaluate(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut v = self.layers[0].weight().matvec(x)?;
        for (a, layer) in self.activations.iter().zip(&self.layers[1..]) {
            a.apply(&mut v);
            v = layer.weight().matvec(&v)?;
        }
        Ok(v)
    }

    /// Exact worst-case defect for linear chains. For relu chains, the
    /// largest sampled gain `‖ρ_out(g)T(x) − T(ρ_in(g)x)‖ / ‖x‖`, which is
    /// the operator norm of the defect when the chain is linear.
    ///
    /// The gain rather than the Lipschitz quotient of the defect is used:
    /// the telescoping argument behind the composition bound needs
    /// `‖G(a) − G(b)‖ ≤ Lip(G)‖a − b‖` only, while the Lipschitz quotient
    /// of `G∘a − G∘b` is not controlled by `Lip(G)·Lip(a − b)` for
    /// nonlinear `G`.
    fn chain_defect(&self, kind: NormKind) -> Result<(f64, bool)> {
        if self.is_linear() {
            let layer = LinearLayerSpec::new(self.composed_matrix()?, self.rep_in().clone(), self.rep_out().clone())?;
            let order = layer.rep_in().group().order();
            let mut worst: f64 = 0.0;
            for g in 0..order {
                worst = worst.max(defect_at(&layer, g, kind)?);
            }
            return Ok((worst, false));
        }
        let (rin, rout) = (self.rep_in(), self.rep_out());
        let mut r = rng(GAIN_SAMPLE_SEED);
        let mut worst: f64 = 0.0;
        for _ in 0..GAIN_SAMPLES {
            let x = random_vector(rin.dim(), &mut r);
            let size = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if size == 0.0 {
                continue;
            }
            let tx = self.evaluate(&x)?;
            for g in 0..rin.group().order() {
                let lhs = rout.matrix(g).matvec(&tx)?;
                let rhs = self.evaluate(&rin.matrix(g).matvec(&x)?)?;
                let num = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
                worst = worst.max(num / size);
            }
        }
        Ok((worst, true))
    }
}

/// Outcome of a composition-bound evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositionCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// True when `lhs` is a sampled lower estimate (relu chains).
    pub sampled: bool,
}

fn check_bound_norm(kind: NormKind) -> Result<()> {
    match kind {
        NormKind::Spectral | NormKind::Frobenius => Ok(()),
        other => invalid(format!(
            "composition bounds need an operator-compatible norm (spectral or frobenius), got {other}"
        )),
    }
}

/// `E(T) ≤ Σ_i (Π_{m≠i} L_m)·E(f_i)`, with activations contributing no defect.
pub fn composition_bound_check(chain: &LayerChain, kind: NormKind) -> Result<CompositionCheck> {
    check_bound_norm(kind)?;
    let lips = chain.lipschitz()?;
    let mut rhs = 0.0;
    for (i, layer) in chain.layers.iter().enumerate() {
        let stage = 2 * i;
        let others: f64 = lips
            .iter()
            .enumerate()
            .filter(|(m, _)| *m != stage)
            .map(|(_, l)| *l)
            .product();
        let order = layer.rep_in().group().order();
        let mut e: f64 = 0.0;
        for g in 0..order {
            e = e.max(defect_at(layer, g, kind)?);
        }
        rhs += others * e;
    }
    let (lhs, sampled) = chain.chain_defect(kind)?;
    Ok(CompositionCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + BOUND_SLACK,
        sampled,
    })
}

/// Network constant `C = 2·(Π Lip σ_j)·max_k Π_{r≠k} ‖W^(r)‖` and the
/// evaluated inequality `E(T) ≤ C·Σ_l ‖W^(l) − P(W^(l))‖` (spectral norms).
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkBound {
    pub constant: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub sampled: bool,
}

pub fn network_bound_constant(chain: &LayerChain) -> Result<NetworkBound> {
    let norms: Vec<f64> = chain
        .layers
        .iter()
        .map(|l| norm(l.weight(), NormKind::Spectral))
        .collect::<Result<_>>()?;
    let act: f64 = chain.activations.iter().map(|a| a.lipschitz()).product();
    let max_prod = (0..norms.len())
        .map(|k| {
            norms
                .iter()
                .enumerate()
                .filter(|(r, _)| *r != k)
                .map(|(_, n)| *n)
                .product::<f64>()
        })
        .fold(0.0, f64::max);
    let constant = 2.0 * act * max_prod;
    let mut dist_sum = 0.0;
    for layer in &chain.layers {
        let p = project_finite(layer)?;
        dist_sum += norm(&layer.weight().sub(&p)?, NormKind::Spectral)?;
    }
    let (lhs, sampled) = chain.chain_defect(NormKind::Spectral)?;
    let rhs = constant * dist_sum;
    Ok(NetworkBound {
        constant,
        lhs,
        rhs,
        holds: lhs <= rhs + BOUND_SLACK,
        sampled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::group::{change_of_basis, make_cyclic, make_dihedral, regular_representation};
    use crate::random::{random_matrix, random_unitary};
    use std::sync::Arc;

    fn c4_layer(seed: u64) -> LinearLayerSpec {
        let g = Arc::new(make_cyclic(4).unwrap());
        let reg = regular_representation(g).unwrap();
        LinearLayerSpec::new(random_matrix(4, 4, &mut rng(seed)), reg.clone(), reg).unwrap()
    }

    #[test]
    fn defect_at_examples() {
        let layer = c4_layer(1);
        assert_eq!(defect_at(&layer, 0, NormKind::Frobenius).unwrap(), 0.0);
        let eq = layer.with_weight(project_finite(&layer).unwrap()).unwrap();
        for g in 0..4 {
            assert!(defect_at(&eq, g, NormKind::Spectral).unwrap() < 1e-10);
        }
        // from scratch: (ρ(1) W)[i][j] = W[i-1][j], (W ρ(1))[i][j] = W[i][j+1]
        let w = layer.weight();
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                acc += (w[((i + 3) % 4, j)] - w[(i, (j + 1) % 4)]).norm_sqr();
            }
        }
        assert!((defect_at(&layer, 1, NormKind::Frobenius).unwrap() - acc.sqrt()).abs() < 1e-13);
        assert!(defect_at(&layer, 4, NormKind::Frobenius).is_err());
    }

    #[test]
    fn worst_case_examples() {
        let layer = c4_layer(2);
        let eq = layer.with_weight(project_finite(&layer).unwrap()).unwrap();
        let rep = worst_case_defect(&eq, NormKind::Spectral).unwrap();
        assert!(rep.worst_case < 1e-10 && rep.projection_distance < 1e-10);

        let anti = layer.weight().sub(eq.weight()).unwrap();
        let anti_layer = layer.with_weight(anti.clone()).unwrap();
        let rep = worst_case_defect(&anti_layer, NormKind::Spectral).unwrap();
        let t = norm(&anti, NormKind::Spectral).unwrap();
        assert!((rep.projection_distance - t).abs() < 1e-9);
        assert!(rep.worst_case >= t - 1e-9 && rep.worst_case <= 2.0 * t + 1e-9);
        let max = rep.per_element.iter().map(|(_, d)| *d).fold(0.0, f64::max);
        assert_eq!(max, rep.worst_case);
    }

    #[test]
    fn defect_is_invariant_under_common_change_of_basis() {
        let g = Arc::new(make_dihedral(3).unwrap());
        let reg = regular_representation(g).unwrap();
        let mut r = rng(3);
        let w = random_matrix(6, 6, &mut r);
        let u = random_unitary(6, &mut r);
        let layer = LinearLayerSpec::new(w.clone(), reg.clone(), reg.clone()).unwrap();
        let moved_rep = change_of_basis(&reg, &u).unwrap();
        let moved_w = u.matmul(&w).unwrap().matmul(&u.conj_transpose()).unwrap();
        let moved = LinearLayerSpec::new(moved_w, moved_rep.clone(), moved_rep).unwrap();
        for g in 0..6 {
            let a = defect_at(&layer, g, NormKind::Spectral).unwrap();
            let b = defect_at(&moved, g, NormKind::Spectral).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn empirical_defect_examples() {
        let mut r = rng(4);
        let pts: Vec<[f64; 2]> = (0..100).map(|_| [r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)]).collect();
        let model = |p: &[f64; 2]| Ok(vec![p[0] * p[0] + p[1] * p[1]]);
        let thetas: Vec<f64> = (0..16).map(|k| k as f64 * std::f64::consts::PI / 8.0).collect();
        let e = empirical_defect(model, &pts, &thetas, |p, t| rotate_point(*p, t), |y, _| y.to_vec()).unwrap();
        assert!(e < 1e-10);
        let skewed = |p: &[f64; 2]| Ok(vec![p[0]]);
        let zero = empirical_defect(skewed, &pts, &[0.0], |p, t| rotate_point(*p, t), |y, _| y.to_vec()).unwrap();
        assert_eq!(zero, 0.0);
        let few = empirical_defect(skewed, &pts, &thetas[..4], |p, t| rotate_point(*p, t), |y, _| y.to_vec()).unwrap();
        let more = empirical_defect(skewed, &pts, &thetas, |p, t| rotate_point(*p, t), |y, _| y.to_vec()).unwrap();
        assert!(more >= few && few > 0.0);
        assert!(empirical_defect(skewed, &pts, &[], |p, t| rotate_point(*p, t), |y, _| y.to_vec()).is_err());
    }

    #[test]
    fn empirical_defect_reports_failing_pair() {
        let pts = vec![[1.0, 0.0], [0.0, 1.0]];
        let model = |p: &[f64; 2]| {
            if p[1] > 0.99 {
                Err("boom".to_string())
            } else {
                Ok(vec![p[0]])
            }
        };
        let err = empirical_defect(model, &pts, &[0.0, std::f64::consts::FRAC_PI_2], |p, t| rotate_point(*p, t), |y, _| y.to_vec())
            .unwrap_err();
        assert!(matches!(err, Error::Evaluation { sample: 0, rotation: 1, .. }), "{err}");
    }

    #[test]
    fn chain_validation() {
        let a = c4_layer(5);
        assert!(LayerChain::new(vec![a.clone(), a.clone()], vec![]).is_err());
        let g = Arc::new(make_cyclic(4).unwrap());
        let u = random_unitary(4, &mut rng(6));
        let twisted = change_of_basis(&regular_representation(g).unwrap(), &u).unwrap();
        let b = LinearLayerSpec::new(random_matrix(4, 4, &mut rng(7)), twisted.clone(), twisted).unwrap();
        assert!(LayerChain::new(vec![a.clone(), b.clone()], vec![Activation::Identity]).is_err());
        assert!(LayerChain::new(vec![b.clone(), b], vec![Activation::Relu]).is_err());
        assert!(LayerChain::new(vec![a.clone(), a], vec![Activation::Relu]).is_ok());
    }

    #[test]
    fn composition_examples() {
        let layer = c4_layer(8);
        let eq = layer.with_weight(project_finite(&layer).unwrap()).unwrap();
        let chain = LayerChain::new(vec![eq.clone(), eq.clone()], vec![Activation::Scaling(0.5)]).unwrap();
        let check = composition_bound_check(&chain, NormKind::Spectral).unwrap();
        assert!(check.lhs < 1e-10 && check.rhs < 1e-10 && check.holds);

        let single = LayerChain::new(vec![layer.clone()], vec![]).unwrap();
        let check = composition_bound_check(&single, NormKind::Spectral).unwrap();
        assert_eq!(check.lhs, check.rhs);
        let net = network_bound_constant(&single).unwrap();
        assert_eq!(net.constant, 2.0);
        assert!(net.holds);
        assert!(composition_bound_check(&single, NormKind::EntryInfinity).is_err());

        let relu = LayerChain::new(vec![layer.clone(), c4_layer(9), c4_layer(10)], vec![Activation::Relu, Activation::Relu]).unwrap();
        let check = composition_bound_check(&relu, NormKind::Spectral).unwrap();
        assert!(check.sampled && check.holds);
    }
}
