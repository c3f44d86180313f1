//! Synthetic planar datasets.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::random::{rng, rng_stream};

const SPLIT_STREAM: u64 = 7;

pub const DEFAULT_PER_CLASS: usize = 350;
pub const TRAIN_FRACTION: f64 = 0.8;

pub const RING_RADII: (f64, f64) = (1.1, 2.2);
pub const RING_JITTER: (f64, f64) = (0.15, 0.22);
pub const RING_FREQUENCY: f64 = 5.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ToyDataset {
    pub points: Vec<[f64; 2]>,
    /// `+1` or `−1`.
    pub labels: Vec<f64>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl ToyDataset {
    /// Builds a dataset with a seeded 80/20 shuffle split.
    pub fn with_split(points: Vec<[f64; 2]>, labels: Vec<f64>, seed: u64) -> Result<Self> {
        let n = points.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_stream(seed, SPLIT_STREAM));
        let n_train = (TRAIN_FRACTION * n as f64).round() as usize;
        let test = order.split_off(n_train);
        Self::new(points, labels, order, test)
    }

    pub fn new(points: Vec<[f64; 2]>, labels: Vec<f64>, train: Vec<usize>, test: Vec<usize>) -> Result<Self> {
        let n = points.len();
        if labels.len() != n {
            return invalid("one label per point is required");
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return invalid("labels must be +1 or -1");
        }
        if points.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return invalid("points must be finite");
        }
        let mut seen = vec![false; n];
        for &i in train.iter().chain(&test) {
            if i >= n || seen[i] {
                return invalid("train/test split must partition the points");
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return invalid("train/test split must cover every point");
        }
        Ok(Self {
            points,
            labels,
            train,
            test,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> (Vec<[f64; 2]>, Vec<f64>) {
        (
            idx.iter().map(|&i| self.points[i]).collect(),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }
}

fn polar(r: f64, theta: f64) -> [f64; 2] {
    [r * theta.cos(), r * theta.sin()]
}

/// Unit disk (+1) against an outer annular wedge (−1).
pub fn gen_disk_annulus(n_per_class: usize, seed: u64) -> Result<ToyDataset> {
    if n_per_class == 0 {
        return invalid("need at least one point per class");
    }
    let mut r = rng(seed);
    let mut points = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for _ in 0..n_per_class {
        let rad = r.gen_range(0.0..=1.0);
        let theta = r.gen_range(0.0..2.0 * PI);
        points.push(polar(rad, theta));
        labels.push(1.0);
    }
    for _ in 0..n_per_class {
        let rad = r.gen_range(2.3..=3.0);
        let theta = r.gen_range(-PI / 4.0..PI / 4.0);
        points.push(polar(rad, theta));
        labels.push(-1.0);
    }
    ToyDataset::with_split(points, labels, seed)
}

/// Two noisy rings whose radii oscillate as `σ_⊥ sin(5θ)`.
/// Negative radii are kept, which reflects the point through the origin.
pub fn gen_wavey_rings(n_per_class: usize, sigma_perp: f64, seed: u64) -> Result<ToyDataset> {
    if n_per_class == 0 {
        return invalid("need at least one point per class");
    }
    if !(sigma_perp >= 0.0 && sigma_perp.is_finite()) {
        return invalid("sigma_perp must be a nonnegative real");
    }
    let mut r = rng(seed);
    let mut points = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for (label, base, jitter) in [(1.0, RING_RADII.0, RING_JITTER.0), (-1.0, RING_RADII.1, RING_JITTER.1)] {
        for _ in 0..n_per_class {
            let theta = r.gen_range(0.0..2.0 * PI);
            let eps = r.gen_range(-jitter..=jitter);
            let rad = base + sigma_perp * (RING_FREQUENCY * theta).sin() + eps;
            points.push(polar(rad, theta));
            labels.push(label);
        }
    }
    ToyDataset::with_split(points, labels, seed)
}
