//! Regularised training of the approximately SO(2)-invariant toy model.
//!
//! The objective is
//! `L = BCE + λ_G Σ_i ‖W_i‖ + λ_⊥ Σ_i ‖W_i − M⊙W_i‖`
//! over the two complex layers, minimised full-batch with Adam.
//! Gradients come from the reverse-mode [`tape`].
//!
//! `hard_projection` re-applies the mask after every step. It is a testing
//! device for the exact-invariance fixed point, not part of the original
//! experiment.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::defect::{empirical_defect, rotate_point};
use crate::error::{invalid, Error, Result};
use crate::linalg::NormKind;
use crate::random::rng_stream;

mod adam;
mod data;
mod model;
pub mod tape;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use data::{
    gen_disk_annulus, gen_wavey_rings, ToyDataset, DEFAULT_PER_CLASS, RING_FREQUENCY, RING_JITTER, RING_RADII,
    TRAIN_FRACTION,
};
pub use model::{
    build_loss, embed, embed_batch, forward, loss, loss_and_gradient, radial_centers, LossGraph, LossValues,
    Penalty, ToyModelParams, RADIAL_SPAN, RADIAL_WIDTH,
};

const INIT_STREAM: u64 = 2;
const ROTATION_STREAM: u64 = 3;

/// Evenly spaced plus seeded-random rotation angles used for the defect.
pub const EVEN_ROTATIONS: usize = 16;
pub const RANDOM_ROTATIONS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda_g: f64,
    pub lambda_perp: f64,
    pub norm_kind: NormKind,
    pub lr: f64,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub hidden: usize,
    pub max_degree: usize,
    pub channels: usize,
    pub hard_projection: bool,
    pub defect_every: usize,
    /// Wavey-rings amplitude; `None` selects the disk/annulus data.
    pub sigma_perp: Option<f64>,
    pub n_per_class: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_g: 0.0,
            lambda_perp: 0.0,
            norm_kind: NormKind::Frobenius,
            lr: 0.003,
            epochs: 200,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            hidden: 8,
            max_degree: 4,
            channels: 4,
            hard_projection: false,
            defect_every: 20,
            sigma_perp: None,
            n_per_class: DEFAULT_PER_CLASS,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_g >= 0.0 && self.lambda_g.is_finite()) || !(self.lambda_perp >= 0.0 && self.lambda_perp.is_finite()) {
            return invalid("lambda_g and lambda_perp must be finite and nonnegative");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return invalid("lr must be positive");
        }
        if self.epochs == 0 {
            return invalid("epochs must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return invalid("adam hyperparameters out of range");
        }
        if self.hidden == 0 || self.channels == 0 {
            return invalid("hidden and channels must be positive");
        }
        if self.defect_every == 0 {
            return invalid("defect_every must be positive");
        }
        if self.n_per_class == 0 {
            return invalid("n_per_class must be positive");
        }
        if let Some(s) = self.sigma_perp {
            if !(s >= 0.0 && s.is_finite()) {
                return invalid("sigma_perp must be nonnegative");
            }
        }
        self.norm_kind.validate()
    }

    pub fn adam(&self) -> AdamHyper {
        AdamHyper {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn penalty(&self) -> Penalty {
        Penalty {
            lambda_g: self.lambda_g,
            lambda_perp: self.lambda_perp,
            norm_kind: self.norm_kind,
        }
    }

    /// The dataset this configuration trains on.
    pub fn dataset(&self) -> Result<ToyDataset> {
        match self.sigma_perp {
            None => gen_disk_annulus(self.n_per_class, self.seed),
            Some(s) => gen_wavey_rings(self.n_per_class, s, self.seed),
        }
    }
}

/// State after `epoch` optimiser steps.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub task_loss: f64,
    /// Unweighted `Σ_i ‖W_i‖`.
    pub penalty_g: f64,
    /// Unweighted `Σ_i ‖W_i − M⊙W_i‖`.
    pub penalty_perp: f64,
    pub test_accuracy: f64,
    pub empirical_defect: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub params: ToyModelParams,
    pub history: Vec<HistoryRow>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Final empirical defect over all points.
    pub final_defect: f64,
    pub rotations: Vec<f64>,
}

/// 16 evenly spaced angles followed by 16 seeded uniform ones.
pub fn defect_rotations(seed: u64) -> Vec<f64> {
    let mut r = rng_stream(seed, ROTATION_STREAM);
    let mut out: Vec<f64> = (0..EVEN_ROTATIONS)
        .map(|k| 2.0 * PI * k as f64 / EVEN_ROTATIONS as f64)
        .collect();
    out.extend((0..RANDOM_ROTATIONS).map(|_| r.gen_range(0.0..2.0 * PI)));
    out
}

/// Unnormalised empirical defect of the logit over `points`.
pub fn model_defect(params: &ToyModelParams, points: &[[f64; 2]], rotations: &[f64]) -> Result<f64> {
    params.validate()?;
    empirical_defect(
        |p: &[f64; 2]| forward(*p, params).map(|v| vec![v]).map_err(|e| e.to_string()),
        points,
        rotations,
        |p, theta| rotate_point(*p, theta),
        |y, _| y.to_vec(),
    )
}

/// Fraction of points whose logit sign matches the ±1 label.
/// Returns NaN on an empty set.
pub fn accuracy(params: &ToyModelParams, points: &[[f64; 2]], labels: &[f64]) -> Result<f64> {
    if points.len() != labels.len() {
        return invalid("one label per point is required");
    }
    if points.is_empty() {
        return Ok(f64::NAN);
    }
    let mut hits = 0usize;
    for (p, &y) in points.iter().zip(labels) {
        let pred = if forward(*p, params)? > 0.0 { 1.0 } else { -1.0 };
        if pred == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / points.len() as f64)
}

/// Seeded initial parameters for `cfg`, shared by every λ at the same seed.
pub fn init_params(cfg: &TrainConfig) -> Result<ToyModelParams> {
    let mut r = rng_stream(cfg.seed, INIT_STREAM);
    ToyModelParams::init(cfg.max_degree, cfg.channels, cfg.hidden, &mut r)
}

pub fn train_toy(data: &ToyDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.train.is_empty() {
        return invalid("training split is empty");
    }
    let mut params = init_params(cfg)?;
    if cfg.hard_projection {
        params.project()?;
    }
    train_from(data, cfg, params)
}

/// Trains from the given starting parameters.
pub fn train_from(data: &ToyDataset, cfg: &TrainConfig, mut params: ToyModelParams) -> Result<TrainOutcome> {
    cfg.validate()?;
    params.validate()?;
    let (train_x, train_y) = data.subset(&data.train);
    let (test_x, test_y) = data.subset(&data.test);
    if train_x.is_empty() {
        return invalid("training split is empty");
    }
    let rotations = defect_rotations(cfg.seed);
    let hp = cfg.adam();
    let penalty = cfg.penalty();
    let mut flat = params.to_flat();
    let mut state = AdamState::new(flat.len());
    let mut history = Vec::with_capacity(cfg.epochs + 1);
    let mut final_defect = f64::NAN;

    for epoch in 0..=cfg.epochs {
        let (values, grad) = loss_and_gradient(&params, &train_x, &train_y, penalty)?;
        if !values.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::TrainingDiverged {
                last_finite_epoch: epoch.saturating_sub(1),
            });
        }
        let empirical_defect = if epoch % cfg.defect_every == 0 || epoch == cfg.epochs {
            let d = model_defect(&params, &data.points, &rotations)?;
            final_defect = d;
            Some(d)
        } else {
            None
        };
        history.push(HistoryRow {
            epoch,
            task_loss: values.task,
            penalty_g: values.penalty_g,
            penalty_perp: values.penalty_perp,
            test_accuracy: accuracy(&params, &test_x, &test_y)?,
            empirical_defect,
        });
        if epoch == cfg.epochs {
            break;
        }
        adam_step(&mut flat, &grad, &mut state, &hp)?;
        params.set_flat(&flat)?;
        if cfg.hard_projection {
            params.project()?;
            flat = params.to_flat();
        }
    }

    Ok(TrainOutcome {
        train_accuracy: accuracy(&params, &train_x, &train_y)?,
        test_accuracy: accuracy(&params, &test_x, &test_y)?,
        final_defect,
        params,
        history,
        rotations,
    })
}
