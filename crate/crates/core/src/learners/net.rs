//! One-hidden-layer network trained with Adam on an MSE + soft-Dice loss.
//!
//! speckle → dense(hidden) → ReLU → dense(target_pixels) → logistic.
//! Gradients are derived by hand; samples are matrix columns throughout.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{LearnedMapping, MappingParams};
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::learners::ridge::stack_dataset;
use crate::seed::{derive_seed, rng_from_seed, stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    pub hidden_width: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    /// Weight of the soft-Dice term; `1 − dice_weight` goes to MSE.
    pub dice_weight: f64,
    pub validation_fraction: f64,
    pub init_seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            hidden_width: 256,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 50,
            early_stop_patience: 5,
            dice_weight: 0.3,
            validation_fraction: 0.1,
            init_seed: 0,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.dice_weight) {
            return Err(Error::InvalidArgument(format!(
                "dice_weight must be in [0, 1], got {}",
                self.dice_weight
            )));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "validation_fraction must be in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if self.hidden_width == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "hidden_width and batch_size must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetParams {
    /// `(hidden, in)`
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    /// `(out, hidden)`
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

pub struct Forward {
    pub pre_hidden: DMatrix<f64>,
    pub hidden: DMatrix<f64>,
    pub output: DMatrix<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl NetParams {
    pub fn zeros(in_dim: usize, hidden: usize, out_dim: usize) -> Self {
        NetParams {
            w1: DMatrix::zeros(hidden, in_dim),
            b1: DVector::zeros(hidden),
            w2: DMatrix::zeros(out_dim, hidden),
            b2: DVector::zeros(out_dim),
        }
    }

    /// He-normal hidden weights, Xavier-normal output weights, zero biases.
    pub fn init(in_dim: usize, hidden: usize, out_dim: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let he = (2.0 / in_dim as f64).sqrt();
        let xavier = (2.0 / (hidden + out_dim) as f64).sqrt();
        let mut p = NetParams::zeros(in_dim, hidden, out_dim);
        for v in p.w1.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = he * z;
        }
        for v in p.w2.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = xavier * z;
        }
        p
    }

    pub fn in_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.w2.nrows()
    }

    pub fn is_consistent(&self) -> bool {
        self.b1.len() == self.w1.nrows()
            && self.w2.ncols() == self.w1.nrows()
            && self.b2.len() == self.w2.nrows()
    }

    pub fn forward(&self, speckles: &DMatrix<f64>) -> Forward {
        let mut pre_hidden = &self.w1 * speckles;
        for mut col in pre_hidden.column_iter_mut() {
            col += &self.b1;
        }
        let hidden = pre_hidden.map(|z| z.max(0.0));
        let mut output = &self.w2 * &hidden;
        for mut col in output.column_iter_mut() {
            col += &self.b2;
        }
        output.apply(|z| *z = sigmoid(*z));
        Forward {
            pre_hidden,
            hidden,
            output,
        }
    }

    fn blocks_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_mut_slice(),
            self.b1.as_mut_slice(),
            self.w2.as_mut_slice(),
            self.b2.as_mut_slice(),
        ]
    }

    fn blocks(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice(),
            self.b1.as_slice(),
            self.w2.as_slice(),
            self.b2.as_slice(),
        ]
    }
}

/// Column-stacked training samples.
#[derive(Clone, Debug)]
pub struct Batch {
    pub speckles: DMatrix<f64>,
    pub targets: DMatrix<f64>,
}

fn loss_of(pred: &DMatrix<f64>, targets: &DMatrix<f64>, w: f64) -> f64 {
    let (n, b) = pred.shape();
    let mse = (pred - targets).norm_squared() / (n * b) as f64;
    let dice: f64 = pred
        .column_iter()
        .zip(targets.column_iter())
        .map(|(p, t)| (2.0 * p.dot(&t) + 1.0) / (p.norm_squared() + t.norm_squared() + 1.0))
        .sum::<f64>()
        / b as f64;
    (1.0 - w) * mse + w * (1.0 - dice)
}

/// Loss `(1−w)·MSE + w·(1 − mean soft Dice)` over the batch, with
/// `SoftDice = (2Σx̂x + 1) / (Σx̂² + Σx² + 1)` per sample.
pub fn batch_loss(params: &NetParams, batch: &Batch, w: f64) -> f64 {
    loss_of(&params.forward(&batch.speckles).output, &batch.targets, w)
}

/// Loss and its gradient with respect to every parameter, by reverse-mode
/// differentiation.
pub fn loss_and_grads(params: &NetParams, batch: &Batch, w: f64) -> (f64, NetParams) {
    let f = params.forward(&batch.speckles);
    let pred = &f.output;
    let x = &batch.targets;
    let (n, b) = pred.shape();
    let loss = loss_of(pred, x, w);

    // dL/dx̂
    let mut d_out = (pred - x) * (2.0 * (1.0 - w) / (n * b) as f64);
    if w != 0.0 {
        for c in 0..b {
            let p = pred.column(c);
            let t = x.column(c);
            let num = 2.0 * p.dot(&t) + 1.0;
            let den = p.norm_squared() + t.norm_squared() + 1.0;
            let scale = w / b as f64;
            for j in 0..n {
                let dd = (2.0 * t[j] * den - num * 2.0 * p[j]) / (den * den);
                d_out[(j, c)] -= scale * dd;
            }
        }
    }
    // through the logistic
    let d_z2 = d_out.zip_map(pred, |g, s| g * s * (1.0 - s));
    let w2_grad = &d_z2 * f.hidden.transpose();
    let b2_grad = d_z2.column_sum();
    let d_h = params.w2.transpose() * &d_z2;
    let d_z1 = d_h.zip_map(&f.pre_hidden, |g, z| if z > 0.0 { g } else { 0.0 });
    let w1_grad = &d_z1 * batch.speckles.transpose();
    let b1_grad = d_z1.column_sum();
    (
        loss,
        NetParams {
            w1: w1_grad,
            b1: b1_grad,
            w2: w2_grad,
            b2: b2_grad,
        },
    )
}

struct Adam {
    m: NetParams,
    v: NetParams,
    t: i32,
}

impl Adam {
    fn new(p: &NetParams) -> Self {
        let z = NetParams::zeros(p.in_dim(), p.hidden(), p.out_dim());
        Adam {
            m: z.clone(),
            v: z,
            t: 0,
        }
    }

    fn step(&mut self, params: &mut NetParams, grads: &NetParams, cfg: &NetConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        let lr = cfg.learning_rate;
        let g_blocks = grads.blocks();
        for (((p, g), m), v) in params
            .blocks_mut()
            .into_iter()
            .zip(g_blocks)
            .zip(self.m.blocks_mut())
            .zip(self.v.blocks_mut())
        {
            for i in 0..p.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                p[i] -= lr * mh / (vh.sqrt() + cfg.epsilon);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_dice: f64,
}

#[derive(Clone, Debug)]
pub struct NetTraining {
    pub mapping: LearnedMapping,
    pub initial_loss: f64,
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
}

fn columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), idx.len(), |r, c| m[(r, idx[c])])
}

fn mean_hard_dice(pred: &DMatrix<f64>, targets: &DMatrix<f64>) -> f64 {
    let b = pred.ncols();
    let total: f64 = pred
        .column_iter()
        .zip(targets.column_iter())
        .map(|(p, t)| {
            let (mut both, mut np, mut nt) = (0usize, 0usize, 0usize);
            for (&u, &v) in p.iter().zip(t.iter()) {
                let (a, c) = (u >= 0.5, v >= 0.5);
                np += a as usize;
                nt += c as usize;
                both += (a && c) as usize;
            }
            if np + nt == 0 {
                1.0
            } else {
                2.0 * both as f64 / (np + nt) as f64
            }
        })
        .sum();
    total / b as f64
}

pub fn train_net(dataset: &Dataset, cfg: &NetConfig) -> Result<LearnedMapping> {
    Ok(train_net_logged(dataset, cfg)?.mapping)
}

/// Mini-batch Adam with a held-out validation split and early stopping on
/// the validation Dice coefficient. Returns the best-validation parameters.
pub fn train_net_logged(dataset: &Dataset, cfg: &NetConfig) -> Result<NetTraining> {
    cfg.validate()?;
    let n = dataset.len();
    if n < 10 {
        return Err(Error::InvalidArgument(format!(
            "network training needs at least 10 pairs, got {n}"
        )));
    }
    let (x_all, y_all) = stack_dataset(dataset)?;
    let td = dataset.target_dims().expect("nonempty");
    let sd = dataset.speckle_dims().expect("nonempty");

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(derive_seed(cfg.init_seed, stream::SPLIT)));
    let n_val = ((cfg.validation_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let (x_val, y_val) = (columns(&x_all, val_idx), columns(&y_all, val_idx));
    let full_train = Batch {
        speckles: columns(&y_all, train_idx),
        targets: columns(&x_all, train_idx),
    };

    let mut params = NetParams::init(sd.pixels(), cfg.hidden_width, td.pixels(), cfg.init_seed);
    let mut adam = Adam::new(&params);
    let initial_loss = batch_loss(&params, &full_train, cfg.dice_weight);
    let mut shuffle_rng = rng_from_seed(derive_seed(cfg.init_seed, stream::SHUFFLE));
    let mut epoch_order: Vec<usize> = (0..train_idx.len()).collect();

    let mut best = params.clone();
    let mut best_dice = f64::NEG_INFINITY;
    let mut best_val_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut epochs = Vec::new();
    for epoch in 1..=cfg.max_epochs {
        epoch_order.shuffle(&mut shuffle_rng);
        for (bi, chunk) in epoch_order.chunks(cfg.batch_size).enumerate() {
            let batch = Batch {
                speckles: columns(&full_train.speckles, chunk),
                targets: columns(&full_train.targets, chunk),
            };
            let (loss, grads) = loss_and_grads(&params, &batch, cfg.dice_weight);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: bi });
            }
            adam.step(&mut params, &grads, cfg);
        }
        let train_loss = batch_loss(&params, &full_train, cfg.dice_weight);
        if !train_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                batch: epoch_order.len().div_ceil(cfg.batch_size),
            });
        }
        let val_dice = mean_hard_dice(&params.forward(&y_val).output, &x_val);
        let val_loss = batch_loss(
            &params,
            &Batch {
                speckles: y_val.clone(),
                targets: x_val.clone(),
            },
            cfg.dice_weight,
        );
        epochs.push(EpochStats {
            epoch,
            train_loss,
            val_dice,
        });
        // hard Dice saturates, so ties fall back to validation loss
        if val_dice > best_dice || (val_dice == best_dice && val_loss < best_val_loss) {
            best_dice = val_dice;
            best_val_loss = val_loss;
            best = params.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.early_stop_patience {
                break;
            }
        }
    }
    Ok(NetTraining {
        mapping: LearnedMapping {
            in_dims: sd,
            out_dims: td,
            training_fingerprint: dataset.training_fingerprint(),
            params: MappingParams::SmallNet(best),
        },
        initial_loss,
        epochs,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_batch(in_dim: usize, out_dim: usize, b: usize, seed: u64) -> Batch {
        let mut rng = rng_from_seed(seed);
        Batch {
            speckles: DMatrix::from_fn(in_dim, b, |_, _| rng.random_range(0.0..1.0)),
            targets: DMatrix::from_fn(out_dim, b, |_, _| rng.random_range(0.0..1.0)),
        }
    }

    #[test]
    fn zero_params_pure_mse() {
        let batch = random_batch(5, 7, 4, 1);
        let p = NetParams::zeros(5, 3, 7);
        let (loss, _) = loss_and_grads(&p, &batch, 0.0);
        // σ(0) = 0.5 everywhere: mean over batch of ‖0.5 − x‖² / N
        let oracle: f64 = batch
            .targets
            .column_iter()
            .map(|c| c.iter().map(|v| (0.5 - v).powi(2)).sum::<f64>() / 7.0)
            .sum::<f64>()
            / 4.0;
        assert!((loss - oracle).abs() < 1e-12);
    }

    #[test]
    fn w_zero_is_plain_mse() {
        let batch = random_batch(6, 6, 3, 2);
        let p = NetParams::init(6, 4, 6, 9);
        let pred = p.forward(&batch.speckles).output;
        let mse = (0..6)
            .flat_map(|r| (0..3).map(move |c| (r, c)))
            .map(|(r, c)| (pred[(r, c)] - batch.targets[(r, c)]).powi(2))
            .sum::<f64>()
            / 18.0;
        assert!((loss_and_grads(&p, &batch, 0.0).0 - mse).abs() < 1e-12);
    }

    #[test]
    fn dead_hidden_unit_has_zero_gradient() {
        let batch = random_batch(6, 6, 3, 3);
        let mut p = NetParams::init(6, 5, 6, 4);
        // unit 4 is padding: no inputs, no bias, no outputs
        p.w1.row_mut(4).fill(0.0);
        p.b1[4] = 0.0;
        p.w2.column_mut(4).fill(0.0);
        let (_, g) = loss_and_grads(&p, &batch, 0.3);
        assert!(g.w1.row(4).iter().all(|&v| v == 0.0));
        assert_eq!(g.b1[4], 0.0);
        assert!(g.w2.column(4).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn config_validation() {
        let bad = NetConfig {
            dice_weight: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = NetConfig {
            validation_fraction: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(NetConfig::default().validate().is_ok());
    }
}
