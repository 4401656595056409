//! Adam training loop for the operator: mean relative-L2 loss, cosine
//! learning-rate decay, early stopping on a held-out slice with
//! best-weights restore. Single-threaded and bitwise deterministic for a
//! fixed (init seed, shuffle stream) pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fno::{backward_from_cache, forward, forward_cached, init_params, FnoConfig, FnoParams};
use crate::grid::{rel_l2_error, Field, ValueKind};
use crate::seeds;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Cosine decay floor as a fraction of the initial rate.
    pub lr_floor_factor: f64,
    pub patience: usize,
    /// Fraction of the dataset held out for validation (last samples).
    pub val_fraction: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// A batch loss above this (or non-finite) aborts training.
    pub divergence_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 100,
            batch_size: 8,
            learning_rate: 1e-3,
            lr_floor_factor: 0.1,
            patience: 20,
            val_fraction: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            divergence_threshold: 1e6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(0.0..=1.0).contains(&self.lr_floor_factor) {
            return Err(Error::Config("learning rate must be positive, floor in [0,1]".into()));
        }
        if !(0.0..0.5).contains(&self.val_fraction) {
            return Err(Error::Config("validation fraction must be in [0, 0.5)".into()));
        }
        if !(self.divergence_threshold > 0.0) {
            return Err(Error::Config("divergence threshold must be positive".into()));
        }
        Ok(())
    }
}

/// Paired model inputs and targets, both real-valued multichannel fields.
#[derive(Clone, Debug)]
pub struct Dataset {
    inputs: Vec<Field>,
    targets: Vec<Field>,
}

impl Dataset {
    pub fn new(inputs: Vec<Field>, targets: Vec<Field>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::Shape(format!(
                "{} inputs vs {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if inputs.is_empty() {
            return Err(Error::Config("dataset is empty".into()));
        }
        for (x, y) in inputs.iter().zip(&targets) {
            if x.value_kind() != ValueKind::Real || y.value_kind() != ValueKind::Real {
                return Err(Error::Shape("model samples must be real-valued".into()));
            }
            if x.grid() != y.grid() {
                return Err(Error::Grid("input and target grids differ".into()));
            }
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn pair(&self, i: usize) -> (&Field, &Field) {
        (&self.inputs[i], &self.targets[i])
    }

    /// Split off the last `ceil(frac * n)` samples as validation.
    fn split(&self, frac: f64) -> (Vec<usize>, Vec<usize>) {
        let n = self.len();
        let n_val = ((frac * n as f64).round() as usize).min(n.saturating_sub(1));
        let cut = n - n_val;
        ((0..cut).collect(), (cut..n).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub train_history: Vec<f64>,
    pub val_history: Vec<f64>,
}

/// Relative-L2 loss of one sample and its output cotangent.
///
/// With a uniform grid the cell volumes cancel between numerator and
/// denominator, so plain vector norms suffice: L = |y - t| / |t| and
/// dL/dy_j = (y_j - t_j) / (|y - t| |t|).
fn sample_loss(y: &Field, t: &Field) -> Result<(f64, Option<Field>)> {
    let yv = y.as_real()?;
    let tv = t.as_real()?;
    if yv.len() != tv.len() {
        return Err(Error::Shape("output and target sizes differ".into()));
    }
    let mut rr = 0.0;
    let mut tt = 0.0;
    for (a, b) in yv.iter().zip(tv) {
        rr += (a - b) * (a - b);
        tt += b * b;
    }
    let (rn, tn) = (rr.sqrt(), tt.sqrt());
    if tn < 1e-300 {
        return Err(Error::Degenerate("zero-norm training target".into()));
    }
    if rn == 0.0 {
        // Exact match: the loss is at its minimum and the cotangent vanishes.
        return Ok((0.0, None));
    }
    let scale = 1.0 / (rn * tn);
    let cot: Vec<f64> = yv.iter().zip(tv).map(|(a, b)| (a - b) * scale).collect();
    Ok((
        rn / tn,
        Some(Field::from_real(y.grid().clone(), y.channels(), cot)?),
    ))
}

/// Mean relative-L2 error of the model over a dataset; order-invariant.
pub fn evaluate(params: &FnoParams, data: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..data.len() {
        let (x, t) = data.pair(i);
        let y = forward(params, x)?;
        total += rel_l2_error(&y, t)?;
    }
    Ok(total / data.len() as f64)
}

fn evaluate_indices(params: &FnoParams, data: &Dataset, idx: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for &i in idx {
        let (x, t) = data.pair(i);
        let y = forward(params, x)?;
        total += rel_l2_error(&y, t)?;
    }
    Ok(total / idx.len() as f64)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= lr * mh / (vh.sqrt() + cfg.adam_eps);
        }
    }
}

fn cosine_lr(cfg: &TrainConfig, epoch: usize) -> f64 {
    let floor = cfg.learning_rate * cfg.lr_floor_factor;
    let progress = epoch as f64 / cfg.max_epochs.max(1) as f64;
    floor
        + (cfg.learning_rate - floor) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Fisher-Yates with the epoch's derived stream; avoids SliceRandom so the
/// permutation is pinned to our own RNG draws alone.
fn shuffled(n: usize, shuffle_base: &[u64], epoch: usize) -> Vec<usize> {
    let mut parts = shuffle_base.to_vec();
    parts.push(epoch as u64);
    let mut rng = seeds::rng_from(&parts);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (rand::Rng::gen::<u64>(&mut rng) % (i as u64 + 1)) as usize;
        idx.swap(i, j);
    }
    idx
}

/// Train from a fresh initialization; returns the best-validation weights
/// and the loss history. `shuffle_base` is extended with the epoch number
/// to derive each epoch's permutation.
pub fn train(
    fno: &FnoConfig,
    cfg: &TrainConfig,
    data: &Dataset,
    init_seed: u64,
    shuffle_base: &[u64],
) -> Result<(FnoParams, TrainReport)> {
    cfg.validate()?;
    let (train_idx, val_idx) = data.split(cfg.val_fraction);
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::Config(
            "dataset too small to carve out a validation slice".into(),
        ));
    }

    let mut params = init_params(fno, init_seed)?;
    let n_params = params.as_flat().len();
    let mut adam = Adam::new(n_params);
    let mut grad = vec![0.0; n_params];

    let mut best_flat = params.as_flat().to_vec();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut train_history = Vec::new();
    let mut val_history = Vec::new();
    let mut epochs_run = 0;

    for epoch in 0..cfg.max_epochs {
        let order = shuffled(train_idx.len(), shuffle_base, epoch);
        let lr = cosine_lr(cfg, epoch);
        let mut epoch_loss = 0.0;

        for chunk in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            let inv = 1.0 / chunk.len() as f64;
            for &k in chunk {
                let (x, t) = data.pair(train_idx[k]);
                let (y, cache) = forward_cached(&params, x)?;
                let (loss, cot) = sample_loss(&y, t)?;
                batch_loss += loss * inv;
                if let Some(mut cot) = cot {
                    cot.scale(inv);
                    let (g, _) = backward_from_cache(&params, &cache, &cot)?;
                    for (acc, gi) in grad.iter_mut().zip(&g) {
                        *acc += gi;
                    }
                }
            }
            if !batch_loss.is_finite() || batch_loss > cfg.divergence_threshold {
                return Err(Error::TrainingDiverged {
                    epoch,
                    detail: format!("batch loss {batch_loss}"),
                });
            }
            adam.step(params.as_flat_mut(), &grad, lr, cfg);
            epoch_loss += batch_loss * chunk.len() as f64;
        }
        epoch_loss /= train_idx.len() as f64;

        let val_loss = evaluate_indices(&params, data, &val_idx)?;
        if !val_loss.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                detail: "non-finite validation loss".into(),
            });
        }
        train_history.push(epoch_loss);
        val_history.push(val_loss);
        epochs_run = epoch + 1;

        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_flat.copy_from_slice(params.as_flat());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }

    let best = FnoParams::from_flat(fno.clone(), best_flat)?;
    Ok((
        best,
        TrainReport {
            epochs_run,
            best_epoch,
            best_val_loss: best_val,
            train_history,
            val_history,
        },
    ))
}
