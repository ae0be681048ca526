//! Mini-batch training of the authorship model with binary cross-entropy,
//! Adam and a linear-cosine learning-rate schedule.

mod adam;
mod grid;
mod schedule;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;

use crate::corpus::FeatureStore;
use crate::dataset::LabeledPair;
use crate::model::{ElvisModel, Mode, Real};
use crate::{seed, Error, Result};

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use grid::{grid_search, GridConfig, GridEntry, GridReport};
pub use schedule::{lr_at, LinearCosine};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub adam: AdamConfig,
    pub schedule: LinearCosine,
    pub shuffle_seed: u64,
    pub dropout_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 1024,
            base_lr: 1e-3,
            adam: AdamConfig::default(),
            schedule: LinearCosine::default(),
            shuffle_seed: 0,
            dropout_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.base_lr
            )));
        }
        Ok(())
    }
}

/// `-(y ln p + (1 - y) ln(1 - p))` for `p` strictly inside (0, 1).
pub fn bce_loss(p: f64, label: f64) -> f64 {
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub mean_loss: f64,
    pub lr_at_epoch_start: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub steps: u64,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,mean_loss,lr_at_epoch_start\n");
        for e in &self.epochs {
            s.push_str(&format!(
                "{},{},{}\n",
                e.epoch, e.mean_loss, e.lr_at_epoch_start
            ));
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Train `model` in place. Every pair's user must be in the model's
/// vocabulary and every photo in `store`.
///
/// Pairs are reshuffled each epoch with a seed derived from
/// `(shuffle_seed, epoch)`; dropout masks use `(dropout_seed, step)`.
/// The run stops with [`Error::Diverged`] as soon as a loss, gradient or
/// parameter becomes non-finite.
pub fn train<T: Real>(
    model: &mut ElvisModel<T>,
    pairs: &[LabeledPair],
    store: &FeatureStore,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyTrainSet);
    }

    // Resolve ids once; features of distinct photos go into a dense table.
    let mut photo_row: HashMap<&str, usize> = HashMap::new();
    let mut photo_order: Vec<&str> = Vec::new();
    let mut examples: Vec<(usize, usize, f64)> = Vec::with_capacity(pairs.len());
    for p in pairs {
        let u = model.user_index(&p.user_id)?;
        let row = *photo_row.entry(&p.photo_id).or_insert_with(|| {
            photo_order.push(&p.photo_id);
            photo_order.len() - 1
        });
        examples.push((u, row, f64::from(p.label)));
    }
    let table = model.gather_features(photo_order.iter().copied(), store)?;
    let dim = table.ncols();

    let n = examples.len();
    let batches = n.div_ceil(config.batch_size) as u64;
    let total_steps = config.epochs as u64 * batches;
    let mut state = AdamState::new(&model.params);
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0u64;

    for epoch in 0..config.epochs {
        let lr_start = lr_at(step, total_steps, config.base_lr, &config.schedule);
        order.sort_unstable();
        order.shuffle(&mut seed::rng(seed::derive(
            config.shuffle_seed,
            &[epoch as u64],
        )));
        let mut loss_sum = 0.0;

        for chunk in order.chunks(config.batch_size) {
            let users: Vec<usize> = chunk.iter().map(|&i| examples[i].0).collect();
            let labels: Vec<f64> = chunk.iter().map(|&i| examples[i].2).collect();
            let mut x = Array2::zeros((chunk.len(), dim));
            for (mut row, &i) in x.rows_mut().into_iter().zip(chunk) {
                row.assign(&table.row(examples[i].1));
            }

            let mode = Mode::Train {
                dropout_seed: seed::derive(config.dropout_seed, &[step]),
            };
            let (probs, cache) = model.forward_batch(&users, x.view(), mode)?;
            let batch_loss: f64 = probs
                .iter()
                .zip(&labels)
                .map(|(&p, &y)| bce_loss(p, y))
                .sum();
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    step,
                    reason: "non-finite loss".into(),
                });
            }
            loss_sum += batch_loss;

            let grads = model.backward(&cache.expect("train mode returns a cache"), &labels)?;
            let lr = lr_at(step, total_steps, config.base_lr, &config.schedule);
            adam_step(&mut model.params, &grads, &mut state, lr, &config.adam).map_err(|e| {
                Error::Diverged {
                    step,
                    reason: e.to_string(),
                }
            })?;
            if !model.all_finite() {
                return Err(Error::Diverged {
                    step,
                    reason: "non-finite parameter".into(),
                });
            }
            step += 1;
        }

        let mean_loss = loss_sum / n as f64;
        log::debug!(
            "epoch {} mean loss {mean_loss:.6} lr {lr_start:.3e}",
            epoch + 1
        );
        history.push(EpochRecord {
            epoch: epoch + 1,
            mean_loss,
            lr_at_epoch_start: lr_start,
        });
    }
    Ok(TrainHistory {
        epochs: history,
        steps: step,
    })
}
