//! Mini-batch training with Adam, gradient clipping and early stopping,
//! plus evaluation.

pub mod gradcheck;
pub mod metrics;
pub mod optim;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::layers::bce_with_logit;
use crate::model::{GradOptions, Model, ModelError, ModelKind, ModelParams};
use crate::par::Execution;
use crate::representation::ProgramTensor;

pub use gradcheck::{compare_gradients, grad_check, GradCheckReport};
pub use metrics::{render_table, Confusion, MetricsReport};
pub use optim::{clip_global_norm, Adam};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Maximum global gradient norm; 0 disables clipping.
    pub clip_norm: f64,
    /// `None` picks 32 for the sequential and 8 for the graph model.
    pub batch_size: Option<usize>,
    pub patience: usize,
    pub min_delta: f64,
    pub threshold: f64,
    pub max_epochs: usize,
    pub seed: u64,
    /// Stop as soon as inference-mode training accuracy reaches this value.
    pub target_train_accuracy: Option<f64>,
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-5,
            weight_decay: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            clip_norm: 1.0,
            batch_size: None,
            patience: 3,
            min_delta: 0.0,
            threshold: 0.5,
            max_epochs: 50,
            seed: 0,
            target_train_accuracy: None,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss or gradient at epoch {epoch}, step {step} (loss {loss})")]
    NonFiniteLoss { epoch: usize, step: usize, loss: f64 },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("{0} set is empty")]
    EmptySet(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl TrainConfig {
    pub fn batch_size_for(&self, kind: ModelKind) -> usize {
        self.batch_size.unwrap_or(match kind {
            ModelKind::Sequential => 32,
            ModelKind::Graph => 8,
        })
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let err = |m: &str| Err(TrainError::Config(m.into()));
        if !(self.learning_rate >= 0.0) || !(self.weight_decay >= 0.0) {
            return err("learning rate and weight decay must be non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return err("Adam betas must be in [0, 1)");
        }
        if self.patience == 0 {
            return err("patience must be at least 1");
        }
        if self.batch_size == Some(0) || self.max_epochs == 0 {
            return err("batch size and epoch budget must be positive");
        }
        Ok(())
    }
}

/// Programs with binary labels (1.0 = vulnerable).
#[derive(Debug, Clone, Default)]
pub struct LabeledSet {
    pub inputs: Vec<ProgramTensor>,
    pub labels: Vec<f64>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn push(&mut self, x: ProgramTensor, label: f64) {
        self.inputs.push(x);
        self.labels.push(label);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Patience rule on a monitored loss: stop after `patience` consecutive
/// epochs that fail to improve on the best value by more than `min_delta`.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    pub patience: usize,
    pub min_delta: f64,
    pub best: f64,
    pub best_epoch: Option<usize>,
    bad_epochs: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        Self {
            patience,
            min_delta,
            best: f64::INFINITY,
            best_epoch: None,
            bad_epochs: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best - self.min_delta {
            self.best = loss;
            self.best_epoch = Some(epoch);
            self.bad_epochs = 0;
            StopDecision::Improved
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub train_accuracy: Option<f64>,
    /// Largest pre-clipping gradient norm seen during the epoch.
    pub max_grad_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_val_loss: Option<f64>,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn train_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }
}

/// Seed of the dropout masks for one optimizer step.
fn step_seed(seed: u64, epoch: usize, step: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 32) | step as u64);
    rng.next_u64()
}

fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0F5A_FF1E);
    rng.set_stream(epoch as u64);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

/// Inference-mode predictions and mean loss over a set.
pub fn predict_set(model: &Model, set: &LabeledSet, exec: Execution) -> Result<(Vec<f64>, f64), ModelError> {
    let preds = model.predict_batch(&set.inputs, exec)?;
    let loss = preds
        .iter()
        .zip(&set.labels)
        .map(|(p, &y)| bce_with_logit(p.logit, y))
        .sum::<f64>()
        / set.len().max(1) as f64;
    Ok((preds.into_iter().map(|p| p.probability).collect(), loss))
}

pub fn evaluate(model: &Model, set: &LabeledSet, threshold: f64, exec: Execution) -> Result<MetricsReport, ModelError> {
    let (probs, loss) = predict_set(model, set, exec)?;
    let mut r = MetricsReport::from_predictions(&probs, &set.labels, threshold);
    r.loss = Some(loss);
    Ok(r)
}

/// Trains `model` in place. With a validation set, the parameters with the
/// lowest validation loss are restored at the end.
pub fn train(
    model: &mut Model,
    cfg: &TrainConfig,
    train_set: &LabeledSet,
    val_set: Option<&LabeledSet>,
) -> Result<TrainHistory, TrainError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptySet("training"));
    }
    let val_set = val_set.filter(|v| !v.is_empty());
    let exec = cfg.execution;
    let batch_size = cfg.batch_size_for(model.kind());
    let mut adam = Adam::new(
        &model.params,
        cfg.learning_rate,
        (cfg.beta1, cfg.beta2),
        cfg.adam_eps,
        cfg.weight_decay,
    );
    let mut stopper = EarlyStopping::new(cfg.patience, cfg.min_delta);
    let mut best: Option<ModelParams> = None;
    let mut history = TrainHistory::default();

    for epoch in 1..=cfg.max_epochs {
        let order = epoch_order(cfg.seed, epoch, train_set.len());
        let mut loss_sum = 0.0;
        let mut max_norm = 0.0f64;
        for (step, chunk) in order.chunks(batch_size).enumerate() {
            let batch: Vec<&ProgramTensor> = chunk.iter().map(|&i| &train_set.inputs[i]).collect();
            let labels: Vec<f64> = chunk.iter().map(|&i| train_set.labels[i]).collect();
            let opts = GradOptions::train(step_seed(cfg.seed, epoch, step));
            let mut out = model.batch_gradient(&batch, &labels, &opts, exec)?;
            if !out.loss.is_finite() || !out.grads.all_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    step,
                    loss: out.loss,
                });
            }
            max_norm = max_norm.max(clip_global_norm(&mut out.grads, cfg.clip_norm));
            adam.step(&mut model.params, &out.grads);
            if let Some(stats) = &out.batch_stats {
                model.update_running_stats(stats);
            }
            loss_sum += out.loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / train_set.len() as f64;

        let train_accuracy = match cfg.target_train_accuracy {
            Some(_) => Some(evaluate(model, train_set, cfg.threshold, exec)?.accuracy),
            None => None,
        };
        let val_loss = match val_set {
            Some(v) => Some(predict_set(model, v, exec)?.1),
            None => None,
        };
        log::info!(
            "epoch {epoch}: train loss {train_loss:.5}{}{}",
            val_loss.map(|v| format!(", val loss {v:.5}")).unwrap_or_default(),
            train_accuracy.map(|a| format!(", train acc {a:.4}")).unwrap_or_default()
        );
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            train_accuracy,
            max_grad_norm: max_norm,
        });

        if let Some(v) = val_loss {
            match stopper.observe(epoch, v) {
                StopDecision::Improved => best = Some(model.params.clone()),
                StopDecision::Continue => {}
                StopDecision::Stop => {
                    history.stopped_early = true;
                    break;
                }
            }
        }
        if let (Some(target), Some(acc)) = (cfg.target_train_accuracy, train_accuracy) {
            if acc >= target {
                break;
            }
        }
    }

    if let Some(p) = best {
        model.params = p;
    }
    history.best_epoch = stopper.best_epoch;
    history.best_val_loss = stopper.best_epoch.map(|_| stopper.best);
    Ok(history)
}
