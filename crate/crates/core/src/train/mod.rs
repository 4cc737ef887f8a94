//! Training protocol: class-balanced mini-batches, AdamW, plateau learning
//! rate decay and early stopping on validation average precision.

mod optim;
mod prepare;
mod trainer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::metrics::MetricError;
use crate::model::{AggregationKind, ConcatMode, InitKind, ModelConfig, ModelError};

pub use optim::{clip_global_norm, AdamW, AdamWConfig, StepOutcome};
pub use prepare::{prepare_splits, PreparedData, PreparedSplit};
pub use trainer::{batch_gradients, evaluate, train, BatchGradients, EpochRecord, EvalReport, TrainOutcome};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("{split} split is empty")]
    EmptySplit { split: &'static str },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("metric on {split} split: {source}")]
    Metric {
        split: &'static str,
        #[source]
        source: MetricError,
    },
    #[error("training diverged at epoch {epoch}, batch {batch}: {reason}")]
    Diverged {
        epoch: usize,
        batch: usize,
        reason: String,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Protocol and architecture settings for one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub patience: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub batch_size: usize,
    pub hidden: usize,
    pub t2v_dim: usize,
    pub aggregation: AggregationKind,
    pub concat: ConcatMode,
    pub init: InitKind,
    pub seed: u64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip: Option<f64>,
    /// Minimum validation AUPRC gain that counts as an improvement.
    pub min_improvement: f64,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            patience: 5,
            lr: 5e-4,
            lr_decay: 0.5,
            batch_size: 16,
            hidden: 64,
            t2v_dim: 16,
            aggregation: AggregationKind::Mean,
            concat: ConcatMode::Both,
            init: InitKind::Zeros,
            seed: 2024,
            weight_decay: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip: None,
            min_improvement: 1e-6,
            threads: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::InvalidConfig(msg));
        if self.epochs == 0 || self.batch_size == 0 || self.hidden == 0 || self.t2v_dim == 0 {
            return bad("epochs, batch size, hidden size and t2v dimension must be positive".into());
        }
        if self.patience == 0 || self.patience > self.epochs {
            return bad(format!(
                "patience must lie in [1, epochs], got {} with {} epochs",
                self.patience, self.epochs
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("lr decay must lie in (0, 1], got {}", self.lr_decay));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return bad("Adam betas must lie in [0, 1) and eps must be positive".into());
        }
        if self.weight_decay < 0.0 || self.min_improvement < 0.0 {
            return bad("weight decay and improvement threshold must be nonnegative".into());
        }
        if let Some(c) = self.clip {
            if c.is_nan() || c <= 0.0 {
                return bad(format!("clip norm must be positive, got {c}"));
            }
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        Ok(())
    }

    pub fn model_config(&self, sensors: usize, statics: usize) -> ModelConfig {
        ModelConfig {
            sensors,
            hidden: self.hidden,
            t2v_dim: self.t2v_dim,
            statics,
            aggregation: self.aggregation,
            concat: self.concat,
            init: self.init,
            seed: self.seed,
        }
    }

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }
}
