use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::optim::{clip_global_norm, AdamW, StepOutcome};
use super::{PreparedSplit, TrainConfig, TrainError};
use crate::data::{mix_seed, WeightedSampler};
use crate::diff::Tensor;
use crate::metrics::{auprc, auroc, ScoredLabels};
use crate::model::{loss_and_gradients, predict_proba, ModelError, SlanParams};
use crate::scalar::Scalar;

/// Summary of one epoch.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auprc: f64,
    pub val_auroc: f64,
    /// Learning rate used throughout this epoch.
    pub lr: f64,
    pub seconds: f64,
    /// Fraction of sampled training instances with label 1.
    pub positive_share: f64,
}

/// Result of [`train`]: the best-validation parameters and the epoch trace.
#[derive(Clone, Debug)]
pub struct TrainOutcome<S> {
    pub params: SlanParams<S>,
    pub trace: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub best_val_auprc: f64,
    /// Optimizer steps skipped because of non-finite gradients.
    pub skipped_steps: u64,
}

/// AUROC and AUPRC of one split plus the per-instance probability of class 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub auroc: f64,
    pub auprc: f64,
    pub ids: Vec<String>,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

/// Mean loss and mean gradient over a batch.
#[derive(Clone, Debug)]
pub struct BatchGradients<S> {
    pub loss: f64,
    pub grads: Vec<Tensor<S>>,
}

/// Per-instance rollouts run in parallel; the reduction is sequential in
/// batch order, so results do not depend on the thread count.
pub fn batch_gradients<S: Scalar>(
    params: &SlanParams<S>,
    split: &PreparedSplit,
    indices: &[usize],
) -> Result<BatchGradients<S>, ModelError> {
    let per_instance = indices
        .par_iter()
        .map(|&i| {
            loss_and_gradients(
                params,
                &split.schedules[i],
                split.statics[i].as_deref(),
                split.labels[i],
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut grads: Vec<Tensor<S>> = params.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect();
    let mut loss = 0.0;
    for inst in &per_instance {
        loss += inst.loss.as_f64();
        for (acc, g) in grads.iter_mut().zip(&inst.grads) {
            acc.add_assign(g);
        }
    }
    let inv = S::one() / S::of(indices.len() as f64);
    for g in &mut grads {
        g.scale_in_place(inv);
    }
    Ok(BatchGradients {
        loss: loss / indices.len() as f64,
        grads,
    })
}

/// Deterministic forward passes over `split` followed by both metrics.
pub fn evaluate<S: Scalar>(params: &SlanParams<S>, split: &PreparedSplit, name: &'static str) -> Result<EvalReport, TrainError> {
    if split.is_empty() {
        return Err(TrainError::EmptySplit { split: name });
    }
    let scores = (0..split.len())
        .into_par_iter()
        .map(|i| predict_proba(params, &split.schedules[i], split.statics[i].as_deref()).map(S::as_f64))
        .collect::<Result<Vec<f64>, _>>()?;
    let labels: Vec<bool> = split.labels.iter().map(|&l| l == 1).collect();
    let metric = |source| TrainError::Metric { split: name, source };
    let scored = ScoredLabels::new(&scores, &labels).map_err(metric)?;
    Ok(EvalReport {
        auroc: auroc(&scored).map_err(metric)?,
        auprc: auprc(&scored).map_err(metric)?,
        ids: split.ids.clone(),
        scores,
        labels: split.labels.clone(),
    })
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, TrainError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| TrainError::ThreadPool(e.to_string()))
}

/// Trains from a fresh initialization and returns the epoch with the best
/// validation AUPRC. `on_epoch` observes each record as it is produced.
pub fn train<S: Scalar>(
    train: &PreparedSplit,
    val: &PreparedSplit,
    sensors: usize,
    statics: usize,
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<S>, TrainError> {
    config.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptySplit { split: "train" });
    }
    if val.is_empty() {
        return Err(TrainError::EmptySplit { split: "validation" });
    }
    let params = SlanParams::<S>::init(&config.model_config(sensors, statics))?;
    let sampler = WeightedSampler::new(&train.labels, mix_seed(config.seed, 0x5A))?;
    let pool = thread_pool(config.threads)?;
    run(&pool, params, sampler, train, val, config, on_epoch)
}

fn run<S: Scalar>(
    pool: &rayon::ThreadPool,
    mut params: SlanParams<S>,
    mut sampler: WeightedSampler,
    train: &PreparedSplit,
    val: &PreparedSplit,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<S>, TrainError> {
    let mut optimizer = AdamW::new(config.adamw(), &params.tensors);
    let batches = train.len().div_ceil(config.batch_size);
    let mut lr = config.lr;
    let mut best: Option<(usize, f64, SlanParams<S>)> = None;
    let mut stagnant = 0;
    let mut trace = Vec::new();

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let mut loss_sum = 0.0;
        let mut positives = 0usize;
        let mut applied = 0usize;
        for batch in 0..batches {
            let indices: Vec<usize> = (0..config.batch_size).map(|_| sampler.next_index()).collect();
            positives += indices.iter().filter(|&&i| train.labels[i] == 1).count();
            let diverged = |reason: String| TrainError::Diverged { epoch, batch, reason };
            let mut bg = pool
                .install(|| batch_gradients(&params, train, &indices)).map_err(|e| diverged(e.to_string()))?;
            if !bg.loss.is_finite() {
                return Err(diverged(format!("batch loss {}", bg.loss)));
            }
            if let Some(max_norm) = config.clip {
                clip_global_norm(&mut bg.grads, max_norm);
            }
            let outcome = optimizer.step(&mut params.tensors, &bg.grads, &params.trainable, lr);
            if outcome == StepOutcome::SkippedNonFinite {
                continue;
            }
            loss_sum += bg.loss;
            applied += 1;
        }
        let report = pool.install(|| evaluate(&params, val, "validation"))?;
        let record = EpochRecord {
            epoch,
            train_loss: if applied > 0 { loss_sum / applied as f64 } else { f64::NAN },
            val_auprc: report.auprc,
            val_auroc: report.auroc,
            lr,
            seconds: started.elapsed().as_secs_f64(),
            positive_share: positives as f64 / (batches * config.batch_size) as f64,
        };
        on_epoch(&record);
        trace.push(record);

        let improved = best
            .as_ref()
            .is_none_or(|(_, score, _)| report.auprc > score + config.min_improvement);
        if improved {
            best = Some((epoch, report.auprc, params.clone()));
            stagnant = 0;
        } else {
            stagnant += 1;
            lr *= config.lr_decay;
            if stagnant >= config.patience {
                break;
            }
        }
    }
    let (best_epoch, best_val_auprc, params) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        params,
        trace,
        best_epoch,
        best_val_auprc,
        skipped_steps: optimizer.skipped(),
    })
}
