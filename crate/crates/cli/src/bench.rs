use std::time::Instant;

use serde::{Deserialize, Serialize};
use slan_core::data::{generate_synthetic, SyntheticConfig};
use slan_core::model::ModelConfig;
use slan_core::train::{batch_gradients, AdamW, AdamWConfig, PreparedSplit};
use slan_core::SlanParams64;

/// Fixed workload of one benchmark point.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub n: usize,
    pub sensors: usize,
    pub batch: usize,
    pub hidden: usize,
    pub t2v_dim: usize,
    pub repeats: usize,
    pub seed: u64,
}

/// Timing of one step budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub max_steps: usize,
    pub mean_steps: f64,
    pub events: usize,
    /// Median wall time of one training epoch.
    pub seconds_per_epoch: f64,
    /// Time relative to the previous row.
    pub time_ratio: f64,
    /// Mean step count relative to the previous row.
    pub steps_ratio: f64,
    /// `time_ratio / steps_ratio`; 1 means linear growth.
    pub linearity: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Times full training epochs (gradients and optimizer updates over
/// `⌈n/B⌉` consecutive batches) for each step budget. One untimed warm-up
/// epoch precedes the `repeats` timed ones.
pub fn run_bench(cfg: &BenchConfig, steps: &[usize]) -> anyhow::Result<Vec<BenchRow>> {
    anyhow::ensure!(cfg.repeats > 0 && cfg.batch > 0, "repeats and batch size must be positive");
    let mut rows: Vec<BenchRow> = Vec::new();
    for &max_steps in steps {
        let data = generate_synthetic(&SyntheticConfig {
            n: cfg.n,
            sensors: cfg.sensors,
            max_steps,
            seed: cfg.seed,
            ..SyntheticConfig::default()
        })?;
        let split = PreparedSplit::new(&data.instances, cfg.sensors)?;
        let model = ModelConfig {
            seed: cfg.seed,
            ..ModelConfig::new(cfg.sensors, cfg.hidden, cfg.t2v_dim)
        };
        let mut params = SlanParams64::init(&model)?;
        let mut optimizer = AdamW::new(AdamWConfig::default(), &params.tensors);
        let indices: Vec<usize> = (0..split.len()).collect();
        let mut times = Vec::with_capacity(cfg.repeats);
        for repeat in 0..=cfg.repeats {
            let started = Instant::now();
            for batch in indices.chunks(cfg.batch) {
                let bg = batch_gradients(&params, &split, batch)?;
                optimizer.step(&mut params.tensors, &bg.grads, &params.trainable, 5e-4);
            }
            if repeat > 0 {
                times.push(started.elapsed().as_secs_f64());
            }
        }
        let seconds_per_epoch = median(times);
        let mean_steps = split.schedules.iter().map(|s| s.len()).sum::<usize>() as f64 / split.len() as f64;
        let events = split.schedules.iter().map(|s| s.event_count()).sum();
        let (time_ratio, steps_ratio) = match rows.last() {
            Some(prev) => (seconds_per_epoch / prev.seconds_per_epoch, mean_steps / prev.mean_steps),
            None => (1.0, 1.0),
        };
        rows.push(BenchRow {
            max_steps,
            mean_steps,
            events,
            seconds_per_epoch,
            time_ratio,
            steps_ratio,
            linearity: time_ratio / steps_ratio,
        });
    }
    Ok(rows)
}
