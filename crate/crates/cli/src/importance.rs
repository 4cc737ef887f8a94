use serde::{Deserialize, Serialize};
use slan_core::diff::Tape;
use slan_core::model::{forward_on_tape, AggregationKind, Binder, ModelError};
use slan_core::train::PreparedSplit;
use slan_core::SlanParams64;

/// Attention importance and sampling rate of one sensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub sensor: usize,
    pub name: String,
    /// Measurements of the sensor in the evaluated split.
    pub count: usize,
    /// Measurements per hour of recorded time.
    pub rate_per_hour: f64,
    /// Attention weight summed over all steps and instances.
    pub sum_i: f64,
    /// `sum_i / count`.
    pub mean_i: f64,
    /// `mean_i` normalized over the reported sensors.
    pub norm_i: f64,
    /// 1 is the most important sensor.
    pub importance_rank: usize,
    /// 1 is the most frequently measured sensor.
    pub rate_rank: usize,
}

/// Importance table plus the sensors left out because they were never measured.
#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceReport {
    pub rows: Vec<ImportanceRow>,
    pub excluded: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ImportanceError {
    #[error("importance needs a checkpoint trained with attention aggregation, got {0}")]
    NotAttention(AggregationKind),
    #[error("no sensor is measured in the evaluated split")]
    NothingMeasured,
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn ranks(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut rank = vec![0; values.len()];
    for (r, i) in order.into_iter().enumerate() {
        rank[i] = r + 1;
    }
    rank
}

/// Sums the attention weight each sensor receives over `split` and
/// normalizes the per-measurement mean across sensors.
pub fn sensor_importance(
    params: &SlanParams64,
    split: &PreparedSplit,
    sensor_names: &[String],
) -> Result<ImportanceReport, ImportanceError> {
    let kind = params.config.aggregation;
    if kind != AggregationKind::Attention {
        return Err(ImportanceError::NotAttention(kind));
    }
    let s = params.config.sensors;
    let mut sum = vec![0.0; s];
    let mut count = vec![0usize; s];
    let mut hours = 0.0;
    for (schedule, statics) in split.schedules.iter().zip(&split.statics) {
        let mut tape = Tape::new();
        let mut binder = Binder::new(params);
        let rollout = forward_on_tape(&mut tape, &mut binder, schedule, statics.as_deref())?;
        for step in &rollout.trace.attention {
            for &(m, w) in step {
                sum[m] += w;
            }
        }
        for step in &schedule.steps {
            for e in step {
                count[e.sensor] += 1;
            }
        }
        if let (Some(first), Some(last)) = (schedule.timestamps.first(), schedule.timestamps.last()) {
            hours += last - first;
        }
    }
    let measured: Vec<usize> = (0..s).filter(|&m| count[m] > 0).collect();
    if measured.is_empty() {
        return Err(ImportanceError::NothingMeasured);
    }
    let mean: Vec<f64> = measured.iter().map(|&m| sum[m] / count[m] as f64).collect();
    let total: f64 = mean.iter().sum();
    let rates: Vec<f64> = measured
        .iter()
        .map(|&m| if hours > 0.0 { count[m] as f64 / hours } else { f64::NAN })
        .collect();
    let importance_rank = ranks(&mean);
    let rate_rank = ranks(&rates);
    let name = |m: usize| sensor_names.get(m).cloned().unwrap_or_else(|| format!("sensor_{m}"));
    let rows = measured
        .iter()
        .enumerate()
        .map(|(k, &m)| ImportanceRow {
            sensor: m,
            name: name(m),
            count: count[m],
            rate_per_hour: rates[k],
            sum_i: sum[m],
            mean_i: mean[k],
            norm_i: mean[k] / total,
            importance_rank: importance_rank[k],
            rate_rank: rate_rank[k],
        })
        .collect();
    let excluded = (0..s).filter(|&m| count[m] == 0).map(name).collect();
    Ok(ImportanceReport { rows, excluded })
}
