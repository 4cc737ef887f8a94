//! Irregularly sampled multivariate series: records, switch schedules,
//! transforms, class-balanced sampling, synthetic generation and JSONL I/O.

mod io;
mod sampler;
mod schedule;
mod synthetic;
mod transform;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_splits, read_jsonl, read_info, save_splits, write_info, write_jsonl};
pub use sampler::WeightedSampler;
pub use schedule::{build_schedule, ScheduleEntry, SwitchSchedule, TIME_TOLERANCE};
pub use synthetic::{generate_synthetic, SyntheticConfig};
pub use transform::{
    destandardize, drop_dataset, drop_observations, impute, prefix, split_dataset, standardize,
    ImputeMode,
};
pub(crate) use transform::mix_seed;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("instance {id}: no events")]
    EmptyInstance { id: String },
    #[error("instance {id}: events not sorted by (time, sensor) at position {position}")]
    Unsorted { id: String, position: usize },
    #[error("instance {id}: sensor {sensor} observed twice in one step at time {time}")]
    DuplicateInStep { id: String, sensor: usize, time: f64 },
    #[error("instance {id}: event {position} has a negative or non-finite time or value")]
    InvalidEvent { id: String, position: usize },
    #[error("instance {id}: sensor {sensor} out of range for {sensor_count} sensors")]
    SensorOutOfRange {
        id: String,
        sensor: usize,
        sensor_count: usize,
    },
    #[error("instance {id}: label must be 0 or 1, got {label}")]
    BadLabel { id: String, label: u8 },
    #[error("instance {id}: expected {expected} static features, got {got}")]
    StaticsLength {
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("drop fraction {0} outside [0, 1)")]
    InvalidFraction(f64),
    #[error("sampler needs both classes, got {negatives} negatives and {positives} positives")]
    SingleClass { negatives: usize, positives: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown imputation mode `{0}`")]
    UnknownImputeMode(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// One measurement: `(time in hours, sensor index, value)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, u32, f64)", into = "(f64, u32, f64)")]
pub struct Observation {
    pub time: f64,
    pub sensor: usize,
    pub value: f64,
}

impl Observation {
    pub fn new(time: f64, sensor: usize, value: f64) -> Self {
        Self { time, sensor, value }
    }
}

impl From<(f64, u32, f64)> for Observation {
    fn from((time, sensor, value): (f64, u32, f64)) -> Self {
        Self {
            time,
            sensor: sensor as usize,
            value,
        }
    }
}

impl From<Observation> for (f64, u32, f64) {
    fn from(o: Observation) -> Self {
        (o.time, o.sensor as u32, o.value)
    }
}

/// A labelled record: sparse timestamped events plus optional static features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IstsInstance {
    pub id: String,
    pub label: u8,
    pub statics: Option<Vec<f64>>,
    pub events: Vec<Observation>,
}

impl IstsInstance {
    /// Checks ordering, finiteness, label and per-dataset bounds.
    pub fn validate(&self, sensor_count: usize, static_count: usize) -> Result<(), DataError> {
        let id = || self.id.clone();
        if self.events.is_empty() {
            return Err(DataError::EmptyInstance { id: id() });
        }
        if self.label > 1 {
            return Err(DataError::BadLabel {
                id: id(),
                label: self.label,
            });
        }
        for (position, e) in self.events.iter().enumerate() {
            if !(e.time.is_finite() && e.time >= 0.0 && e.value.is_finite()) {
                return Err(DataError::InvalidEvent { id: id(), position });
            }
            if e.sensor >= sensor_count {
                return Err(DataError::SensorOutOfRange {
                    id: id(),
                    sensor: e.sensor,
                    sensor_count,
                });
            }
            if position > 0 {
                let p = &self.events[position - 1];
                let ordered = e.time > p.time || (e.time == p.time && e.sensor > p.sensor);
                if !ordered {
                    return Err(DataError::Unsorted { id: id(), position });
                }
            }
        }
        let got = self.statics.as_ref().map_or(0, Vec::len);
        if got != static_count || (static_count == 0 && self.statics.is_some() && got != 0) {
            return Err(DataError::StaticsLength {
                id: id(),
                expected: static_count,
                got,
            });
        }
        if let Some(s) = &self.statics {
            if s.iter().any(|v| !v.is_finite()) {
                return Err(DataError::InvalidEvent {
                    id: id(),
                    position: usize::MAX,
                });
            }
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        match (self.events.first(), self.events.last()) {
            (Some(a), Some(b)) => b.time - a.time,
            _ => 0.0,
        }
    }
}

/// Dataset-level description stored beside the JSONL files as `meta.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub sensor_count: usize,
    pub static_count: usize,
    pub sensor_names: Vec<String>,
}

impl DatasetInfo {
    pub fn new(sensor_count: usize, static_count: usize) -> Self {
        Self {
            sensor_count,
            static_count,
            sensor_names: (0..sensor_count).map(|m| format!("sensor_{m}")).collect(),
        }
    }
}

/// A set of instances together with their shared description.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub info: DatasetInfo,
    pub instances: Vec<IstsInstance>,
}

/// Train, validation and test partitions sharing one [`DatasetInfo`].
#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub info: DatasetInfo,
    pub train: Vec<IstsInstance>,
    pub val: Vec<IstsInstance>,
    pub test: Vec<IstsInstance>,
}

/// Training-split statistics used for standardization and imputation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub sensor_count: usize,
    pub static_count: usize,
    pub sensor_mean: Vec<f64>,
    pub sensor_std: Vec<f64>,
    pub static_mean: Vec<f64>,
    pub static_std: Vec<f64>,
    /// `[negatives, positives]`.
    pub class_counts: [usize; 2],
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 1.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    // constant sensors map to zero after standardization
    (mean, if std > 1e-12 { std } else { 1.0 })
}

impl DatasetMeta {
    /// Population mean/std per sensor and static feature over `train`.
    pub fn from_train(train: &[IstsInstance], info: &DatasetInfo) -> Self {
        let mut per_sensor = vec![Vec::new(); info.sensor_count];
        let mut per_static = vec![Vec::new(); info.static_count];
        let mut class_counts = [0usize; 2];
        for inst in train {
            class_counts[inst.label.min(1) as usize] += 1;
            for e in &inst.events {
                per_sensor[e.sensor].push(e.value);
            }
            if let Some(s) = &inst.statics {
                for (k, &v) in s.iter().enumerate() {
                    per_static[k].push(v);
                }
            }
        }
        let (sensor_mean, sensor_std) = per_sensor.iter().map(|v| mean_std(v)).unzip();
        let (static_mean, static_std) = per_static.iter().map(|v| mean_std(v)).unzip();
        Self {
            sensor_count: info.sensor_count,
            static_count: info.static_count,
            sensor_mean,
            sensor_std,
            static_mean,
            static_std,
            class_counts,
        }
    }
}
