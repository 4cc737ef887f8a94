use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, DatasetInfo, DatasetMeta, IstsInstance, Observation, Splits, TIME_TOLERANCE};

/// Derives an independent stream seed for item `index` of a seeded run.
pub(crate) fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Removes `round(fraction · n)` uniformly chosen events.
///
/// Returns the thinned instance and whether the request had to be capped to
/// keep one event.
pub fn drop_observations(
    instance: &IstsInstance,
    fraction: f64,
    seed: u64,
) -> Result<(IstsInstance, bool), DataError> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(DataError::InvalidFraction(fraction));
    }
    let n = instance.events.len();
    let mut remove = (fraction * n as f64).round() as usize;
    let capped = n > 0 && remove >= n;
    if capped {
        remove = n - 1;
    }
    if remove == 0 {
        return Ok((instance.clone(), capped));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = index::sample(&mut rng, n, n - remove).into_vec();
    keep.sort_unstable();
    let events = keep.into_iter().map(|i| instance.events[i]).collect();
    Ok((
        IstsInstance {
            events,
            ..instance.clone()
        },
        capped,
    ))
}

/// Applies [`drop_observations`] to every instance; returns the capped count.
pub fn drop_dataset(
    instances: &[IstsInstance],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<IstsInstance>, usize), DataError> {
    let mut capped = 0;
    let mut out = Vec::with_capacity(instances.len());
    for (i, inst) in instances.iter().enumerate() {
        let (thinned, warn) = drop_observations(inst, fraction, mix_seed(seed, i as u64))?;
        capped += usize::from(warn);
        out.push(thinned);
    }
    Ok((out, capped))
}

/// How missing cells are filled before the model sees the series.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputeMode {
    /// Keep the sparse series as observed.
    #[default]
    None,
    Ffill,
    Mean,
    Interpolation,
}

impl ImputeMode {
    pub const ALL: [ImputeMode; 4] = [
        ImputeMode::None,
        ImputeMode::Ffill,
        ImputeMode::Mean,
        ImputeMode::Interpolation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ImputeMode::None => "none",
            ImputeMode::Ffill => "ffill",
            ImputeMode::Mean => "mean",
            ImputeMode::Interpolation => "interpolation",
        }
    }
}

impl fmt::Display for ImputeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ImputeMode {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ImputeMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| DataError::UnknownImputeMode(s.to_string()))
    }
}

/// Densifies `instance` so that every step carries a value for every sensor.
///
/// Steps are the instance's distinct timestamps (grouped within
/// [`TIME_TOLERANCE`]); all events of a step are placed at the step's first
/// time. Cells before a sensor's first observation, and every cell of a
/// never-observed sensor, receive the training mean.
pub fn impute(instance: &IstsInstance, mode: ImputeMode, meta: &DatasetMeta) -> IstsInstance {
    if mode == ImputeMode::None {
        return instance.clone();
    }
    let s = meta.sensor_count;
    let mut times: Vec<f64> = Vec::new();
    let mut observed: Vec<Vec<Option<f64>>> = Vec::new();
    for e in &instance.events {
        if times.last().is_none_or(|&t| e.time - t > TIME_TOLERANCE) {
            times.push(e.time);
            observed.push(vec![None; s]);
        }
        observed.last_mut().expect("step pushed above")[e.sensor] = Some(e.value);
    }

    let mut events = Vec::with_capacity(times.len() * s);
    for (j, &t) in times.iter().enumerate() {
        for m in 0..s {
            let value = match observed[j][m] {
                Some(v) => v,
                None => fill(mode, &times, &observed, j, m, meta.sensor_mean[m]),
            };
            events.push(Observation::new(t, m, value));
        }
    }
    IstsInstance {
        events,
        ..instance.clone()
    }
}

fn fill(
    mode: ImputeMode,
    times: &[f64],
    observed: &[Vec<Option<f64>>],
    j: usize,
    m: usize,
    mean: f64,
) -> f64 {
    let previous = (0..j).rev().find_map(|k| observed[k][m].map(|v| (times[k], v)));
    match mode {
        ImputeMode::None | ImputeMode::Mean => mean,
        ImputeMode::Ffill => previous.map_or(mean, |(_, v)| v),
        ImputeMode::Interpolation => {
            let next = (j + 1..times.len()).find_map(|k| observed[k][m].map(|v| (times[k], v)));
            match (previous, next) {
                (Some((tp, vp)), Some((tn, vn))) => vp + (vn - vp) * (times[j] - tp) / (tn - tp),
                (Some((_, vp)), None) => vp,
                (None, _) => mean,
            }
        }
    }
}

/// Replaces values by `(value − mean) / std` using training statistics.
pub fn standardize(instances: &[IstsInstance], meta: &DatasetMeta) -> Vec<IstsInstance> {
    affine_map(instances, meta, |v, mean, std| (v - mean) / std)
}

/// Inverse of [`standardize`].
pub fn destandardize(instances: &[IstsInstance], meta: &DatasetMeta) -> Vec<IstsInstance> {
    affine_map(instances, meta, |v, mean, std| v * std + mean)
}

fn affine_map(
    instances: &[IstsInstance],
    meta: &DatasetMeta,
    f: impl Fn(f64, f64, f64) -> f64,
) -> Vec<IstsInstance> {
    instances
        .iter()
        .map(|inst| IstsInstance {
            id: inst.id.clone(),
            label: inst.label,
            statics: inst.statics.as_ref().map(|s| {
                s.iter()
                    .enumerate()
                    .map(|(k, &v)| f(v, meta.static_mean[k], meta.static_std[k]))
                    .collect()
            }),
            events: inst
                .events
                .iter()
                .map(|e| {
                    let value = f(e.value, meta.sensor_mean[e.sensor], meta.sensor_std[e.sensor]);
                    Observation { value, ..*e }
                })
                .collect(),
        })
        .collect()
}

/// Seeded 70/15/15 train/validation/test partition.
pub fn split_dataset(info: DatasetInfo, instances: Vec<IstsInstance>, seed: u64) -> Splits {
    let n = instances.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (n as f64 * 0.70).round() as usize;
    let n_val = (n as f64 * 0.15).round() as usize;
    let mut slots: Vec<Option<IstsInstance>> = instances.into_iter().map(Some).collect();
    let mut take = |range: &[usize]| -> Vec<IstsInstance> {
        range
            .iter()
            .map(|&i| slots[i].take().expect("each index used once"))
            .collect()
    };
    let train = take(&order[..n_train]);
    let val = take(&order[n_train..(n_train + n_val).min(n)]);
    let test = take(&order[(n_train + n_val).min(n)..]);
    Splits {
        info,
        train,
        val,
        test,
    }
}

/// The first `round(fraction · n)` instances (at least one when nonempty).
pub fn prefix(instances: &[IstsInstance], fraction: f64) -> Vec<IstsInstance> {
    let n = instances.len();
    let k = ((fraction.clamp(0.0, 1.0) * n as f64).round() as usize).clamp(n.min(1), n);
    instances[..k].to_vec()
}
