use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{mix_seed, DataError, Dataset, DatasetInfo, IstsInstance, Observation};

/// Parameters of the synthetic irregular-series generator.
///
/// Every instance draws a label, then an irregular time grid with gaps
/// `1 ± time_jitter` hours. The first `informative_sensors` sensors follow a
/// class-signed trend `±drift · (1 + t/10)`; the rest are class-independent
/// sinusoids. Each cell is observed with probability `1 − missing_rate`,
/// unless `informative` is set, in which case informative sensors are
/// observed with probability `min(1, 2(1 − missing_rate) · σ(kappa · z))`
/// where `z` is the noiseless latent value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n: usize,
    pub sensors: usize,
    pub max_steps: usize,
    pub missing_rate: f64,
    pub informative: bool,
    pub seed: u64,
    pub informative_sensors: usize,
    pub drift: f64,
    pub noise: f64,
    pub time_jitter: f64,
    pub kappa: f64,
    pub positive_rate: f64,
    pub static_count: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            sensors: 5,
            max_steps: 50,
            missing_rate: 0.3,
            informative: false,
            seed: 2024,
            informative_sensors: 2,
            drift: 0.25,
            noise: 1.0,
            time_jitter: 0.5,
            kappa: 2.0,
            positive_rate: 0.5,
            static_count: 0,
        }
    }
}

impl SyntheticConfig {
    /// Noiseless, class-separable variant: drift ±1 and no measurement noise.
    pub fn separable(n: usize, sensors: usize, max_steps: usize, missing_rate: f64, seed: u64) -> Self {
        Self {
            n,
            sensors,
            max_steps,
            missing_rate,
            seed,
            drift: 1.0,
            noise: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: &str| Err(DataError::InvalidConfig(msg.to_string()));
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if self.sensors < 2 {
            return bad("sensors must be at least 2");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return bad("missing_rate must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.time_jitter) {
            return bad("time_jitter must lie in [0, 1)");
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return bad("positive_rate must lie in (0, 1)");
        }
        if self.informative_sensors == 0 || self.informative_sensors > self.sensors {
            return bad("informative_sensors must lie in [1, sensors]");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be finite and nonnegative");
        }
        if !(self.drift.is_finite() && self.kappa.is_finite()) {
            return bad("drift and kappa must be finite");
        }
        Ok(())
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Generates `config.n` labelled instances deterministically from `config.seed`.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Dataset, DataError> {
    config.validate()?;
    let instances = (0..config.n)
        .map(|i| generate_one(config, i, &mut ChaCha8Rng::seed_from_u64(mix_seed(config.seed, i as u64))))
        .collect();
    Ok(Dataset {
        info: DatasetInfo::new(config.sensors, config.static_count),
        instances,
    })
}

fn generate_one(c: &SyntheticConfig, index: usize, rng: &mut ChaCha8Rng) -> IstsInstance {
    let label = u8::from(rng.random_bool(c.positive_rate));
    let sign = if label == 1 { 1.0 } else { -1.0 };
    let steps = rng.random_range((c.max_steps / 2).max(1)..=c.max_steps);
    let mut times = Vec::with_capacity(steps);
    let mut t = 0.0;
    for _ in 0..steps {
        times.push(t);
        t += 1.0 + c.time_jitter * rng.random_range(-1.0..=1.0);
    }
    let offsets: Vec<f64> = (0..c.sensors).map(|_| 0.5 * c.noise * gauss(rng)).collect();
    let phase = rng.random_range(0.0..2.0 * PI);
    let statics = (c.static_count > 0).then(|| {
        (0..c.static_count)
            .map(|k| if k == 0 { 0.5 * sign * c.drift } else { 0.0 } + gauss(rng))
            .collect::<Vec<f64>>()
    });

    let mut events = Vec::new();
    for &t in &times {
        for (m, &offset) in offsets.iter().enumerate() {
            let informative = m < c.informative_sensors;
            let latent = if informative {
                sign * c.drift * (1.0 + t / 10.0)
            } else {
                (2.0 * PI * t / (6.0 + 3.0 * m as f64) + phase).sin()
            };
            let p_observe = if c.informative && informative {
                (2.0 * (1.0 - c.missing_rate) * sigmoid(c.kappa * latent)).min(1.0)
            } else {
                1.0 - c.missing_rate
            };
            let observed = p_observe >= 1.0 || rng.random_bool(p_observe);
            let noise = c.noise * gauss(rng);
            if observed {
                events.push(Observation::new(t, m, latent + offset + noise));
            }
        }
    }
    if events.is_empty() {
        let latent = sign * c.drift;
        events.push(Observation::new(0.0, 0, latent + offsets[0]));
    }
    IstsInstance {
        id: format!("syn-{index:05}"),
        label,
        statics,
        events,
    }
}
