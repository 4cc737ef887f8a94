//! The switch-scheduled recurrent model.
//!
//! Each sensor owns a recurrent cell that runs only at steps where that
//! sensor is observed. A cell reads the sensor's last local hidden state,
//! decayed by a learned function of the elapsed time, and the global summary
//! from the previous step. The cell states of all active sensors are then
//! aggregated into the next global summary. After the final step the global
//! summary, every sensor's final local state and an optional static embedding
//! are concatenated and mapped to two class logits.

mod checkpoint;
mod forward;
mod params;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::DiffError;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use forward::{
    aggregate, cell_step, decay_gate, forward_on_tape, loss_and_gradients, predict_proba,
    time2vec, Binder, CellCall, CellOutput, ConcatPart, InstanceGradients, Rollout, RolloutTrace,
};
pub use params::{GateSlots, Layout, SensorSlots, SlanParams, CANDIDATE, FORGET, INPUT, OUTPUT};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("sensor {sensor}, step {step}: {source}")]
    Cell {
        sensor: usize,
        step: usize,
        #[source]
        source: DiffError,
    },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: DiffError,
    },
    #[error("schedule has {schedule} sensors but the model expects {model}")]
    SensorCountMismatch { schedule: usize, model: usize },
    #[error("model expects {expected} static features, instance has {got}")]
    StaticsMismatch { expected: usize, got: usize },
    #[error("aggregation needs at least one active state")]
    EmptyAggregation,
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("unknown {what} `{value}`")]
    UnknownVariant { what: &'static str, value: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ModelError {
    pub(crate) fn stage(stage: &'static str) -> impl FnOnce(DiffError) -> ModelError {
        move |source| ModelError::Stage { stage, source }
    }
}

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident, $what:literal, { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            #[default]
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = ModelError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.name() == s)
                    .ok_or_else(|| ModelError::UnknownVariant { what: $what, value: s.to_string() })
            }
        }
    };
}

named_enum!(
    /// How active sensors' cell states are combined into the global summary.
    AggregationKind, "aggregation", { Mean => "mean", Max => "max", Attention => "attention" }
);

named_enum!(
    /// Which final states the prediction head sees.
    ConcatMode, "concat mode", { Both => "both", Global => "global", Local => "local" }
);

named_enum!(
    /// Initial local and global states: zeros or seeded uniform noise.
    InitKind, "init kind", { Zeros => "zeros", Random => "random" }
);

/// Architecture hyperparameters and the initialization seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub sensors: usize,
    pub hidden: usize,
    pub t2v_dim: usize,
    pub statics: usize,
    pub aggregation: AggregationKind,
    pub concat: ConcatMode,
    pub init: InitKind,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(sensors: usize, hidden: usize, t2v_dim: usize) -> Self {
        Self {
            sensors,
            hidden,
            t2v_dim,
            statics: 0,
            aggregation: AggregationKind::Mean,
            concat: ConcatMode::Both,
            init: InitKind::Zeros,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.sensors == 0 || self.hidden == 0 || self.t2v_dim == 0 {
            return Err(ModelError::InvalidConfig(format!(
                "sensors ({}), hidden ({}) and t2v_dim ({}) must be positive",
                self.sensors, self.hidden, self.t2v_dim
            )));
        }
        Ok(())
    }

    /// Length of the vector fed to the prediction head.
    pub fn concat_dim(&self) -> usize {
        let states = match self.concat {
            ConcatMode::Both => self.sensors + 1,
            ConcatMode::Global => 1,
            ConcatMode::Local => self.sensors,
        };
        self.hidden * (states + usize::from(self.statics > 0))
    }
}
