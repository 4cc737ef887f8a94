use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AggregationKind, InitKind, ModelConfig, ModelError};
use crate::diff::{Shape, Tensor};
use crate::scalar::Scalar;

pub const FORGET: usize = 0;
pub const INPUT: usize = 1;
pub const OUTPUT: usize = 2;
pub const CANDIDATE: usize = 3;

const GATE_NAMES: [&str; 4] = ["forget", "input", "output", "candidate"];

/// Tensor indices of one `W·x + V·u + b` gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GateSlots {
    pub w: usize,
    pub v: usize,
    pub b: usize,
}

/// Tensor indices owned by one sensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SensorSlots {
    pub omega: usize,
    pub phi: usize,
    /// Decay gates γ1, γ2, γ3.
    pub decay: [GateSlots; 3],
    /// Cell gates indexed by [`FORGET`], [`INPUT`], [`OUTPUT`], [`CANDIDATE`].
    pub cell: [GateSlots; 4],
    /// Initial local hidden state (not trained).
    pub h0: usize,
}

impl SensorSlots {
    /// Every trainable tensor of this sensor's cell, decay gates and time embedding.
    pub fn trainable(&self) -> Vec<usize> {
        let mut out = vec![self.omega, self.phi];
        for g in self.decay.iter().chain(&self.cell) {
            out.extend([g.w, g.v, g.b]);
        }
        out
    }
}

/// Where every tensor lives in [`SlanParams::tensors`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub sensors: Vec<SensorSlots>,
    /// Initial global summary (not trained).
    pub c0: usize,
    pub head_w: usize,
    pub head_b: usize,
    /// Static embedding `(weight, bias)` when the model has static features.
    pub statics: Option<(usize, usize)>,
    /// Attention score network `(weight, bias)` for attention aggregation.
    pub attention: Option<(usize, usize)>,
}

/// All model tensors in a flat, deterministically ordered list.
#[derive(Clone, Debug, PartialEq)]
pub struct SlanParams<S> {
    pub config: ModelConfig,
    pub layout: Layout,
    pub tensors: Vec<Tensor<S>>,
    pub names: Vec<String>,
    pub trainable: Vec<bool>,
}

enum Fill {
    Glorot,
    Zero,
    Uniform(f64, f64),
    InitialState,
}

struct Builder<S> {
    rng: ChaCha8Rng,
    init: InitKind,
    tensors: Vec<Tensor<S>>,
    names: Vec<String>,
    trainable: Vec<bool>,
}

impl<S: Scalar> Builder<S> {
    fn add(&mut self, name: String, shape: Shape, fill: Fill) -> usize {
        let n = shape.len();
        let (values, trainable): (Vec<f64>, bool) = match fill {
            Fill::Glorot => {
                let bound = (6.0 / (shape.cols + shape.rows) as f64).sqrt();
                ((0..n).map(|_| self.rng.random_range(-bound..bound)).collect(), true)
            }
            Fill::Zero => (vec![0.0; n], true),
            Fill::Uniform(lo, hi) => ((0..n).map(|_| self.rng.random_range(lo..hi)).collect(), true),
            Fill::InitialState => match self.init {
                InitKind::Zeros => (vec![0.0; n], false),
                InitKind::Random => ((0..n).map(|_| self.rng.random_range(-0.1..0.1)).collect(), false),
            },
        };
        self.tensors.push(Tensor::from_f64(shape, &values));
        self.names.push(name);
        self.trainable.push(trainable);
        self.tensors.len() - 1
    }

    fn gate(&mut self, prefix: String, hidden: usize, input_dim: usize) -> GateSlots {
        GateSlots {
            w: self.add(format!("{prefix}.w"), Shape::new(hidden, 1), Fill::Glorot),
            v: self.add(format!("{prefix}.v"), Shape::new(hidden, input_dim), Fill::Glorot),
            b: self.add(format!("{prefix}.b"), Shape::vector(hidden), Fill::Zero),
        }
    }
}

impl<S: Scalar> SlanParams<S> {
    /// Glorot-uniform weights, zero biases, `ω ~ U(0, 1)`, `φ ~ U(0, 2π)`.
    ///
    /// For a fixed seed, every tensor except the attention scorer is identical
    /// across aggregation kinds.
    pub fn init(config: &ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let (h, d) = (config.hidden, config.t2v_dim);
        let mut b = Builder::<S> {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            init: config.init,
            tensors: Vec::new(),
            names: Vec::new(),
            trainable: Vec::new(),
        };
        let mut sensors = Vec::with_capacity(config.sensors);
        for m in 0..config.sensors {
            let omega = b.add(format!("sensor{m}.t2v.omega"), Shape::vector(d), Fill::Uniform(0.0, 1.0));
            let phi = b.add(format!("sensor{m}.t2v.phi"), Shape::vector(d), Fill::Uniform(0.0, 2.0 * PI));
            let decay = [1, 2, 3].map(|k| b.gate(format!("sensor{m}.gamma{k}"), h, d));
            let cell = [0, 1, 2, 3].map(|k| b.gate(format!("sensor{m}.{}", GATE_NAMES[k]), h, h));
            let h0 = b.add(format!("sensor{m}.h0"), Shape::vector(h), Fill::InitialState);
            sensors.push(SensorSlots {
                omega,
                phi,
                decay,
                cell,
                h0,
            });
        }
        let c0 = b.add("c0".into(), Shape::vector(h), Fill::InitialState);
        let statics = (config.statics > 0).then(|| {
            (
                b.add("static.w".into(), Shape::new(h, config.statics), Fill::Glorot),
                b.add("static.b".into(), Shape::vector(h), Fill::Zero),
            )
        });
        let head_w = b.add("head.w".into(), Shape::new(2, config.concat_dim()), Fill::Glorot);
        let head_b = b.add("head.b".into(), Shape::vector(2), Fill::Zero);
        let attention = (config.aggregation == AggregationKind::Attention).then(|| {
            (
                b.add("attention.w".into(), Shape::new(1, h), Fill::Glorot),
                b.add("attention.b".into(), Shape::vector(1), Fill::Zero),
            )
        });
        Ok(Self {
            config: config.clone(),
            layout: Layout {
                sensors,
                c0,
                head_w,
                head_b,
                statics,
                attention,
            },
            tensors: b.tensors,
            names: b.names,
            trainable: b.trainable,
        })
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Number of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        self.tensors
            .iter()
            .zip(&self.trainable)
            .filter(|(_, &t)| t)
            .map(|(t, _)| t.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Converts every tensor to another scalar type.
    pub fn cast<T: Scalar>(&self) -> SlanParams<T> {
        SlanParams {
            config: self.config.clone(),
            layout: self.layout.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor::from_f64(t.shape(), &t.to_f64()))
                .collect(),
            names: self.names.clone(),
            trainable: self.trainable.clone(),
        }
    }
}
