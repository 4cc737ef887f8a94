use serde::Serialize;

use super::params::{GateSlots, CANDIDATE, FORGET, INPUT, OUTPUT};
use super::{AggregationKind, ConcatMode, ModelError, SlanParams};
use crate::data::SwitchSchedule;
use crate::diff::{DiffError, Tape, Tensor, Var};
use crate::scalar::Scalar;

/// Lazily places parameter tensors on a tape, so that only tensors touched by
/// a rollout become tape leaves.
pub struct Binder<'p, S> {
    params: &'p SlanParams<S>,
    vars: Vec<Option<Var>>,
}

impl<'p, S: Scalar> Binder<'p, S> {
    pub fn new(params: &'p SlanParams<S>) -> Self {
        Self {
            params,
            vars: vec![None; params.len()],
        }
    }

    /// Uses existing tape variables (one per tensor, in layout order).
    pub fn with_vars(params: &'p SlanParams<S>, vars: &[Var]) -> Self {
        assert_eq!(vars.len(), params.len(), "one variable per parameter tensor");
        Self {
            params,
            vars: vars.iter().copied().map(Some).collect(),
        }
    }

    pub fn params(&self) -> &'p SlanParams<S> {
        self.params
    }

    pub fn var(&mut self, tape: &mut Tape<S>, slot: usize) -> Var {
        *self.vars[slot].get_or_insert_with(|| tape.leaf(self.params.tensors[slot].clone()))
    }

    pub fn is_bound(&self, slot: usize) -> bool {
        self.vars[slot].is_some()
    }

    /// Gradient per tensor after `tape.backward`; unbound tensors get exact zeros.
    pub fn gradients(&self, tape: &Tape<S>) -> Vec<Tensor<S>> {
        self.vars
            .iter()
            .zip(&self.params.tensors)
            .map(|(v, t)| match v {
                Some(v) => tape.grad_or_zeros(*v),
                None => Tensor::zeros(t.shape()),
            })
            .collect()
    }
}

/// `sin(ω · Δ + φ)` with the sensor's own frequencies and phases.
pub fn time2vec<S: Scalar>(
    tape: &mut Tape<S>,
    binder: &mut Binder<'_, S>,
    sensor: usize,
    delta: Var,
) -> Result<Var, DiffError> {
    let slots = &binder.params().layout.sensors[sensor];
    let (omega, phi) = (binder.var(tape, slots.omega), binder.var(tape, slots.phi));
    let arg = tape.affine(omega, delta, phi)?;
    tape.sin(arg)
}

fn gate_pre<S: Scalar>(
    tape: &mut Tape<S>,
    binder: &mut Binder<'_, S>,
    g: GateSlots,
    x: Var,
    u: Var,
) -> Result<Var, DiffError> {
    let (w, v, b) = (binder.var(tape, g.w), binder.var(tape, g.v), binder.var(tape, g.b));
    tape.linear(&[(w, x), (v, u)], b)
}

/// Decay gate `k ∈ {0, 1, 2}` (γ1..γ3): `tanh(W·x + V·t2v + b)`.
pub fn decay_gate<S: Scalar>(
    tape: &mut Tape<S>,
    binder: &mut Binder<'_, S>,
    sensor: usize,
    k: usize,
    x: Var,
    t2v: Var,
) -> Result<Var, DiffError> {
    let g = binder.params().layout.sensors[sensor].decay[k];
    let pre = gate_pre(tape, binder, g, x, t2v)?;
    tape.tanh(pre)
}

/// Output of one sensor cell.
#[derive(Clone, Copy, Debug)]
pub struct CellOutput {
    pub h: Var,
    pub c: Var,
    pub gammas: [Var; 3],
}

/// One cell update for `sensor` given its value `x`, delay `delta`, its
/// previous local state and the previous global summary:
///
/// ```text
/// h̃ = γ1 ⊙ h_prev
/// f, i, o = σ(W·x + V·h̃ + b),  c̃ = tanh(W·x + V·h̃ + b)
/// c = f ⊙ c_global + i ⊙ c̃ ⊙ γ2
/// h = o ⊙ tanh(f ⊙ c_global + i ⊙ c̃ ⊙ γ3)
/// ```
pub fn cell_step<S: Scalar>(
    tape: &mut Tape<S>,
    binder: &mut Binder<'_, S>,
    sensor: usize,
    x: S,
    delta: S,
    h_prev: Var,
    c_global: Var,
) -> Result<CellOutput, DiffError> {
    let xv = tape.leaf(Tensor::scalar(x));
    let dv = tape.leaf(Tensor::scalar(delta));
    let t2v = time2vec(tape, binder, sensor, dv)?;
    let mut gammas = [xv; 3];
    for (k, g) in gammas.iter_mut().enumerate() {
        *g = decay_gate(tape, binder, sensor, k, xv, t2v)?;
    }
    let h_tilde = tape.hadamard(gammas[0], h_prev)?;
    let cell = binder.params().layout.sensors[sensor].cell;
    let mut gate = |k: usize, tape: &mut Tape<S>| -> Result<Var, DiffError> {
        let pre = gate_pre(tape, binder, cell[k], xv, h_tilde)?;
        if k == CANDIDATE {
            tape.tanh(pre)
        } else {
            tape.sigmoid(pre)
        }
    };
    let f = gate(FORGET, tape)?;
    let i = gate(INPUT, tape)?;
    let o = gate(OUTPUT, tape)?;
    let candidate = gate(CANDIDATE, tape)?;
    let carried = tape.hadamard(f, c_global)?;
    let written = tape.hadamard(i, candidate)?;
    let written_c = tape.hadamard(written, gammas[1])?;
    let c = tape.add(carried, written_c)?;
    let written_h = tape.hadamard(written, gammas[2])?;
    let pre_h = tape.add(carried, written_h)?;
    let squashed = tape.tanh(pre_h)?;
    let h = tape.hadamard(o, squashed)?;
    Ok(CellOutput { h, c, gammas })
}

/// Combines the active cell states of one step. Returns the summary and, for
/// attention, the normalized weights in input order.
pub fn aggregate<S: Scalar>(
    tape: &mut Tape<S>,
    binder: &mut Binder<'_, S>,
    kind: AggregationKind,
    states: &[Var],
) -> Result<(Var, Option<Vec<S>>), ModelError> {
    if states.is_empty() {
        return Err(ModelError::EmptyAggregation);
    }
    let stage = ModelError::stage;
    match kind {
        AggregationKind::Mean => {
            let total = tape.add_n(states).map_err(stage("mean aggregation"))?;
            let mean = tape
                .scale(total, S::one() / S::of(states.len() as f64))
                .map_err(stage("mean aggregation"))?;
            Ok((mean, None))
        }
        AggregationKind::Max => Ok((tape.max_n(states).map_err(stage("max aggregation"))?, None)),
        AggregationKind::Attention => {
            let (w, b) = binder.params().layout.attention.ok_or_else(|| {
                ModelError::InvalidConfig("attention aggregation without score weights".into())
            })?;
            let (w, b) = (binder.var(tape, w), binder.var(tape, b));
            let run = |tape: &mut Tape<S>| -> Result<(Var, Vec<S>), DiffError> {
                let scores = states
                    .iter()
                    .map(|&c| tape.affine(w, c, b))
                    .collect::<Result<Vec<_>, _>>()?;
                let stacked = tape.concat_rows(&scores)?;
                let weights = tape.softmax(stacked)?;
                let mut weighted = Vec::with_capacity(states.len());
                for (k, &c) in states.iter().enumerate() {
                    let a = tape.slice(weights, k, 1)?;
                    weighted.push(tape.scale_by(c, a)?);
                }
                let summary = tape.add_n(&weighted)?;
                Ok((summary, tape.value(weights).data().to_vec()))
            };
            let (summary, weights) = run(tape).map_err(stage("attention aggregation"))?;
            Ok((summary, Some(weights)))
        }
    }
}

/// One cell invocation recorded during a rollout.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellCall {
    pub step: usize,
    pub sensor: usize,
    pub delta: f64,
    /// Step whose local output this call read, `None` for the initial state.
    pub prev_local: Option<usize>,
    /// Step whose global summary this call read, `None` for the initial summary.
    pub global_from: Option<usize>,
}

/// One block of the concatenated head input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ConcatPart {
    Global { step: usize },
    Local { sensor: usize, step: Option<usize> },
    Static,
}

/// Structural record of a rollout.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RolloutTrace {
    pub calls: Vec<CellCall>,
    /// Per step, `(sensor, weight)` for attention aggregation; empty otherwise.
    pub attention: Vec<Vec<(usize, f64)>>,
    pub concat: Vec<ConcatPart>,
}

/// Tape handles produced by a full forward pass.
#[derive(Clone, Debug)]
pub struct Rollout {
    pub logits: Var,
    pub global: Var,
    /// Final local state per sensor (the initial state if never observed).
    pub local: Vec<Var>,
    pub trace: RolloutTrace,
}

/// Runs every step of `schedule` and the prediction head.
pub fn forward_on_tape<S: Scalar>(
    tape: &mut Tape<S>,
    binder: &mut Binder<'_, S>,
    schedule: &SwitchSchedule,
    statics: Option<&[f64]>,
) -> Result<Rollout, ModelError> {
    let params = binder.params();
    let config = &params.config;
    let layout = &params.layout;
    if schedule.sensor_count != config.sensors {
        return Err(ModelError::SensorCountMismatch {
            schedule: schedule.sensor_count,
            model: config.sensors,
        });
    }
    let got = statics.map_or(0, <[f64]>::len);
    if got != config.statics {
        return Err(ModelError::StaticsMismatch {
            expected: config.statics,
            got,
        });
    }

    let mut local: Vec<Var> = layout.sensors.iter().map(|s| binder.var(tape, s.h0)).collect();
    let mut local_step: Vec<Option<usize>> = vec![None; config.sensors];
    let mut global = binder.var(tape, layout.c0);
    let mut global_step = None;
    let mut trace = RolloutTrace::default();

    for (j, entries) in schedule.steps.iter().enumerate() {
        let mut outputs = Vec::with_capacity(entries.len());
        for e in entries {
            let out = cell_step(
                tape,
                binder,
                e.sensor,
                S::of(e.value),
                S::of(e.delta),
                local[e.sensor],
                global,
            )
            .map_err(|source| ModelError::Cell {
                sensor: e.sensor,
                step: j,
                source,
            })?;
            trace.calls.push(CellCall {
                step: j,
                sensor: e.sensor,
                delta: e.delta,
                prev_local: local_step[e.sensor],
                global_from: global_step,
            });
            outputs.push(out);
        }
        let states: Vec<Var> = outputs.iter().map(|o| o.c).collect();
        let (summary, weights) = aggregate(tape, binder, config.aggregation, &states)?;
        if let Some(w) = weights {
            trace
                .attention
                .push(entries.iter().zip(w).map(|(e, a)| (e.sensor, a.as_f64())).collect());
        }
        for (e, out) in entries.iter().zip(&outputs) {
            local[e.sensor] = out.h;
            local_step[e.sensor] = Some(j);
        }
        global = summary;
        global_step = Some(j);
    }

    let mut parts = Vec::new();
    if config.concat != ConcatMode::Local {
        parts.push(global);
        trace.concat.push(ConcatPart::Global {
            step: global_step.unwrap_or(0),
        });
    }
    if config.concat != ConcatMode::Global {
        for m in 0..config.sensors {
            parts.push(local[m]);
            trace.concat.push(ConcatPart::Local {
                sensor: m,
                step: local_step[m],
            });
        }
    }
    if let (Some(values), Some((w, b))) = (statics, layout.statics) {
        let x: Vec<S> = values.iter().map(|&v| S::of(v)).collect();
        let xv = tape.constant_vector(&x);
        let (w, b) = (binder.var(tape, w), binder.var(tape, b));
        parts.push(tape.affine(w, xv, b).map_err(ModelError::stage("static embedding"))?);
        trace.concat.push(ConcatPart::Static);
    }
    let head = |tape: &mut Tape<S>, binder: &mut Binder<'_, S>| -> Result<Var, DiffError> {
        let joined = tape.concat_rows(&parts)?;
        let (w, b) = (binder.var(tape, layout.head_w), binder.var(tape, layout.head_b));
        tape.affine(w, joined, b)
    };
    let logits = head(tape, binder).map_err(ModelError::stage("prediction head"))?;
    Ok(Rollout {
        logits,
        global,
        local,
        trace,
    })
}

/// Loss, probability of class 1 and per-tensor gradients for one instance.
#[derive(Clone, Debug)]
pub struct InstanceGradients<S> {
    pub loss: S,
    pub prob: S,
    pub grads: Vec<Tensor<S>>,
}

/// Cross-entropy loss of one instance and its gradient for every tensor.
pub fn loss_and_gradients<S: Scalar>(
    params: &SlanParams<S>,
    schedule: &SwitchSchedule,
    statics: Option<&[f64]>,
    label: u8,
) -> Result<InstanceGradients<S>, ModelError> {
    let mut tape = Tape::new();
    let mut binder = Binder::new(params);
    let rollout = forward_on_tape(&mut tape, &mut binder, schedule, statics)?;
    let loss = tape
        .cross_entropy(rollout.logits, usize::from(label))
        .map_err(ModelError::stage("loss"))?;
    tape.backward(loss).map_err(ModelError::stage("backward"))?;
    Ok(InstanceGradients {
        loss: tape.value(loss).data()[0],
        prob: positive_probability(tape.value(rollout.logits).data()),
        grads: binder.gradients(&tape),
    })
}

/// Probability of class 1 from a forward pass.
pub fn predict_proba<S: Scalar>(
    params: &SlanParams<S>,
    schedule: &SwitchSchedule,
    statics: Option<&[f64]>,
) -> Result<S, ModelError> {
    let mut tape = Tape::new();
    let mut binder = Binder::new(params);
    let rollout = forward_on_tape(&mut tape, &mut binder, schedule, statics)?;
    Ok(positive_probability(tape.value(rollout.logits).data()))
}

fn positive_probability<S: Scalar>(logits: &[S]) -> S {
    // σ(l1 − l0), evaluated without overflow
    let d = logits[1] - logits[0];
    if d >= S::zero() {
        S::one() / (S::one() + (-d).exp())
    } else {
        let e = d.exp();
        e / (S::one() + e)
    }
}
