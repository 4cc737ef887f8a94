//! Append-only computation tape with reverse-mode accumulation.
//!
//! Every operation evaluates eagerly, stores its output on the tape and
//! records enough about its inputs to push adjoints back in [`Tape::backward`].
//! Nodes only ever reference earlier nodes, so a reverse sweep over the node
//! vector is a valid topological order.

use super::tensor::{Shape, Tensor};
use super::DiffError;
use crate::scalar::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<S> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Hadamard(usize, usize),
    MatMul(usize, usize),
    Affine { weight: usize, input: usize, bias: usize },
    Linear { terms: Vec<(usize, usize)>, bias: usize },
    Scale(usize, S),
    ScaleBy { input: usize, factor: usize },
    AddN(Vec<usize>),
    MaxN { inputs: Vec<usize>, argmax: Vec<usize> },
    ConcatRows(Vec<usize>),
    Slice { input: usize, start: usize },
    Sigmoid(usize),
    Tanh(usize),
    Sin(usize),
    Sum(usize),
    Softmax(usize),
    CrossEntropy { logits: usize, label: usize, probs: Vec<S> },
    #[cfg(test)]
    BrokenSin(usize),
}

impl<S> Op<S> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Hadamard(..) => "hadamard",
            Op::MatMul(..) => "matmul",
            Op::Affine { .. } => "affine",
            Op::Linear { .. } => "linear",
            Op::Scale(..) => "scale",
            Op::ScaleBy { .. } => "scale_by",
            Op::AddN(..) => "add_n",
            Op::MaxN { .. } => "max_n",
            Op::ConcatRows(..) => "concat_rows",
            Op::Slice { .. } => "slice",
            Op::Sigmoid(..) => "sigmoid",
            Op::Tanh(..) => "tanh",
            Op::Sin(..) => "sin",
            Op::Sum(..) => "sum",
            Op::Softmax(..) => "softmax",
            Op::CrossEntropy { .. } => "cross_entropy",
            #[cfg(test)]
            Op::BrokenSin(..) => "broken_sin",
        }
    }
}

#[derive(Clone, Debug)]
struct Node<S> {
    op: Op<S>,
    value: Tensor<S>,
    grad: Option<Tensor<S>>,
}

/// Dynamic computation record. One tape per rollout; not shared across threads.
#[derive(Clone, Debug)]
pub struct Tape<S> {
    nodes: Vec<Node<S>>,
    backward_done: bool,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

fn matmul_into<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>, out: &mut [S]) {
    let (m, k, n) = (a.shape().rows, a.shape().cols, b.shape().cols);
    let (ad, bd) = (a.data(), b.data());
    for i in 0..m {
        let row = &ad[i * k..(i + 1) * k];
        for j in 0..n {
            let mut acc = S::zero();
            for (p, &av) in row.iter().enumerate() {
                acc = acc + av * bd[p * n + j];
            }
            out[i * n + j] = acc;
        }
    }
}

fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

fn softmax_values<S: Scalar>(x: &[S]) -> Vec<S> {
    let max = x.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = x.iter().map(|&v| (v - max).exp()).collect();
    let total: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Adds `contrib` into the gradient buffer of node `i`, allocating it on first use.
fn accumulate<S: Scalar>(nodes: &mut [Node<S>], i: usize, contrib: impl Iterator<Item = (usize, S)>) {
    let node = &mut nodes[i];
    let shape = node.value.shape();
    let grad = node.grad.get_or_insert_with(|| Tensor::zeros(shape));
    let buf = grad.data_mut();
    for (k, v) in contrib {
        buf[k] = buf[k] + v;
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input (parameter or constant).
    pub fn leaf(&mut self, value: Tensor<S>) -> Var {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant_vector(&mut self, values: &[S]) -> Var {
        self.leaf(Tensor::from_vec(values.to_vec()))
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last backward root with respect to `v`, if it was reached.
    pub fn grad(&self, v: Var) -> Option<&Tensor<S>> {
        self.nodes[v.0].grad.as_ref()
    }

    /// Gradient with respect to `v`, zeros when `v` was unreachable from the root.
    pub fn grad_or_zeros(&self, v: Var) -> Tensor<S> {
        self.grad(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(self.shape(v)))
    }

    fn push(&mut self, op: Op<S>, value: Tensor<S>) -> Result<Var, DiffError> {
        if !value.is_finite() {
            return Err(DiffError::NonFinite {
                op: op.name(),
                node: self.nodes.len(),
            });
        }
        self.nodes.push(Node {
            op,
            value,
            grad: None,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<Shape, DiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(DiffError::ShapeMismatch {
                op,
                left: sa,
                right: sb,
            });
        }
        Ok(sa)
    }

    fn zip_with(&mut self, op: Op<S>, a: Var, b: Var, f: impl Fn(S, S) -> S) -> Result<Var, DiffError> {
        let shape = self.same_shape(op.name(), a, b)?;
        let data = self.nodes[a.0]
            .value
            .data()
            .iter()
            .zip(self.nodes[b.0].value.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        self.push(op, Tensor::new(shape, data))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.zip_with(Op::Add(a.0, b.0), a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.zip_with(Op::Sub(a.0, b.0), a, b, |x, y| x - y)
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.zip_with(Op::Hadamard(a.0, b.0), a, b, |x, y| x * y)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.cols != sb.rows {
            return Err(DiffError::ShapeMismatch {
                op: "matmul",
                left: sa,
                right: sb,
            });
        }
        let shape = Shape::new(sa.rows, sb.cols);
        let mut out = vec![S::zero(); shape.len()];
        matmul_into(&self.nodes[a.0].value, &self.nodes[b.0].value, &mut out);
        self.push(Op::MatMul(a.0, b.0), Tensor::new(shape, out))
    }

    /// `weight · input + bias` as a single node.
    pub fn affine(&mut self, weight: Var, input: Var, bias: Var) -> Result<Var, DiffError> {
        let (sw, sx, sb) = (self.shape(weight), self.shape(input), self.shape(bias));
        if sw.cols != sx.rows {
            return Err(DiffError::ShapeMismatch {
                op: "affine",
                left: sw,
                right: sx,
            });
        }
        let shape = Shape::new(sw.rows, sx.cols);
        if sb != shape {
            return Err(DiffError::ShapeMismatch {
                op: "affine",
                left: shape,
                right: sb,
            });
        }
        let mut out = vec![S::zero(); shape.len()];
        matmul_into(&self.nodes[weight.0].value, &self.nodes[input.0].value, &mut out);
        for (o, &b) in out.iter_mut().zip(self.nodes[bias.0].value.data()) {
            *o = *o + b;
        }
        self.push(
            Op::Affine {
                weight: weight.0,
                input: input.0,
                bias: bias.0,
            },
            Tensor::new(shape, out),
        )
    }

    /// `Σ_k W_k · x_k + bias` as a single node.
    pub fn linear(&mut self, terms: &[(Var, Var)], bias: Var) -> Result<Var, DiffError> {
        let shape = self.shape(bias);
        let mut out = self.nodes[bias.0].value.data().to_vec();
        let mut buf = vec![S::zero(); shape.len()];
        for &(w, x) in terms {
            let (sw, sx) = (self.shape(w), self.shape(x));
            if sw.cols != sx.rows {
                return Err(DiffError::ShapeMismatch {
                    op: "linear",
                    left: sw,
                    right: sx,
                });
            }
            if Shape::new(sw.rows, sx.cols) != shape {
                return Err(DiffError::ShapeMismatch {
                    op: "linear",
                    left: Shape::new(sw.rows, sx.cols),
                    right: shape,
                });
            }
            matmul_into(&self.nodes[w.0].value, &self.nodes[x.0].value, &mut buf);
            for (o, &v) in out.iter_mut().zip(&buf) {
                *o = *o + v;
            }
        }
        self.push(
            Op::Linear {
                terms: terms.iter().map(|&(w, x)| (w.0, x.0)).collect(),
                bias: bias.0,
            },
            Tensor::new(shape, out),
        )
    }

    /// Multiplies by a constant that is not tracked on the tape.
    pub fn scale(&mut self, a: Var, factor: S) -> Result<Var, DiffError> {
        let value = self.nodes[a.0].value.map(|v| v * factor);
        self.push(Op::Scale(a.0, factor), value)
    }

    /// Multiplies every element of `a` by the single element of `factor`.
    pub fn scale_by(&mut self, a: Var, factor: Var) -> Result<Var, DiffError> {
        let sf = self.shape(factor);
        if sf.len() != 1 {
            return Err(DiffError::ShapeMismatch {
                op: "scale_by",
                left: self.shape(a),
                right: sf,
            });
        }
        let k = self.nodes[factor.0].value.data()[0];
        let value = self.nodes[a.0].value.map(|v| v * k);
        self.push(
            Op::ScaleBy {
                input: a.0,
                factor: factor.0,
            },
            value,
        )
    }

    fn check_same_shapes(&self, op: &'static str, inputs: &[Var]) -> Result<Shape, DiffError> {
        let first = *inputs.first().ok_or(DiffError::EmptyInput { op })?;
        let shape = self.shape(first);
        for &v in &inputs[1..] {
            self.same_shape(op, first, v)?;
        }
        Ok(shape)
    }

    pub fn add_n(&mut self, inputs: &[Var]) -> Result<Var, DiffError> {
        let shape = self.check_same_shapes("add_n", inputs)?;
        let mut out = vec![S::zero(); shape.len()];
        for v in inputs {
            for (o, &x) in out.iter_mut().zip(self.nodes[v.0].value.data()) {
                *o = *o + x;
            }
        }
        self.push(
            Op::AddN(inputs.iter().map(|v| v.0).collect()),
            Tensor::new(shape, out),
        )
    }

    /// Elementwise maximum. Ties route the adjoint to the earliest input.
    pub fn max_n(&mut self, inputs: &[Var]) -> Result<Var, DiffError> {
        let shape = self.check_same_shapes("max_n", inputs)?;
        let mut out = self.nodes[inputs[0].0].value.data().to_vec();
        let mut argmax = vec![0usize; shape.len()];
        for (slot, v) in inputs.iter().enumerate().skip(1) {
            for (e, &x) in self.nodes[v.0].value.data().iter().enumerate() {
                if x > out[e] {
                    out[e] = x;
                    argmax[e] = slot;
                }
            }
        }
        self.push(
            Op::MaxN {
                inputs: inputs.iter().map(|v| v.0).collect(),
                argmax,
            },
            Tensor::new(shape, out),
        )
    }

    /// Stacks inputs vertically; all inputs must share a column count.
    pub fn concat_rows(&mut self, inputs: &[Var]) -> Result<Var, DiffError> {
        let first = *inputs.first().ok_or(DiffError::EmptyInput { op: "concat_rows" })?;
        let cols = self.shape(first).cols;
        let mut rows = 0;
        let mut data = Vec::new();
        for &v in inputs {
            let s = self.shape(v);
            if s.cols != cols {
                return Err(DiffError::ShapeMismatch {
                    op: "concat_rows",
                    left: self.shape(first),
                    right: s,
                });
            }
            rows += s.rows;
            data.extend_from_slice(self.nodes[v.0].value.data());
        }
        self.push(
            Op::ConcatRows(inputs.iter().map(|v| v.0).collect()),
            Tensor::new(Shape::new(rows, cols), data),
        )
    }

    /// Rows `start..start + len` of `a`.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var, DiffError> {
        let s = self.shape(a);
        if start + len > s.rows || len == 0 {
            return Err(DiffError::SliceOutOfRange {
                shape: s,
                start,
                len,
            });
        }
        let data = self.nodes[a.0].value.data()[start * s.cols..(start + len) * s.cols].to_vec();
        self.push(
            Op::Slice { input: a.0, start },
            Tensor::new(Shape::new(len, s.cols), data),
        )
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, DiffError> {
        let value = self.nodes[a.0].value.map(sigmoid);
        self.push(Op::Sigmoid(a.0), value)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, DiffError> {
        let value = self.nodes[a.0].value.map(S::tanh);
        self.push(Op::Tanh(a.0), value)
    }

    pub fn sin(&mut self, a: Var) -> Result<Var, DiffError> {
        let value = self.nodes[a.0].value.map(S::sin);
        self.push(Op::Sin(a.0), value)
    }

    #[cfg(test)]
    pub(crate) fn broken_sin(&mut self, a: Var) -> Result<Var, DiffError> {
        let value = self.nodes[a.0].value.map(S::sin);
        self.push(Op::BrokenSin(a.0), value)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, DiffError> {
        let total = self.nodes[a.0].value.sum();
        self.push(Op::Sum(a.0), Tensor::scalar(total))
    }

    /// Max-shifted softmax over all elements of a vector.
    pub fn softmax(&mut self, a: Var) -> Result<Var, DiffError> {
        let s = self.shape(a);
        let probs = softmax_values(self.nodes[a.0].value.data());
        self.push(Op::Softmax(a.0), Tensor::new(s, probs))
    }

    /// `-log softmax(logits)[label]`, stabilised by max subtraction.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var, DiffError> {
        let s = self.shape(logits);
        if !s.is_vector() || label >= s.rows {
            return Err(DiffError::LabelOutOfRange { label, shape: s });
        }
        let x = self.nodes[logits.0].value.data();
        let max = x.iter().copied().fold(S::neg_infinity(), S::max);
        let lse = max + x.iter().map(|&v| (v - max).exp()).sum::<S>().ln();
        let loss = lse - x[label];
        let probs = softmax_values(x);
        self.push(
            Op::CrossEntropy {
                logits: logits.0,
                label,
                probs,
            },
            Tensor::scalar(loss),
        )
    }

    /// Clears every gradient buffer so `backward` may run again.
    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
        self.backward_done = false;
    }

    /// Accumulates `d root / d node` into every node reachable from `root`.
    pub fn backward(&mut self, root: Var) -> Result<(), DiffError> {
        if self.backward_done {
            return Err(DiffError::BackwardRepeated);
        }
        let shape = self.shape(root);
        if shape.len() != 1 {
            return Err(DiffError::NonScalarRoot { shape });
        }
        self.nodes[root.0].grad = Some(Tensor::scalar(S::one()));
        for i in (0..=root.0).rev() {
            let (before, rest) = self.nodes.split_at_mut(i);
            let node = &mut rest[0];
            let Some(g) = node.grad.as_ref() else { continue };
            let g = g.data();
            let out = node.value.data();
            match &node.op {
                Op::Leaf => {}
                &Op::Add(a, b) => {
                    accumulate(before, a, g.iter().copied().enumerate());
                    accumulate(before, b, g.iter().copied().enumerate());
                }
                &Op::Sub(a, b) => {
                    accumulate(before, a, g.iter().copied().enumerate());
                    accumulate(before, b, g.iter().map(|&v| -v).enumerate());
                }
                &Op::Hadamard(a, b) => {
                    let vb: Vec<S> = g.iter().zip(before[b].value.data()).map(|(&g, &y)| g * y).collect();
                    let va: Vec<S> = g.iter().zip(before[a].value.data()).map(|(&g, &x)| g * x).collect();
                    accumulate(before, a, vb.into_iter().enumerate());
                    accumulate(before, b, va.into_iter().enumerate());
                }
                &Op::MatMul(a, b) => matmul_backward(before, a, b, g),
                &Op::Affine { weight, input, bias } => {
                    matmul_backward(before, weight, input, g);
                    accumulate(before, bias, g.iter().copied().enumerate());
                }
                Op::Linear { terms, bias } => {
                    for &(w, x) in terms {
                        matmul_backward(before, w, x, g);
                    }
                    accumulate(before, *bias, g.iter().copied().enumerate());
                }
                &Op::Scale(a, k) => accumulate(before, a, g.iter().map(|&v| v * k).enumerate()),
                &Op::ScaleBy { input, factor } => {
                    let k = before[factor].value.data()[0];
                    let dk: S = g
                        .iter()
                        .zip(before[input].value.data())
                        .map(|(&g, &x)| g * x)
                        .sum();
                    accumulate(before, input, g.iter().map(|&v| v * k).enumerate());
                    accumulate(before, factor, std::iter::once((0, dk)));
                }
                Op::AddN(inputs) => {
                    for &a in inputs {
                        accumulate(before, a, g.iter().copied().enumerate());
                    }
                }
                Op::MaxN { inputs, argmax } => {
                    for (slot, &a) in inputs.iter().enumerate() {
                        let hits = argmax
                            .iter()
                            .enumerate()
                            .filter(|&(_, &w)| w == slot)
                            .map(|(e, _)| (e, g[e]));
                        accumulate(before, a, hits);
                    }
                }
                Op::ConcatRows(inputs) => {
                    let mut offset = 0;
                    for &a in inputs {
                        let n = before[a].value.len();
                        accumulate(before, a, g[offset..offset + n].iter().copied().enumerate());
                        offset += n;
                    }
                }
                &Op::Slice { input, start } => {
                    let cols = before[input].value.shape().cols;
                    let base = start * cols;
                    accumulate(before, input, g.iter().enumerate().map(|(k, &v)| (base + k, v)));
                }
                &Op::Sigmoid(a) => accumulate(
                    before,
                    a,
                    g.iter()
                        .zip(out)
                        .map(|(&g, &y)| g * y * (S::one() - y))
                        .enumerate(),
                ),
                &Op::Tanh(a) => accumulate(
                    before,
                    a,
                    g.iter().zip(out).map(|(&g, &y)| g * (S::one() - y * y)).enumerate(),
                ),
                &Op::Sin(a) => {
                    let d: Vec<S> = g
                        .iter()
                        .zip(before[a].value.data())
                        .map(|(&g, &x)| g * x.cos())
                        .collect();
                    accumulate(before, a, d.into_iter().enumerate());
                }
                #[cfg(test)]
                &Op::BrokenSin(a) => {
                    let d: Vec<S> = g
                        .iter()
                        .zip(before[a].value.data())
                        .map(|(&g, &x)| g * x.sin())
                        .collect();
                    accumulate(before, a, d.into_iter().enumerate());
                }
                &Op::Sum(a) => {
                    let n = before[a].value.len();
                    accumulate(before, a, (0..n).map(|k| (k, g[0])));
                }
                &Op::Softmax(a) => {
                    let dot: S = g.iter().zip(out).map(|(&g, &y)| g * y).sum();
                    accumulate(
                        before,
                        a,
                        g.iter().zip(out).map(|(&g, &y)| y * (g - dot)).enumerate(),
                    );
                }
                Op::CrossEntropy { logits, label, probs } => {
                    let (logits, label) = (*logits, *label);
                    let d: Vec<S> = probs
                        .iter()
                        .enumerate()
                        .map(|(k, &p)| {
                            let target = if k == label { S::one() } else { S::zero() };
                            g[0] * (p - target)
                        })
                        .collect();
                    accumulate(before, logits, d.into_iter().enumerate());
                }
            }
        }
        self.backward_done = true;
        Ok(())
    }
}

fn matmul_backward<S: Scalar>(nodes: &mut [Node<S>], a: usize, b: usize, g: &[S]) {
    let (sa, sb) = (nodes[a].value.shape(), nodes[b].value.shape());
    let (m, k, n) = (sa.rows, sa.cols, sb.cols);
    // dA = G · Bᵀ
    let mut da = vec![S::zero(); m * k];
    {
        let bd = nodes[b].value.data();
        for i in 0..m {
            for p in 0..k {
                let mut acc = S::zero();
                for j in 0..n {
                    acc = acc + g[i * n + j] * bd[p * n + j];
                }
                da[i * k + p] = acc;
            }
        }
    }
    // dB = Aᵀ · G
    let mut db = vec![S::zero(); k * n];
    {
        let ad = nodes[a].value.data();
        for i in 0..m {
            for p in 0..k {
                let av = ad[i * k + p];
                for j in 0..n {
                    db[p * n + j] = db[p * n + j] + av * g[i * n + j];
                }
            }
        }
    }
    accumulate(nodes, a, da.into_iter().enumerate());
    accumulate(nodes, b, db.into_iter().enumerate());
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::gradcheck::check_gradients;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, shape: Shape) -> Tensor<f64> {
        Tensor::new(shape, (0..shape.len()).map(|_| rng.random_range(-1.5..1.5)).collect())
    }

    fn naive_matmul(a: &Tensor<f64>, b: &Tensor<f64>) -> Vec<f64> {
        let (m, k, n) = (a.shape().rows, a.shape().cols, b.shape().cols);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    out[i * n + j] += a.get(i, p) * b.get(p, j);
                }
            }
        }
        out
    }

    #[test]
    fn matmul_identity() {
        let mut t = Tape::<f64>::new();
        let i = t.leaf(Tensor::identity(3));
        let x = t.leaf(Tensor::from_vec(vec![1.0, -2.0, 3.5]));
        let y = t.matmul(i, x).unwrap();
        assert_eq!(t.value(y).data(), &[1.0, -2.0, 3.5]);
    }

    #[test]
    fn matmul_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random(&mut rng, Shape::new(3, 4));
            let b = random(&mut rng, Shape::new(4, 2));
            let expected = naive_matmul(&a, &b);
            let mut t = Tape::new();
            let (va, vb) = (t.leaf(a), t.leaf(b));
            let c = t.matmul(va, vb).unwrap();
            for (x, y) in t.value(c).data().iter().zip(&expected) {
                assert!((x - y).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn hadamard_with_zero_has_zero_gradient() {
        let mut t = Tape::<f64>::new();
        let a = t.leaf(Tensor::from_vec(vec![1.0, 2.0, 3.0]));
        let z = t.leaf(Tensor::zeros(Shape::vector(3)));
        let h = t.hadamard(a, z).unwrap();
        assert!(t.value(h).data().iter().all(|&v| v == 0.0));
        let s = t.sum(h).unwrap();
        t.backward(s).unwrap();
        assert!(t.grad(a).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let mut t = Tape::<f64>::new();
        let a = t.leaf(Tensor::zeros(Shape::new(3, 4)));
        let b = t.leaf(Tensor::zeros(Shape::new(3, 2)));
        let err = t.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(3x4)") && msg.contains("(3x2)"), "{msg}");
        assert!(t.add(a, b).is_err());
    }

    #[test]
    fn activation_values_at_zero() {
        let mut t = Tape::<f64>::new();
        let z = t.leaf(Tensor::scalar(0.0));
        let s = t.sigmoid(z).unwrap();
        assert_eq!(t.value(s).data()[0], 0.5);
        let th = t.tanh(z).unwrap();
        assert_eq!(t.value(th).data()[0], 0.0);
        t.backward(th).unwrap();
        assert_eq!(t.grad(z).unwrap().data()[0], 1.0);
    }

    #[test]
    fn sigmoid_is_stable_for_large_inputs() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Tensor::from_vec(vec![-800.0, 800.0]));
        let s = t.sigmoid(x).unwrap();
        assert_eq!(t.value(s).data(), &[0.0, 1.0]);
    }

    #[test]
    fn cross_entropy_reference_values() {
        let mut t = Tape::<f64>::new();
        let l = t.leaf(Tensor::from_vec(vec![0.0, 0.0]));
        let ce = t.cross_entropy(l, 1).unwrap();
        assert!((t.value(ce).data()[0] - std::f64::consts::LN_2).abs() < 1e-15);

        let l = t.leaf(Tensor::from_vec(vec![1000.0, 0.0]));
        let ce = t.cross_entropy(l, 0).unwrap();
        let loss = t.value(ce).data()[0];
        assert!(loss.is_finite() && loss.abs() < 1e-300);
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut t = Tape::<f64>::new();
        let l = t.leaf(Tensor::from_vec(vec![3.0, -1.0, 0.5, 700.0]));
        let p = t.softmax(l).unwrap();
        assert!((t.value(p).sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_finite_output_is_an_error() {
        let mut t = Tape::<f64>::new();
        let a = t.leaf(Tensor::from_vec(vec![f64::MAX]));
        let err = t.scale(a, 10.0).unwrap_err();
        assert!(matches!(err, DiffError::NonFinite { op: "scale", node: 1 }));
    }

    #[test]
    fn backward_semantics() {
        let mut t = Tape::<f64>::new();
        let p = t.leaf(Tensor::new(Shape::new(2, 3), vec![1.0; 6]));
        let unused = t.leaf(Tensor::from_vec(vec![4.0]));
        let s = t.sum(p).unwrap();
        t.backward(s).unwrap();
        assert!(t.grad(p).unwrap().data().iter().all(|&g| g == 1.0));
        assert!(t.grad(unused).is_none());
        assert!(t.grad_or_zeros(unused).data().iter().all(|&g| g == 0.0));
        assert!(matches!(t.backward(s), Err(DiffError::BackwardRepeated)));
        t.zero_grad();
        t.backward(s).unwrap();

        let mut t = Tape::<f64>::new();
        let v = t.leaf(Tensor::from_vec(vec![1.0, 2.0]));
        assert!(matches!(t.backward(v), Err(DiffError::NonScalarRoot { .. })));
    }

    #[test]
    fn backward_leaves_forward_values_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = Tape::new();
        let w = t.leaf(random(&mut rng, Shape::new(3, 3)));
        let x = t.leaf(random(&mut rng, Shape::vector(3)));
        let h = t.matmul(w, x).unwrap();
        let a = t.tanh(h).unwrap();
        let s = t.sum(a).unwrap();
        let before: Vec<Vec<f64>> = (0..t.len()).map(|i| t.nodes[i].value.data().to_vec()).collect();
        t.backward(s).unwrap();
        let after: Vec<Vec<f64>> = (0..t.len()).map(|i| t.nodes[i].value.data().to_vec()).collect();
        assert_eq!(before, after);
    }

    /// Weighted sum `Σ r ⊙ out` turns any op into a scalar loss for checking.
    fn project(t: &mut Tape<f64>, out: Var, seed: u64) -> Result<Var, DiffError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = t.shape(out);
        let r = t.leaf(random(&mut rng, shape));
        let p = t.hadamard(out, r)?;
        t.sum(p)
    }

    type OpFn = fn(&mut Tape<f64>, &[Var]) -> Result<Var, DiffError>;

    fn op_cases() -> Vec<(&'static str, Vec<Shape>, OpFn)> {
        let v3 = Shape::vector(3);
        vec![
            ("add", vec![v3, v3], |t, p| t.add(p[0], p[1])),
            ("sub", vec![v3, v3], |t, p| t.sub(p[0], p[1])),
            ("hadamard", vec![v3, v3], |t, p| t.hadamard(p[0], p[1])),
            ("matmul", vec![Shape::new(3, 4), Shape::new(4, 2)], |t, p| t.matmul(p[0], p[1])),
            ("affine", vec![Shape::new(3, 4), Shape::vector(4), v3], |t, p| {
                t.affine(p[0], p[1], p[2])
            }),
            (
                "linear",
                vec![Shape::new(3, 1), Shape::scalar(), Shape::new(3, 2), Shape::vector(2), v3],
                |t, p| t.linear(&[(p[0], p[1]), (p[2], p[3])], p[4]),
            ),
            ("scale", vec![v3], |t, p| t.scale(p[0], -1.7)),
            ("scale_by", vec![v3, Shape::scalar()], |t, p| t.scale_by(p[0], p[1])),
            ("add_n", vec![v3, v3, v3], |t, p| t.add_n(p)),
            ("max_n", vec![v3, v3, v3], |t, p| t.max_n(p)),
            ("concat_rows", vec![v3, Shape::vector(2)], |t, p| t.concat_rows(p)),
            ("slice", vec![Shape::vector(5)], |t, p| t.slice(p[0], 1, 3)),
            ("sigmoid", vec![v3], |t, p| t.sigmoid(p[0])),
            ("tanh", vec![v3], |t, p| t.tanh(p[0])),
            ("sin", vec![v3], |t, p| t.sin(p[0])),
            ("sum", vec![v3], |t, p| t.sum(p[0])),
            ("softmax", vec![Shape::vector(4)], |t, p| t.softmax(p[0])),
            ("cross_entropy", vec![Shape::vector(2)], |t, p| t.cross_entropy(p[0], 1)),
        ]
    }

    #[test]
    fn every_op_adjoint_matches_central_differences() {
        for (name, shapes, op) in op_cases() {
            for trial in 0..10u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 * trial + name.len() as u64);
                let params: Vec<Tensor<f64>> = shapes.iter().map(|&s| random(&mut rng, s)).collect();
                let report = check_gradients(
                    |t: &mut Tape<f64>, p: &[Var]| {
                        let out = op(t, p)?;
                        project(t, out, 99 + trial)
                    },
                    &params,
                    1e-6,
                    1e-6,
                )
                .unwrap();
                assert!(report.passed, "{name} trial {trial}: {report:?}");
            }
        }
    }

    #[test]
    fn replay_is_bit_identical() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let mut t = Tape::new();
            let w = t.leaf(random(&mut rng, Shape::new(4, 4)));
            let x = t.leaf(random(&mut rng, Shape::vector(4)));
            let b = t.leaf(random(&mut rng, Shape::vector(4)));
            let a = t.affine(w, x, b).unwrap();
            let s = t.sigmoid(a).unwrap();
            let logits = t.slice(s, 0, 2).unwrap();
            let ce = t.cross_entropy(logits, 0).unwrap();
            t.backward(ce).unwrap();
            let mut bits: Vec<u64> = t.value(ce).data().iter().map(|v| v.to_bits()).collect();
            for v in [w, x, b] {
                bits.extend(t.grad(v).unwrap().data().iter().map(|g| g.to_bits()));
            }
            bits
        };
        assert_eq!(run(), run());
    }
}
