use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Row-major matrix shape. Vectors are stored as `(len, 1)` columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub const fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub const fn vector(len: usize) -> Self {
        Self { rows: len, cols: 1 }
    }

    pub const fn scalar() -> Self {
        Self { rows: 1, cols: 1 }
    }

    pub const fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn is_vector(&self) -> bool {
        self.cols == 1
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.cols == 1 {
            write!(f, "({},)", self.rows)
        } else {
            write!(f, "({}x{})", self.rows, self.cols)
        }
    }
}

/// Dense row-major tensor of rank at most two.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S> {
    shape: Shape,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    /// Panics if `data.len()` disagrees with `shape`.
    pub fn new(shape: Shape, data: Vec<S>) -> Self {
        assert_eq!(
            shape.len(),
            data.len(),
            "tensor data length {} does not match shape {shape}",
            data.len()
        );
        Self { shape, data }
    }

    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            data: vec![S::zero(); shape.len()],
        }
    }

    pub fn filled(shape: Shape, value: S) -> Self {
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_vec(data: Vec<S>) -> Self {
        Self {
            shape: Shape::vector(data.len()),
            data,
        }
    }

    pub fn from_f64(shape: Shape, data: &[f64]) -> Self {
        Self::new(shape, data.iter().map(|&v| S::of(v)).collect())
    }

    pub fn scalar(value: S) -> Self {
        Self {
            shape: Shape::scalar(),
            data: vec![value],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(Shape::new(n, n));
        for i in 0..n {
            t.data[i * n + i] = S::one();
        }
        t
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> S {
        self.data[row * self.shape.cols + col]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.as_f64()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
    }

    pub fn scale_in_place(&mut self, factor: S) {
        for v in &mut self.data {
            *v = *v * factor;
        }
    }

    pub fn sum(&self) -> S {
        self.data.iter().copied().sum()
    }

    pub fn squared_norm(&self) -> S {
        self.data.iter().map(|&v| v * v).sum()
    }
}

impl<S: Scalar> fmt::Display for Tensor<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{} [", self.shape)?;
        for (i, v) in self.data.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}
