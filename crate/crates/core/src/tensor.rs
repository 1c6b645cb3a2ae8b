//! Dense real tensors in row-major order and the basic multilinear
//! operations on them.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("data length {len} does not match shape {shape:?}")]
    LengthMismatch { shape: Vec<usize>, len: usize },
    #[error("shape {0:?} has a zero dimension")]
    ZeroDim(Vec<usize>),
    #[error("entry {0} is not finite")]
    NonFinite(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("default feature map only supports local dimension 2, got {0}")]
    UnsupportedLocalDim(usize),
}

#[derive(Debug, Clone, Deserialize)]
struct RawTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// A dense tensor. An empty shape is a scalar holding one entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTensor")]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl TryFrom<RawTensor> for DenseTensor {
    type Error = TensorError;

    fn try_from(raw: RawTensor) -> Result<Self, Self::Error> {
        Self::new(raw.shape, raw.data)
    }
}

/// Row-major strides for `shape`.
pub fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

/// Advances a row-major multi-index; returns false after the last one.
pub fn next_index(index: &mut [usize], shape: &[usize]) -> bool {
    for k in (0..shape.len()).rev() {
        index[k] += 1;
        if index[k] < shape[k] {
            return true;
        }
        index[k] = 0;
    }
    false
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        if shape.contains(&0) {
            return Err(TensorError::ZeroDim(shape));
        }
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(TensorError::LengthMismatch {
                shape,
                len: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(TensorError::NonFinite(i));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        assert!(!shape.contains(&0), "zero dimension in {shape:?}");
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self::new(vec![data.len()], data).expect("finite non-empty vector")
    }

    /// Builds a tensor by evaluating `f` at every multi-index in row-major order.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        assert!(!shape.contains(&0), "zero dimension in {shape:?}");
        let len = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut index = vec![0; shape.len()];
        loop {
            data.push(f(&index));
            if !next_index(&mut index, shape) {
                break;
            }
        }
        debug_assert_eq!(data.len(), len);
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.shape.len(), "index order");
        let mut off = 0;
        for (k, &i) in index.iter().enumerate() {
            assert!(i < self.shape[k], "index {index:?} out of bounds for {:?}", self.shape);
            off = off * self.shape[k] + i;
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self, TensorError> {
        Self::new(shape, self.data)
    }

    /// Reorders axes: axis `k` of the result is axis `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.order());
        let shape: Vec<usize> = perm.iter().map(|&a| self.shape[a]).collect();
        let src = strides_of(&self.shape);
        let strides: Vec<usize> = perm.iter().map(|&a| src[a]).collect();
        Self::from_fn(&shape, |idx| {
            let off: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
            self.data[off]
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Sum over all multi-indices of the elementwise products.
pub fn inner_product(a: &DenseTensor, b: &DenseTensor) -> Result<f64, TensorError> {
    if a.shape != b.shape {
        return Err(TensorError::ShapeMismatch(format!(
            "{:?} vs {:?}",
            a.shape, b.shape
        )));
    }
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum())
}

/// Outer product of order-1 tensors; the empty list gives the scalar 1.
pub fn outer_product(vectors: &[DenseTensor]) -> Result<DenseTensor, TensorError> {
    if let Some(v) = vectors.iter().find(|v| v.order() != 1) {
        return Err(TensorError::ShapeMismatch(format!(
            "outer product expects vectors, got shape {:?}",
            v.shape
        )));
    }
    let mut out = DenseTensor::scalar(1.0);
    for v in vectors {
        let mut shape = out.shape.clone();
        shape.push(v.len());
        let mut data = Vec::with_capacity(out.len() * v.len());
        for &x in &out.data {
            data.extend(v.data.iter().map(|y| x * y));
        }
        out = DenseTensor { shape, data };
    }
    Ok(out)
}

/// Mode-`mode` product (0-based): contracts the columns of `matrix` against
/// axis `mode` of `tensor`; the result has `matrix.rows` entries on that axis.
pub fn mode_k_product(
    tensor: &DenseTensor,
    matrix: &DenseTensor,
    mode: usize,
) -> Result<DenseTensor, TensorError> {
    if matrix.order() != 2 {
        return Err(TensorError::ShapeMismatch(format!(
            "mode product needs a matrix, got shape {:?}",
            matrix.shape
        )));
    }
    if mode >= tensor.order() {
        return Err(TensorError::ShapeMismatch(format!(
            "mode {mode} out of range for order {}",
            tensor.order()
        )));
    }
    let (rows, cols) = (matrix.shape[0], matrix.shape[1]);
    if cols != tensor.shape[mode] {
        return Err(TensorError::ShapeMismatch(format!(
            "matrix has {cols} columns but mode {mode} has size {}",
            tensor.shape[mode]
        )));
    }
    let outer: usize = tensor.shape[..mode].iter().product();
    let inner: usize = tensor.shape[mode + 1..].iter().product();
    let mut shape = tensor.shape.clone();
    shape[mode] = rows;
    let mut data = vec![0.0; outer * rows * inner];
    for o in 0..outer {
        for i in 0..rows {
            let dst = &mut data[(o * rows + i) * inner..(o * rows + i + 1) * inner];
            for j in 0..cols {
                let m = matrix.data[i * cols + j];
                if m == 0.0 {
                    continue;
                }
                let src = &tensor.data[(o * cols + j) * inner..(o * cols + j + 1) * inner];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += m * s);
            }
        }
    }
    Ok(DenseTensor { shape, data })
}

/// The default local map `t -> (cos(pi t / 2), sin(pi t / 2))`.
pub fn trig_local_map(t: f64) -> [f64; 2] {
    [(FRAC_PI_2 * t).cos(), (FRAC_PI_2 * t).sin()]
}

/// Maps a vector `x` of length `p` to the rank-one tensor
/// `phi(x_1) (x) ... (x) phi(x_p)` using the trigonometric local map.
pub fn feature_map(x: &DenseTensor, local_dim: usize) -> Result<DenseTensor, TensorError> {
    if local_dim != 2 {
        return Err(TensorError::UnsupportedLocalDim(local_dim));
    }
    feature_map_with(x, |t| trig_local_map(t).to_vec())
}

/// Same as [`feature_map`] with a caller-supplied local map. Every call to
/// `local` must return a non-empty vector of the same length.
pub fn feature_map_with(
    x: &DenseTensor,
    local: impl Fn(f64) -> Vec<f64>,
) -> Result<DenseTensor, TensorError> {
    if x.order() != 1 {
        return Err(TensorError::ShapeMismatch(format!(
            "feature map expects a vector, got shape {:?}",
            x.shape
        )));
    }
    let factors = x
        .data
        .iter()
        .map(|&t| {
            let v = local(t);
            DenseTensor::new(vec![v.len()], v)
        })
        .collect::<Result<Vec<_>, _>>()?;
    if factors.windows(2).any(|w| w[0].shape != w[1].shape) {
        return Err(TensorError::ShapeMismatch(
            "local map returned vectors of different lengths".into(),
        ));
    }
    outer_product(&factors)
}
