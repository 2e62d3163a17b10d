use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major tensor of `f64` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            values: vec![0.0; len],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let mut t = Self::zeros(shape);
        t.values.fill(value);
        t
    }

    pub fn from_vec(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != values.len() {
            return Err(Error::usage(format!(
                "shape {:?} needs {} values, got {}",
                shape,
                len,
                values.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            values,
        })
    }

    pub fn vector(values: Vec<f64>) -> Self {
        Tensor {
            shape: vec![values.len()],
            values,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Number of rows of a 2-d tensor (or length of a vector).
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// Number of columns of a 2-d tensor; 1 for vectors.
    pub fn cols(&self) -> usize {
        if self.shape.len() >= 2 {
            self.shape[1..].iter().product()
        } else {
            1
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.values[i * c..(i + 1) * c]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols() + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let c = self.cols();
        &mut self.values[i * c + j]
    }

    pub fn fill(&mut self, value: f64) {
        self.values.fill(value);
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// `out += m · x` for a row-major `rows × cols` matrix.
#[inline]
pub(crate) fn matvec_acc(m: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.len(), out.len() * cols);
    debug_assert_eq!(x.len(), cols);
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out += mᵀ · y` for a row-major `rows × cols` matrix.
#[inline]
pub(crate) fn matvec_t_acc(m: &[f64], cols: usize, y: &[f64], out: &mut [f64]) {
    debug_assert_eq!(out.len(), cols);
    for (yi, row) in y.iter().zip(m.chunks_exact(cols)) {
        if *yi != 0.0 {
            axpy(*yi, row, out);
        }
    }
}

/// `m += y ⊗ x` (rank-one update).
#[inline]
pub(crate) fn outer_acc(y: &[f64], x: &[f64], m: &mut [f64]) {
    let cols = x.len();
    for (yi, row) in y.iter().zip(m.chunks_exact_mut(cols)) {
        if *yi != 0.0 {
            axpy(*yi, x, row);
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators let the loop vectorize
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::from_vec(&[2, 3], (0..6).map(f64::from).collect()).unwrap();
        assert_eq!(t.row(1), &[3.0, 4.0, 5.0]);
        assert_eq!(t.at(0, 2), 2.0);
    }

    #[test]
    fn matvec_helpers_agree_with_loops() {
        let m: Vec<f64> = (0..6).map(|v| v as f64 - 2.5).collect();
        let x = [1.0, -2.0, 0.5];
        let mut out = [0.0; 2];
        matvec_acc(&m, 3, &x, &mut out);
        for r in 0..2 {
            let want: f64 = (0..3).map(|c| m[r * 3 + c] * x[c]).sum();
            assert!((out[r] - want).abs() < 1e-12);
        }
        let y = [0.3, -1.0];
        let mut back = [0.0; 3];
        matvec_t_acc(&m, 3, &y, &mut back);
        for c in 0..3 {
            let want: f64 = (0..2).map(|r| m[r * 3 + c] * y[r]).sum();
            assert!((back[c] - want).abs() < 1e-12);
        }
    }
}
