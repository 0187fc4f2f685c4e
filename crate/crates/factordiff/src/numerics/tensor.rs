//! Dense row-major f64 tensors and the raw compute kernels behind the graph.

use crate::error::{Error, Result};

/// Dense tensor: a shape and a row-major `f64` buffer.
///
/// Invariant: `data.len() == shape.iter().product()` and every entry is
/// finite. Construction through [`Tensor::from_vec`] enforces both; graph
/// operations re-check finiteness on their outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Build a tensor, validating length and finiteness.
    pub fn from_vec(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if data.len() != numel {
            return Err(Error::shape(format!(
                "data length {} does not match shape {:?} (numel {})",
                data.len(),
                shape,
                numel
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "non-finite entry {} at flat index {}",
                data[i], i
            )));
        }
        Ok(Tensor { shape, data })
    }

    /// Internal constructor for values produced by kernels that cannot
    /// introduce non-finite entries from finite inputs. Length is asserted.
    pub(crate) fn new_unchecked(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        Tensor { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; numel],
        }
    }

    pub fn scalar(v: f64) -> Result<Self> {
        Tensor::from_vec(vec![1], vec![v])
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::from_vec(vec![rows, cols], data)
    }

    pub fn vector(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Tensor::from_vec(vec![n], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Scalar value of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() != 1 {
            return Err(Error::shape(format!(
                "item() on tensor of shape {:?}",
                self.shape
            )));
        }
        Ok(self.data[0])
    }

    /// (rows, cols) of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Ok((*r, *c)),
            s => Err(Error::shape(format!("expected rank-2 tensor, got {:?}", s))),
        }
    }

    pub(crate) fn ensure_finite(&self) -> Result<()> {
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "non-finite entry {} at flat index {} (shape {:?})",
                self.data[i], i, self.shape
            )));
        }
        Ok(())
    }
}

// ---- raw kernels (fixed sequential summation order throughout) ----

/// C = A (m x k) * B (k x n), accumulated in i-k-j order.
pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    out.fill(0.0);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let o_row = &mut out[i * n..(i + 1) * n];
        for (kk, &aik) in a_row.iter().enumerate() {
            let b_row = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in o_row.iter_mut().zip(b_row) {
                *o += aik * bv;
            }
        }
    }
}

/// C = A (m x k) * B^T where B is (n x k).
pub(crate) fn matmul_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let o_row = &mut out[i * n..(i + 1) * n];
        for (j, o) in o_row.iter_mut().enumerate() {
            let b_row = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for (&av, &bv) in a_row.iter().zip(b_row) {
                acc += av * bv;
            }
            *o = acc;
        }
    }
}

/// C = A^T * B where A is (k x m), B is (k x n); C is (m x n).
pub(crate) fn matmul_tn(a: &[f64], b: &[f64], k: usize, m: usize, n: usize, out: &mut [f64]) {
    out.fill(0.0);
    for kk in 0..k {
        let a_row = &a[kk * m..(kk + 1) * m];
        let b_row = &b[kk * n..(kk + 1) * n];
        for (i, &av) in a_row.iter().enumerate() {
            let o_row = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in o_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Exact Gaussian-CDF GELU: x * Phi(x).
pub(crate) fn gelu(x: f64) -> f64 {
    x * 0.5 * (1.0 + statrs::function::erf::erf(x / SQRT_2))
}

/// Derivative of the Gaussian-CDF GELU: Phi(x) + x * phi(x).
pub(crate) fn gelu_grad(x: f64) -> f64 {
    let phi_cdf = 0.5 * (1.0 + statrs::function::erf::erf(x / SQRT_2));
    let phi_pdf = INV_SQRT_2PI * (-0.5 * x * x).exp();
    phi_cdf + x * phi_pdf
}

/// Row-wise softmax with max-subtraction; writes into `out`.
pub(crate) fn softmax_rows(x: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for r in 0..rows {
        let row = &x[r * cols..(r + 1) * cols];
        let o_row = &mut out[r * cols..(r + 1) * cols];
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (o, &v) in o_row.iter_mut().zip(row) {
            let e = (v - mx).exp();
            *o = e;
            sum += e;
        }
        for o in o_row.iter_mut() {
            *o /= sum;
        }
    }
}

/// Backward of row-wise softmax: dx = y .* (dy - rowsum(dy .* y)).
pub(crate) fn softmax_rows_backward(
    y: &[f64],
    dy: &[f64],
    rows: usize,
    cols: usize,
    dx: &mut [f64],
) {
    for r in 0..rows {
        let y_row = &y[r * cols..(r + 1) * cols];
        let dy_row = &dy[r * cols..(r + 1) * cols];
        let dx_row = &mut dx[r * cols..(r + 1) * cols];
        let mut dot = 0.0;
        for (&yv, &dv) in y_row.iter().zip(dy_row) {
            dot += yv * dv;
        }
        for ((o, &yv), &dv) in dx_row.iter_mut().zip(y_row).zip(dy_row) {
            *o = yv * (dv - dot);
        }
    }
}
