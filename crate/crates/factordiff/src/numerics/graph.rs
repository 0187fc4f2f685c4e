//! Reverse-mode automatic differentiation over an eagerly evaluated tape.
//!
//! Nodes are appended in topological order and forward values are computed
//! at insertion time, so reading any node's value is free and `backward`
//! is a single reverse sweep. Every kernel uses a fixed sequential
//! summation order, making graph evaluation deterministic.

use crate::error::{Error, Result};
use crate::numerics::tensor::{
    gelu, gelu_grad, matmul, matmul_nt, matmul_tn, softmax_rows, softmax_rows_backward, Tensor,
};

/// Handle to a node in a [`Graph`]. Only valid for the graph that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Softmax axis for rank-2 tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

/// Layer-norm stabilizer. Fixed; the adjoint assumes this exact constant.
pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
enum Op {
    Leaf { param: bool },
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddRowBroadcast(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Offset(NodeId),
    LayerNormRows(NodeId),
    Gelu(NodeId),
    Softmax(NodeId, Axis),
    Transpose(NodeId),
    Reshape(NodeId),
    ConcatCols(Vec<NodeId>),
    SliceCols(NodeId, usize, usize),
    SumAll(NodeId),
    MeanAll(NodeId),
    SquaredError(NodeId, NodeId),
    GroupedAttention {
        q: NodeId,
        k: NodeId,
        v: NodeId,
        group: usize,
    },
    RepeatRows(NodeId, usize),
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Gradients returned by [`Graph::backward`], indexed by node. Adjoint
/// shapes equal the corresponding forward-value shapes.
pub struct Gradients {
    adjoints: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Adjoint of a node, if it received one. Parameter leaves always do
    /// (unreachable parameters get explicit zeros).
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.adjoints.get(id.index()).and_then(|a| a.as_ref())
    }
}

/// Eagerly evaluated computation tape.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Forward value of a node.
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<NodeId> {
        value.ensure_finite()?;
        self.nodes.push(Node { op, value });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// Insert a non-parameter leaf (data, constants).
    pub fn input(&mut self, value: Tensor) -> Result<NodeId> {
        self.push(Op::Leaf { param: false }, value)
    }

    /// Insert a parameter leaf (gradient target).
    pub fn param(&mut self, value: Tensor) -> Result<NodeId> {
        self.push(Op::Leaf { param: true }, value)
    }

    fn val(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    // ---- kernel builders ----

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, ka) = self.val(a).dims2()?;
        let (kb, n) = self.val(b).dims2()?;
        if ka != kb {
            return Err(Error::shape(format!(
                "matmul inner dims differ: {ka} vs {kb}"
            )));
        }
        let mut out = vec![0.0; m * n];
        matmul(self.val(a).data(), self.val(b).data(), m, ka, n, &mut out);
        self.push(Op::MatMul(a, b), Tensor::new_unchecked(vec![m, n], out))
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.val(a).shape() != self.val(b).shape() {
            return Err(Error::shape(format!(
                "add shapes differ: {:?} vs {:?}",
                self.val(a).shape(),
                self.val(b).shape()
            )));
        }
        let out: Vec<f64> = self
            .val(a)
            .data()
            .iter()
            .zip(self.val(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.val(a).shape().to_vec();
        self.push(Op::Add(a, b), Tensor::new_unchecked(shape, out))
    }

    /// `a[r, c] + b[c]` with `b` broadcast across rows.
    pub fn add_row_broadcast(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (rows, cols) = self.val(a).dims2()?;
        if self.val(b).shape() != [cols] {
            return Err(Error::shape(format!(
                "broadcast vector shape {:?} does not match {cols} columns",
                self.val(b).shape()
            )));
        }
        let bd = self.val(b).data();
        let mut out = Vec::with_capacity(rows * cols);
        for row in self.val(a).data().chunks_exact(cols) {
            for (x, y) in row.iter().zip(bd) {
                out.push(x + y);
            }
        }
        self.push(
            Op::AddRowBroadcast(a, b),
            Tensor::new_unchecked(vec![rows, cols], out),
        )
    }

    /// Hadamard product of two same-shape tensors.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.val(a).shape() != self.val(b).shape() {
            return Err(Error::shape(format!(
                "mul shapes differ: {:?} vs {:?}",
                self.val(a).shape(),
                self.val(b).shape()
            )));
        }
        let out: Vec<f64> = self
            .val(a)
            .data()
            .iter()
            .zip(self.val(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.val(a).shape().to_vec();
        self.push(Op::Mul(a, b), Tensor::new_unchecked(shape, out))
    }

    /// Scalar multiple `c * a`.
    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        if !c.is_finite() {
            return Err(Error::numeric("scale by non-finite constant"));
        }
        let out: Vec<f64> = self.val(a).data().iter().map(|x| c * x).collect();
        let shape = self.val(a).shape().to_vec();
        self.push(Op::Scale(a, c), Tensor::new_unchecked(shape, out))
    }

    /// Scalar shift `a + c`.
    pub fn offset(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        if !c.is_finite() {
            return Err(Error::numeric("offset by non-finite constant"));
        }
        let out: Vec<f64> = self.val(a).data().iter().map(|x| x + c).collect();
        let shape = self.val(a).shape().to_vec();
        self.push(Op::Offset(a), Tensor::new_unchecked(shape, out))
    }

    /// Per-row layer normalization without learned affine:
    /// `(x - mean) / sqrt(var + eps)` with population variance.
    pub fn layer_norm_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let (rows, cols) = self.val(a).dims2()?;
        if cols == 0 {
            return Err(Error::shape("layer norm over zero columns"));
        }
        let x = self.val(a).data();
        let mut out = vec![0.0; rows * cols];
        for r in 0..rows {
            let row = &x[r * cols..(r + 1) * cols];
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for (o, &v) in out[r * cols..(r + 1) * cols].iter_mut().zip(row) {
                *o = (v - mean) * inv;
            }
        }
        self.push(
            Op::LayerNormRows(a),
            Tensor::new_unchecked(vec![rows, cols], out),
        )
    }

    /// Exact Gaussian-CDF GELU.
    pub fn gelu(&mut self, a: NodeId) -> Result<NodeId> {
        let out: Vec<f64> = self.val(a).data().iter().map(|&x| gelu(x)).collect();
        let shape = self.val(a).shape().to_vec();
        self.push(Op::Gelu(a), Tensor::new_unchecked(shape, out))
    }

    /// Softmax along the declared axis of a rank-2 tensor.
    pub fn softmax(&mut self, a: NodeId, axis: Axis) -> Result<NodeId> {
        let (rows, cols) = self.val(a).dims2()?;
        let x = self.val(a).data();
        let mut out = vec![0.0; rows * cols];
        match axis {
            Axis::Rows => softmax_rows(x, rows, cols, &mut out),
            Axis::Cols => {
                let xt = transpose_buf(x, rows, cols);
                let mut yt = vec![0.0; rows * cols];
                softmax_rows(&xt, cols, rows, &mut yt);
                out = transpose_buf(&yt, cols, rows);
            }
        }
        self.push(
            Op::Softmax(a, axis),
            Tensor::new_unchecked(vec![rows, cols], out),
        )
    }

    /// Transpose of a rank-2 tensor.
    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let (rows, cols) = self.val(a).dims2()?;
        let out = transpose_buf(self.val(a).data(), rows, cols);
        self.push(
            Op::Transpose(a),
            Tensor::new_unchecked(vec![cols, rows], out),
        )
    }

    /// Reinterpret the buffer under a new shape of equal element count.
    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let numel: usize = shape.iter().product();
        if numel != self.val(a).numel() {
            return Err(Error::shape(format!(
                "reshape {:?} -> {:?} changes element count",
                self.val(a).shape(),
                shape
            )));
        }
        let data = self.val(a).data().to_vec();
        self.push(Op::Reshape(a), Tensor::new_unchecked(shape, data))
    }

    /// Column-wise concatenation of rank-2 tensors with equal row counts.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::shape("concat of zero tensors"));
        }
        let (rows, _) = self.val(parts[0]).dims2()?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.val(p).dims2()?;
            if r != rows {
                return Err(Error::shape(format!(
                    "concat row counts differ: {rows} vs {r}"
                )));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = vec![0.0; rows * total];
        let mut col0 = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let src = self.val(p).data();
            for r in 0..rows {
                out[r * total + col0..r * total + col0 + w]
                    .copy_from_slice(&src[r * w..(r + 1) * w]);
            }
            col0 += w;
        }
        self.push(
            Op::ConcatCols(parts.to_vec()),
            Tensor::new_unchecked(vec![rows, total], out),
        )
    }

    /// Columns `[start, end)` of a rank-2 tensor.
    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let (rows, cols) = self.val(a).dims2()?;
        if start >= end || end > cols {
            return Err(Error::shape(format!(
                "column slice {start}..{end} out of range for {cols} columns"
            )));
        }
        let w = end - start;
        let src = self.val(a).data();
        let mut out = Vec::with_capacity(rows * w);
        for r in 0..rows {
            out.extend_from_slice(&src[r * cols + start..r * cols + end]);
        }
        self.push(
            Op::SliceCols(a, start, end),
            Tensor::new_unchecked(vec![rows, w], out),
        )
    }

    /// Sum of all entries, as a one-element tensor.
    pub fn sum_all(&mut self, a: NodeId) -> Result<NodeId> {
        let s: f64 = self.val(a).data().iter().sum();
        self.push(Op::SumAll(a), Tensor::new_unchecked(vec![1], vec![s]))
    }

    /// Mean of all entries, as a one-element tensor.
    pub fn mean_all(&mut self, a: NodeId) -> Result<NodeId> {
        let n = self.val(a).numel();
        if n == 0 {
            return Err(Error::shape("mean of empty tensor"));
        }
        let s: f64 = self.val(a).data().iter().sum::<f64>() / n as f64;
        self.push(Op::MeanAll(a), Tensor::new_unchecked(vec![1], vec![s]))
    }

    /// Sum of squared differences, as a one-element tensor.
    pub fn squared_error(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.val(a).shape() != self.val(b).shape() {
            return Err(Error::shape(format!(
                "squared_error shapes differ: {:?} vs {:?}",
                self.val(a).shape(),
                self.val(b).shape()
            )));
        }
        let s: f64 = self
            .val(a)
            .data()
            .iter()
            .zip(self.val(b).data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        self.push(
            Op::SquaredError(a, b),
            Tensor::new_unchecked(vec![1], vec![s]),
        )
    }

    /// Scaled dot-product attention applied independently within each
    /// consecutive block of `group` rows: `softmax(Q K^T / sqrt(dk)) V`
    /// per block. Rows from different blocks never interact, so a batch of
    /// stacked token sets evaluates exactly as the per-set computation.
    pub fn grouped_attention(
        &mut self,
        q: NodeId,
        k: NodeId,
        v: NodeId,
        group: usize,
    ) -> Result<NodeId> {
        let (rows, dk) = self.val(q).dims2()?;
        if self.val(k).shape() != [rows, dk] || self.val(v).shape() != [rows, dk] {
            return Err(Error::shape(
                "grouped_attention expects Q, K, V of identical shape",
            ));
        }
        if group == 0 || rows % group != 0 {
            return Err(Error::shape(format!(
                "row count {rows} not divisible by group size {group}"
            )));
        }
        let scale = 1.0 / (dk as f64).sqrt();
        let (qd, kd, vd) = (self.val(q).data(), self.val(k).data(), self.val(v).data());
        let mut out = vec![0.0; rows * dk];
        let mut scores = vec![0.0; group * group];
        let mut probs = vec![0.0; group * group];
        for g in 0..rows / group {
            let span = g * group * dk..(g + 1) * group * dk;
            let (qg, kg, vg) = (&qd[span.clone()], &kd[span.clone()], &vd[span.clone()]);
            matmul_nt(qg, kg, group, dk, group, &mut scores);
            for s in scores.iter_mut() {
                *s *= scale;
            }
            softmax_rows(&scores, group, group, &mut probs);
            matmul(&probs, vg, group, group, dk, &mut out[span]);
        }
        self.push(
            Op::GroupedAttention { q, k, v, group },
            Tensor::new_unchecked(vec![rows, dk], out),
        )
    }

    /// Repeat each row `times` times: `[r, c] -> [r * times, c]`.
    pub fn repeat_rows(&mut self, a: NodeId, times: usize) -> Result<NodeId> {
        if times == 0 {
            return Err(Error::shape("repeat_rows with zero repeats"));
        }
        let (rows, cols) = self.val(a).dims2()?;
        let src = self.val(a).data();
        let mut out = Vec::with_capacity(rows * times * cols);
        for r in 0..rows {
            let row = &src[r * cols..(r + 1) * cols];
            for _ in 0..times {
                out.extend_from_slice(row);
            }
        }
        self.push(
            Op::RepeatRows(a, times),
            Tensor::new_unchecked(vec![rows * times, cols], out),
        )
    }

    // ---- backward ----

    /// Reverse sweep from a scalar loss node. Returns adjoints for every
    /// reached node; parameter leaves the loss does not reach receive
    /// explicit zero adjoints.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.val(loss).numel() != 1 {
            return Err(Error::shape(format!(
                "backward requires a scalar loss node, got shape {:?}",
                self.val(loss).shape()
            )));
        }
        // Flat adjoint buffers, one per node; shaped on exit.
        let mut adj: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let dy = match adj[idx].clone() {
                Some(buf) => buf,
                None => continue,
            };
            match &self.nodes[idx].op {
                Op::Leaf { .. } => {}
                Op::MatMul(a, b) => {
                    let (m, k) = self.val(*a).dims2()?;
                    let n = self.val(*b).dims2()?.1;
                    let mut da = vec![0.0; m * k];
                    matmul_nt(&dy, self.val(*b).data(), m, n, k, &mut da);
                    let mut db = vec![0.0; k * n];
                    matmul_tn(self.val(*a).data(), &dy, m, k, n, &mut db);
                    accumulate(&mut adj, *a, &da);
                    accumulate(&mut adj, *b, &db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj, *a, &dy);
                    accumulate(&mut adj, *b, &dy);
                }
                Op::AddRowBroadcast(a, b) => {
                    accumulate(&mut adj, *a, &dy);
                    let cols = self.val(*b).numel();
                    let mut db = vec![0.0; cols];
                    for row in dy.chunks_exact(cols) {
                        for (o, &v) in db.iter_mut().zip(row) {
                            *o += v;
                        }
                    }
                    accumulate(&mut adj, *b, &db);
                }
                Op::Mul(a, b) => {
                    let da: Vec<f64> = dy
                        .iter()
                        .zip(self.val(*b).data())
                        .map(|(d, x)| d * x)
                        .collect();
                    let db: Vec<f64> = dy
                        .iter()
                        .zip(self.val(*a).data())
                        .map(|(d, x)| d * x)
                        .collect();
                    accumulate(&mut adj, *a, &da);
                    accumulate(&mut adj, *b, &db);
                }
                Op::Scale(a, c) => {
                    let da: Vec<f64> = dy.iter().map(|d| d * c).collect();
                    accumulate(&mut adj, *a, &da);
                }
                Op::Offset(a) => {
                    accumulate(&mut adj, *a, &dy);
                }
                Op::LayerNormRows(a) => {
                    let (rows, cols) = self.val(*a).dims2()?;
                    let x = self.val(*a).data();
                    let mut da = vec![0.0; rows * cols];
                    for r in 0..rows {
                        let row = &x[r * cols..(r + 1) * cols];
                        let g = &dy[r * cols..(r + 1) * cols];
                        let mean = row.iter().sum::<f64>() / cols as f64;
                        let var =
                            row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
                        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                        let mut g_mean = 0.0;
                        let mut gx_mean = 0.0;
                        for (&gv, &xv) in g.iter().zip(row) {
                            g_mean += gv;
                            gx_mean += gv * (xv - mean) * inv;
                        }
                        g_mean /= cols as f64;
                        gx_mean /= cols as f64;
                        for ((o, &gv), &xv) in
                            da[r * cols..(r + 1) * cols].iter_mut().zip(g).zip(row)
                        {
                            let xh = (xv - mean) * inv;
                            *o = inv * (gv - g_mean - xh * gx_mean);
                        }
                    }
                    accumulate(&mut adj, *a, &da);
                }
                Op::Gelu(a) => {
                    let da: Vec<f64> = dy
                        .iter()
                        .zip(self.val(*a).data())
                        .map(|(d, &x)| d * gelu_grad(x))
                        .collect();
                    accumulate(&mut adj, *a, &da);
                }
                Op::Softmax(a, axis) => {
                    let (rows, cols) = self.val(*a).dims2()?;
                    let y = self.nodes[idx].value.data();
                    let mut da = vec![0.0; rows * cols];
                    match axis {
                        Axis::Rows => softmax_rows_backward(y, &dy, rows, cols, &mut da),
                        Axis::Cols => {
                            let yt = transpose_buf(y, rows, cols);
                            let dyt = transpose_buf(&dy, rows, cols);
                            let mut dat = vec![0.0; rows * cols];
                            softmax_rows_backward(&yt, &dyt, cols, rows, &mut dat);
                            da = transpose_buf(&dat, cols, rows);
                        }
                    }
                    accumulate(&mut adj, *a, &da);
                }
                Op::Transpose(a) => {
                    let (arows, acols) = self.val(*a).dims2()?;
                    // dy is laid out as [acols, arows]; transpose back.
                    let _ = arows;
                    let da = transpose_buf(&dy, acols, arows);
                    accumulate(&mut adj, *a, &da);
                }
                Op::Reshape(a) => {
                    accumulate(&mut adj, *a, &dy);
                }
                Op::ConcatCols(parts) => {
                    let (rows, total) = self.nodes[idx].value.dims2()?;
                    let mut col0 = 0;
                    for &p in parts {
                        let w = self.val(p).dims2()?.1;
                        let mut dp = vec![0.0; rows * w];
                        for r in 0..rows {
                            dp[r * w..(r + 1) * w]
                                .copy_from_slice(&dy[r * total + col0..r * total + col0 + w]);
                        }
                        accumulate(&mut adj, p, &dp);
                        col0 += w;
                    }
                }
                Op::SliceCols(a, start, end) => {
                    let (rows, cols) = self.val(*a).dims2()?;
                    let w = end - start;
                    let mut da = vec![0.0; rows * cols];
                    for r in 0..rows {
                        da[r * cols + start..r * cols + end]
                            .copy_from_slice(&dy[r * w..(r + 1) * w]);
                    }
                    accumulate(&mut adj, *a, &da);
                }
                Op::SumAll(a) => {
                    let da = vec![dy[0]; self.val(*a).numel()];
                    accumulate(&mut adj, *a, &da);
                }
                Op::MeanAll(a) => {
                    let n = self.val(*a).numel();
                    let da = vec![dy[0] / n as f64; n];
                    accumulate(&mut adj, *a, &da);
                }
                Op::SquaredError(a, b) => {
                    let g = dy[0];
                    let da: Vec<f64> = self
                        .val(*a)
                        .data()
                        .iter()
                        .zip(self.val(*b).data())
                        .map(|(x, y)| 2.0 * g * (x - y))
                        .collect();
                    let db: Vec<f64> = da.iter().map(|v| -v).collect();
                    accumulate(&mut adj, *a, &da);
                    accumulate(&mut adj, *b, &db);
                }
                Op::GroupedAttention { q, k, v, group } => {
                    let (rows, dk) = self.val(*q).dims2()?;
                    let scale = 1.0 / (dk as f64).sqrt();
                    let (qd, kd, vd) = (
                        self.val(*q).data(),
                        self.val(*k).data(),
                        self.val(*v).data(),
                    );
                    let g = *group;
                    let mut dq = vec![0.0; rows * dk];
                    let mut dkm = vec![0.0; rows * dk];
                    let mut dv = vec![0.0; rows * dk];
                    let mut scores = vec![0.0; g * g];
                    let mut probs = vec![0.0; g * g];
                    let mut dprobs = vec![0.0; g * g];
                    let mut dscores = vec![0.0; g * g];
                    for gi in 0..rows / g {
                        let span = gi * g * dk..(gi + 1) * g * dk;
                        let (qg, kg, vg) =
                            (&qd[span.clone()], &kd[span.clone()], &vd[span.clone()]);
                        let dyg = &dy[span.clone()];
                        // Recompute the block's attention probabilities.
                        matmul_nt(qg, kg, g, dk, g, &mut scores);
                        for s in scores.iter_mut() {
                            *s *= scale;
                        }
                        softmax_rows(&scores, g, g, &mut probs);
                        // dV = A^T dY
                        matmul_tn(&probs, dyg, g, g, dk, &mut dv[span.clone()]);
                        // dA = dY V^T
                        matmul_nt(dyg, vg, g, dk, g, &mut dprobs);
                        softmax_rows_backward(&probs, &dprobs, g, g, &mut dscores);
                        for s in dscores.iter_mut() {
                            *s *= scale;
                        }
                        // dQ = dS K, dK = dS^T Q
                        matmul(&dscores, kg, g, g, dk, &mut dq[span.clone()]);
                        matmul_tn(&dscores, qg, g, g, dk, &mut dkm[span]);
                    }
                    accumulate(&mut adj, *q, &dq);
                    accumulate(&mut adj, *k, &dkm);
                    accumulate(&mut adj, *v, &dv);
                }
                Op::RepeatRows(a, times) => {
                    let (rows, cols) = self.val(*a).dims2()?;
                    let mut da = vec![0.0; rows * cols];
                    for r in 0..rows {
                        for t in 0..*times {
                            let src = &dy[(r * times + t) * cols..(r * times + t + 1) * cols];
                            for (o, &v) in da[r * cols..(r + 1) * cols].iter_mut().zip(src) {
                                *o += v;
                            }
                        }
                    }
                    accumulate(&mut adj, *a, &da);
                }
            }
        }

        // Shape the buffers; unreached parameter leaves get explicit zeros.
        let mut shaped: Vec<Option<Tensor>> = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter().enumerate() {
            let t = match adj[i].take() {
                Some(buf) => Some(Tensor::new_unchecked(node.value.shape().to_vec(), buf)),
                None if matches!(node.op, Op::Leaf { param: true }) => {
                    Some(Tensor::zeros(node.value.shape().to_vec()))
                }
                None => None,
            };
            shaped.push(t);
        }
        Ok(Gradients { adjoints: shaped })
    }
}

fn accumulate(adj: &mut [Option<Vec<f64>>], id: NodeId, grad: &[f64]) {
    match &mut adj[id.0] {
        Some(buf) => {
            for (o, &v) in buf.iter_mut().zip(grad) {
                *o += v;
            }
        }
        None => adj[id.0] = Some(grad.to_vec()),
    }
}

fn transpose_buf(x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = x[r * cols + c];
        }
    }
    out
}
