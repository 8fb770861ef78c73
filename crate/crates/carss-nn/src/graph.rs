//! Eager computation tape with reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so parents always precede
//! children and a single reverse sweep propagates gradients. Values are
//! computed at op-construction time; `backward` walks the tape once and
//! returns per-node gradients for the leaves that require them.

use crate::error::{NnError, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use std::rc::Rc;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Boolean keep-mask over attention scores or logits. `true` entries stay,
/// `false` entries receive probability exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    keep: Vec<bool>,
}

impl Mask {
    pub fn new(rows: usize, cols: usize, keep: Vec<bool>) -> Result<Self> {
        if keep.len() != rows * cols {
            return Err(NnError::ShapeMismatch {
                op: "mask",
                details: format!("{} flags for {rows}x{cols}", keep.len()),
            });
        }
        Ok(Self { rows, cols, keep })
    }

    pub fn all(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            keep: vec![true; rows * cols],
        }
    }

    /// A single row-mask broadcast over `rows` query rows.
    pub fn broadcast_row(rows: usize, keep_row: &[bool]) -> Self {
        let cols = keep_row.len();
        let mut keep = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            keep.extend_from_slice(keep_row);
        }
        Self { rows, cols, keep }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn keep(&self, r: usize, c: usize) -> bool {
        self.keep[r * self.cols + c]
    }
}

enum Op {
    Leaf { requires_grad: bool },
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    MulElem(Var, Var),
    Tanh(Var),
    Relu(Var),
    Ln(Var),
    MaskedSoftmax(Var, Rc<Mask>),
    LayerNorm { x: Var, gamma: Var, beta: Var },
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    GatherRows(Var, Rc<[usize]>),
    RowsMean(Var, Rc<[usize]>),
    Entry(Var, usize, usize),
    AddN(Vec<Var>),
}

struct Node<T> {
    op: Op,
    value: Tensor<T>,
    needs_grad: bool,
}

/// Gradients keyed by node id after a `backward` pass.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of the loss w.r.t. `v`, if any path reached it.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

const LN_EPS: f64 = 1e-5;

pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(
            Op::Leaf {
                requires_grad: true,
            },
            value,
            true,
        )
    }

    /// Non-trainable leaf (inputs, detached constants).
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(
            Op::Leaf {
                requires_grad: false,
            },
            value,
            false,
        )
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ar, ac) = self.value(a).shape();
        let (br, bc) = self.value(b).shape();
        if ac != br {
            return Err(NnError::ShapeMismatch {
                op: "matmul",
                details: format!("{ar}x{ac} * {br}x{bc}"),
            });
        }
        let value = self.value(a).matmul(self.value(b));
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::MatMul(a, b), value, needs))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        let needs = self.needs(a);
        self.push(Op::Transpose(a), value, needs)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(NnError::ShapeMismatch {
                op: "add",
                details: format!("{:?} + {:?}", self.value(a).shape(), self.value(b).shape()),
            });
        }
        let mut value = self.value(a).clone();
        value.add_scaled(self.value(b), T::ONE);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Add(a, b), value, needs))
    }

    /// Broadcast-add a `1 x n` row to every row of an `m x n` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (_, ac) = self.value(a).shape();
        let (rr, rc) = self.value(row).shape();
        if rr != 1 || rc != ac {
            return Err(NnError::ShapeMismatch {
                op: "add_row",
                details: format!("{:?} + {rr}x{rc}", self.value(a).shape()),
            });
        }
        let mut value = self.value(a).clone();
        for r in 0..value.rows() {
            let base = self.nodes[row.0].value.row(0);
            for (c, v) in value.row_mut(r).iter_mut().enumerate() {
                *v = *v + base[c];
            }
        }
        let needs = self.needs(a) || self.needs(row);
        Ok(self.push(Op::AddRow(a, row), value, needs))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let k = T::from_f64(c);
        let value = self.value(a).map(|v| v * k);
        let needs = self.needs(a);
        self.push(Op::Scale(a, c), value, needs)
    }

    pub fn mul_elem(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(NnError::ShapeMismatch {
                op: "mul_elem",
                details: format!("{:?} * {:?}", self.value(a).shape(), self.value(b).shape()),
            });
        }
        let (rows, cols) = self.value(a).shape();
        let mut value = Tensor::zeros(rows, cols);
        for (o, (x, y)) in value
            .data_mut()
            .iter_mut()
            .zip(self.nodes[a.0].value.data().iter().zip(self.nodes[b.0].value.data()))
        {
            *o = *x * *y;
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Op::MulElem(a, b), value, needs))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.tanh());
        let needs = self.needs(a);
        self.push(Op::Tanh(a), value, needs)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.max_s(T::ZERO));
        let needs = self.needs(a);
        self.push(Op::Relu(a), value, needs)
    }

    /// Elementwise natural log. Errors on non-positive entries, which in
    /// the policies indicate selecting a masked action upstream.
    pub fn ln(&mut self, a: Var) -> Result<Var> {
        for &v in self.value(a).data() {
            if v.partial_cmp(&T::ZERO) != Some(std::cmp::Ordering::Greater) {
                return Err(NnError::NonPositiveLog { value: v.to_f64() });
            }
        }
        let value = self.value(a).map(|v| v.ln());
        let needs = self.needs(a);
        Ok(self.push(Op::Ln(a), value, needs))
    }

    /// Bounded logits `C * tanh(x)`.
    pub fn clipped_logits(&mut self, a: Var, c: f64) -> Var {
        let t = self.tanh(a);
        self.scale(t, c)
    }

    /// Row-wise softmax with masked entries receiving probability exactly
    /// zero. A fully masked row is an upstream bug and errors out.
    pub fn masked_softmax(&mut self, a: Var, mask: &Mask) -> Result<Var> {
        let (rows, cols) = self.value(a).shape();
        if mask.shape() != (rows, cols) {
            return Err(NnError::ShapeMismatch {
                op: "masked_softmax",
                details: format!("logits {rows}x{cols}, mask {:?}", mask.shape()),
            });
        }
        let mut value = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut max = T::neg_infinity();
            for c in 0..cols {
                if mask.keep(r, c) {
                    max = max.max_s(self.value(a).get(r, c));
                }
            }
            if max == T::neg_infinity() {
                return Err(NnError::FullyMaskedRow { row: r });
            }
            let mut sum = T::ZERO;
            for c in 0..cols {
                if mask.keep(r, c) {
                    let e = (self.value(a).get(r, c) - max).exp();
                    value.set(r, c, e);
                    sum = sum + e;
                }
            }
            for c in 0..cols {
                let v = value.get(r, c);
                value.set(r, c, v / sum);
            }
        }
        let needs = self.needs(a);
        Ok(self.push(Op::MaskedSoftmax(a, Rc::new(mask.clone())), value, needs))
    }

    /// Unmasked row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let (rows, cols) = self.value(a).shape();
        self.masked_softmax(a, &Mask::all(rows, cols))
    }

    /// Row-wise layer normalization with trainable gain and bias (`1 x n`).
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let (rows, cols) = self.value(x).shape();
        if self.value(gamma).shape() != (1, cols) || self.value(beta).shape() != (1, cols) {
            return Err(NnError::ShapeMismatch {
                op: "layer_norm",
                details: format!(
                    "x {rows}x{cols}, gamma {:?}, beta {:?}",
                    self.value(gamma).shape(),
                    self.value(beta).shape()
                ),
            });
        }
        let eps = T::from_f64(LN_EPS);
        let denom = T::from_f64(cols as f64);
        let mut value = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let row = self.value(x).row(r);
            let mean = row.iter().copied().sum::<T>() / denom;
            let var = row
                .iter()
                .map(|&v| (v - mean) * (v - mean))
                .sum::<T>()
                / denom;
            let inv = T::ONE / (var + eps).sqrt();
            for (c, &xc) in row.iter().enumerate() {
                let xhat = (xc - mean) * inv;
                let g = self.value(gamma).get(0, c);
                let b = self.value(beta).get(0, c);
                value.set(r, c, g * xhat + b);
            }
        }
        let needs = self.needs(x) || self.needs(gamma) || self.needs(beta);
        Ok(self.push(Op::LayerNorm { x, gamma, beta }, value, needs))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(NnError::ShapeMismatch {
                op: "concat_rows",
                details: "no parts".into(),
            });
        }
        let cols = self.value(parts[0]).cols();
        let mut rows = 0;
        for &p in parts {
            if self.value(p).cols() != cols {
                return Err(NnError::ShapeMismatch {
                    op: "concat_rows",
                    details: "column widths differ".into(),
                });
            }
            rows += self.value(p).rows();
        }
        let mut value = Tensor::zeros(rows, cols);
        let mut r0 = 0;
        for &p in parts {
            for r in 0..self.value(p).rows() {
                let src: Vec<T> = self.value(p).row(r).to_vec();
                value.row_mut(r0 + r).copy_from_slice(&src);
            }
            r0 += self.value(p).rows();
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(Op::ConcatRows(parts.to_vec()), value, needs))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(NnError::ShapeMismatch {
                op: "concat_cols",
                details: "no parts".into(),
            });
        }
        let rows = self.value(parts[0]).rows();
        let mut cols = 0;
        for &p in parts {
            if self.value(p).rows() != rows {
                return Err(NnError::ShapeMismatch {
                    op: "concat_cols",
                    details: "row counts differ".into(),
                });
            }
            cols += self.value(p).cols();
        }
        let mut value = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut c0 = 0;
            for &p in parts {
                let pc = self.value(p).cols();
                let src: Vec<T> = self.value(p).row(r).to_vec();
                value.row_mut(r)[c0..c0 + pc].copy_from_slice(&src);
                c0 += pc;
            }
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(Op::ConcatCols(parts.to_vec()), value, needs))
    }

    /// Output row `j` is input row `indices[j]`; rows may repeat.
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let (rows, cols) = self.value(a).shape();
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(NnError::ShapeMismatch {
                op: "gather_rows",
                details: format!("row {bad} out of {rows}"),
            });
        }
        let mut value = Tensor::zeros(indices.len(), cols);
        for (j, &i) in indices.iter().enumerate() {
            let src: Vec<T> = self.value(a).row(i).to_vec();
            value.row_mut(j).copy_from_slice(&src);
        }
        let needs = self.needs(a);
        Ok(self.push(Op::GatherRows(a, indices.into()), value, needs))
    }

    /// Mean of the selected rows as a `1 x n` vector.
    pub fn rows_mean(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let (rows, cols) = self.value(a).shape();
        if indices.is_empty() {
            return Err(NnError::ShapeMismatch {
                op: "rows_mean",
                details: "no rows selected".into(),
            });
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(NnError::ShapeMismatch {
                op: "rows_mean",
                details: format!("row {bad} out of {rows}"),
            });
        }
        let inv = T::from_f64(1.0 / indices.len() as f64);
        let mut value = Tensor::zeros(1, cols);
        for &i in indices.iter() {
            let src: Vec<T> = self.value(a).row(i).to_vec();
            for (o, v) in value.row_mut(0).iter_mut().zip(src) {
                *o = *o + v * inv;
            }
        }
        let needs = self.needs(a);
        Ok(self.push(Op::RowsMean(a, indices.into()), value, needs))
    }

    /// Single entry as a `1 x 1` tensor.
    pub fn entry(&mut self, a: Var, r: usize, c: usize) -> Result<Var> {
        let (rows, cols) = self.value(a).shape();
        if r >= rows || c >= cols {
            return Err(NnError::ShapeMismatch {
                op: "entry",
                details: format!("({r},{c}) out of {rows}x{cols}"),
            });
        }
        let value = Tensor::scalar(self.value(a).get(r, c));
        let needs = self.needs(a);
        Ok(self.push(Op::Entry(a, r, c), value, needs))
    }

    /// Sum of same-shaped tensors.
    pub fn add_n(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(NnError::ShapeMismatch {
                op: "add_n",
                details: "no parts".into(),
            });
        }
        let shape = self.value(parts[0]).shape();
        let mut value = Tensor::zeros(shape.0, shape.1);
        for &p in parts {
            if self.value(p).shape() != shape {
                return Err(NnError::ShapeMismatch {
                    op: "add_n",
                    details: "shapes differ".into(),
                });
            }
            value.add_scaled(self.value(p), T::ONE);
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(Op::AddN(parts.to_vec()), value, needs))
    }

    /// Reverse sweep from a scalar loss. Returns gradients for every node
    /// that requires them (leaves created with [`Graph::param`], plus
    /// intermediates on a path to one).
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let (r, c) = self.value(loss).shape();
        if (r, c) != (1, 1) {
            return Err(NnError::NonScalarLoss { rows: r, cols: c });
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(T::ONE));

        for id in (0..=loss.0).rev() {
            if !self.nodes[id].needs_grad {
                grads[id] = None;
                continue;
            }
            let Some(g) = grads[id].take() else {
                continue;
            };
            self.scatter(id, &g, &mut grads);
            if matches!(self.nodes[id].op, Op::Leaf { requires_grad: true }) {
                grads[id] = Some(g);
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, delta: Tensor<T>) {
        if !self.needs(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(g) => g.add_scaled(&delta, T::ONE),
            slot @ None => *slot = Some(delta),
        }
    }

    fn scatter(&self, id: usize, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        match &self.nodes[id].op {
            Op::Leaf { .. } => {}
            Op::MatMul(a, b) => {
                // dA = G * B^T ; dB = A^T * G
                if self.needs(*a) {
                    let bt = self.value(*b).transpose();
                    self.accumulate(grads, *a, g.matmul(&bt));
                }
                if self.needs(*b) {
                    let at = self.value(*a).transpose();
                    self.accumulate(grads, *b, at.matmul(g));
                }
            }
            Op::Transpose(a) => self.accumulate(grads, *a, g.transpose()),
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::AddRow(a, row) => {
                self.accumulate(grads, *a, g.clone());
                if self.needs(*row) {
                    let mut d = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for c in 0..g.cols() {
                            let v = d.get(0, c) + g.get(r, c);
                            d.set(0, c, v);
                        }
                    }
                    self.accumulate(grads, *row, d);
                }
            }
            Op::Scale(a, c) => {
                let k = T::from_f64(*c);
                self.accumulate(grads, *a, g.map(|v| v * k));
            }
            Op::MulElem(a, b) => {
                if self.needs(*a) {
                    let mut d = g.clone();
                    for (x, &y) in d.data_mut().iter_mut().zip(self.value(*b).data()) {
                        *x = *x * y;
                    }
                    self.accumulate(grads, *a, d);
                }
                if self.needs(*b) {
                    let mut d = g.clone();
                    for (x, &y) in d.data_mut().iter_mut().zip(self.value(*a).data()) {
                        *x = *x * y;
                    }
                    self.accumulate(grads, *b, d);
                }
            }
            Op::Tanh(a) => {
                let y = &self.nodes[id].value;
                let mut d = g.clone();
                for (x, &t) in d.data_mut().iter_mut().zip(y.data()) {
                    *x = *x * (T::ONE - t * t);
                }
                self.accumulate(grads, *a, d);
            }
            Op::Relu(a) => {
                let mut d = g.clone();
                for (x, &v) in d.data_mut().iter_mut().zip(self.value(*a).data()) {
                    if v.partial_cmp(&T::ZERO) != Some(std::cmp::Ordering::Greater) {
                        *x = T::ZERO;
                    }
                }
                self.accumulate(grads, *a, d);
            }
            Op::Ln(a) => {
                let mut d = g.clone();
                for (x, &v) in d.data_mut().iter_mut().zip(self.value(*a).data()) {
                    *x = *x / v;
                }
                self.accumulate(grads, *a, d);
            }
            Op::MaskedSoftmax(a, _mask) => {
                // dx_j = y_j * (g_j - sum_i g_i y_i); masked y are 0.
                let y = &self.nodes[id].value;
                let (rows, cols) = y.shape();
                let mut d = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    let mut dot = T::ZERO;
                    for c in 0..cols {
                        dot = dot + g.get(r, c) * y.get(r, c);
                    }
                    for c in 0..cols {
                        d.set(r, c, y.get(r, c) * (g.get(r, c) - dot));
                    }
                }
                self.accumulate(grads, *a, d);
            }
            Op::LayerNorm { x, gamma, beta } => {
                let (rows, cols) = self.value(*x).shape();
                let eps = T::from_f64(LN_EPS);
                let denom = T::from_f64(cols as f64);
                let mut dx = Tensor::zeros(rows, cols);
                let mut dgamma = Tensor::zeros(1, cols);
                let mut dbeta = Tensor::zeros(1, cols);
                for r in 0..rows {
                    let row = self.value(*x).row(r);
                    let mean = row.iter().copied().sum::<T>() / denom;
                    let var = row
                        .iter()
                        .map(|&v| (v - mean) * (v - mean))
                        .sum::<T>()
                        / denom;
                    let inv = T::ONE / (var + eps).sqrt();
                    // dxhat, plus gamma/beta accumulation
                    let mut dxhat = vec![T::ZERO; cols];
                    let mut mean_dxhat = T::ZERO;
                    let mut mean_dxhat_xhat = T::ZERO;
                    for c in 0..cols {
                        let xhat = (row[c] - mean) * inv;
                        let gr = g.get(r, c);
                        dgamma.set(0, c, dgamma.get(0, c) + gr * xhat);
                        dbeta.set(0, c, dbeta.get(0, c) + gr);
                        let dh = gr * self.value(*gamma).get(0, c);
                        dxhat[c] = dh;
                        mean_dxhat = mean_dxhat + dh / denom;
                        mean_dxhat_xhat = mean_dxhat_xhat + dh * xhat / denom;
                    }
                    for c in 0..cols {
                        let xhat = (row[c] - mean) * inv;
                        dx.set(
                            r,
                            c,
                            inv * (dxhat[c] - mean_dxhat - xhat * mean_dxhat_xhat),
                        );
                    }
                }
                self.accumulate(grads, *x, dx);
                self.accumulate(grads, *gamma, dgamma);
                self.accumulate(grads, *beta, dbeta);
            }
            Op::ConcatRows(parts) => {
                let mut r0 = 0;
                for &p in parts {
                    let pr = self.value(p).rows();
                    if self.needs(p) {
                        let mut d = Tensor::zeros(pr, g.cols());
                        for r in 0..pr {
                            let src: Vec<T> = g.row(r0 + r).to_vec();
                            d.row_mut(r).copy_from_slice(&src);
                        }
                        self.accumulate(grads, p, d);
                    }
                    r0 += pr;
                }
            }
            Op::ConcatCols(parts) => {
                let mut c0 = 0;
                for &p in parts {
                    let pc = self.value(p).cols();
                    if self.needs(p) {
                        let mut d = Tensor::zeros(g.rows(), pc);
                        for r in 0..g.rows() {
                            for c in 0..pc {
                                d.set(r, c, g.get(r, c0 + c));
                            }
                        }
                        self.accumulate(grads, p, d);
                    }
                    c0 += pc;
                }
            }
            Op::GatherRows(a, indices) => {
                let (rows, cols) = self.value(*a).shape();
                let mut d = Tensor::zeros(rows, cols);
                for (j, &i) in indices.iter().enumerate() {
                    for c in 0..cols {
                        d.set(i, c, d.get(i, c) + g.get(j, c));
                    }
                }
                self.accumulate(grads, *a, d);
            }
            Op::RowsMean(a, indices) => {
                let (rows, cols) = self.value(*a).shape();
                let inv = T::from_f64(1.0 / indices.len() as f64);
                let mut d = Tensor::zeros(rows, cols);
                for &i in indices.iter() {
                    for c in 0..cols {
                        d.set(i, c, d.get(i, c) + g.get(0, c) * inv);
                    }
                }
                self.accumulate(grads, *a, d);
            }
            Op::Entry(a, r, c) => {
                let (rows, cols) = self.value(*a).shape();
                let mut d = Tensor::zeros(rows, cols);
                d.set(*r, *c, g.item());
                self.accumulate(grads, *a, d);
            }
            Op::AddN(parts) => {
                for &p in parts {
                    self.accumulate(grads, p, g.clone());
                }
            }
        }
    }
}
