//! Tape-based reverse-mode differentiation.
//!
//! Every forward operation appends a node to the tape. Operands always precede
//! their results, so walking the tape backwards is a reverse topological order.
//! Parameters enter the tape through [`Graph::param`]; [`Graph::backward`]
//! returns their gradients and [`ParamStore::accumulate`] adds them into the
//! store's gradient slots.

use std::collections::HashMap;

use crate::autodiff::params::{Gradients, ParamId, ParamStore};
use crate::error::TensorError;
use crate::tensor::{gemm_acc, gemm_nt_acc, gemm_tn_acc, Real, Tensor};

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    AddN(Vec<Var>),
    Hadamard(Var, Var),
    MulRow(Var, Var),
    Scale(Var, Var),
    ScaleConst(Var, T),
    OneMinus(Var),
    Concat { parts: Vec<Var>, axis: usize },
    SliceCols { src: Var, start: usize },
    SliceRows { src: Var, start: usize },
    GatherRows { table: Var, ids: Vec<usize> },
    Reshape(Var),
    Sum(Var),
    MeanRows { src: Var, mask: Vec<bool> },
    Softmax(Var),
    Sigmoid(Var),
    Tanh(Var),
    CrossEntropy { logits: Var, target: Vec<T>, probs: Vec<T> },
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// A recording of executed operations.
#[derive(Debug, Clone)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    bound: HashMap<ParamId, Var>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn dim_err(op: &'static str, detail: String) -> TensorError {
    TensorError::Dimension { op, detail }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            bound: HashMap::new(),
        }
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

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dims2()
    }

    fn data(&self, v: Var) -> &[T] {
        self.nodes[v.0].value.data()
    }

    fn push(&mut self, op: &'static str, value: Tensor<T>, record: Op<T>) -> Result<Var, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op });
        }
        self.nodes.push(Node { value, op: record });
        Ok(Var(self.nodes.len() - 1))
    }

    fn push_raw(&mut self, op: &'static str, shape: Vec<usize>, data: Vec<T>, record: Op<T>) -> Result<Var, TensorError> {
        let value = Tensor::new(shape, data)?;
        self.push(op, value, record)
    }

    /// A non-differentiable input.
    pub fn constant(&mut self, value: Tensor<T>) -> Result<Var, TensorError> {
        self.push("constant", value, Op::Constant)
    }

    /// Binds a parameter onto the tape; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        if let Some(&v) = self.bound.get(&id) {
            return v;
        }
        let mut value = store.get(id).clone();
        value.clear_grad();
        self.nodes.push(Node {
            value,
            op: Op::Param(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.bound.insert(id, v);
        v
    }

    /// Matrix product of `m×k` and `k×n` operands.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (m, k) = self.dims(a);
        let (k2, n) = self.dims(b);
        if k != k2 {
            return Err(dim_err("matmul", format!("{m}x{k} · {k2}x{n}")));
        }
        let mut out = vec![T::zero(); m * n];
        gemm_acc(self.data(a), self.data(b), &mut out, m, k, n);
        self.push_raw("matmul", vec![m, n], out, Op::MatMul(a, b))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(dim_err(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("add", a, b)?;
        let out = self.data(a).iter().zip(self.data(b)).map(|(&x, &y)| x + y).collect();
        let shape = self.shape(a).to_vec();
        self.push_raw("add", shape, out, Op::Add(a, b))
    }

    /// Sum of several same-shape tensors.
    pub fn add_n(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = *parts
            .first()
            .ok_or_else(|| dim_err("add_n", "no operands".into()))?;
        for &p in &parts[1..] {
            self.same_shape("add_n", first, p)?;
        }
        let mut out = self.data(first).to_vec();
        for &p in &parts[1..] {
            for (o, &v) in out.iter_mut().zip(self.data(p)) {
                *o = *o + v;
            }
        }
        let shape = self.shape(first).to_vec();
        self.push_raw("add_n", shape, out, Op::AddN(parts.to_vec()))
    }

    /// Adds a `1×n` row to every row of an `m×n` matrix.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var, TensorError> {
        let (m, n) = self.dims(x);
        if self.value(row).len() != n {
            return Err(dim_err("add_row", format!("{m}x{n} + {:?}", self.shape(row))));
        }
        let r = self.data(row);
        let out = self
            .data(x)
            .chunks(n)
            .flat_map(|xr| xr.iter().zip(r).map(|(&a, &b)| a + b))
            .collect();
        self.push_raw("add_row", vec![m, n], out, Op::AddRow(x, row))
    }

    /// Element-wise product of same-shape tensors.
    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("hadamard", a, b)?;
        let out = self.data(a).iter().zip(self.data(b)).map(|(&x, &y)| x * y).collect();
        let shape = self.shape(a).to_vec();
        self.push_raw("hadamard", shape, out, Op::Hadamard(a, b))
    }

    /// Multiplies every row of an `m×n` matrix element-wise by a `1×n` row.
    pub fn mul_row(&mut self, x: Var, row: Var) -> Result<Var, TensorError> {
        let (m, n) = self.dims(x);
        if self.value(row).len() != n {
            return Err(dim_err("mul_row", format!("{m}x{n} ⊙ {:?}", self.shape(row))));
        }
        let r = self.data(row);
        let out = self
            .data(x)
            .chunks(n)
            .flat_map(|xr| xr.iter().zip(r).map(|(&a, &b)| a * b))
            .collect();
        self.push_raw("mul_row", vec![m, n], out, Op::MulRow(x, row))
    }

    /// Multiplies a tensor by a single-element tensor.
    pub fn scale(&mut self, x: Var, s: Var) -> Result<Var, TensorError> {
        if self.value(s).len() != 1 {
            return Err(dim_err("scale", format!("scalar operand has shape {:?}", self.shape(s))));
        }
        let sv = self.data(s)[0];
        let out = self.data(x).iter().map(|&v| v * sv).collect();
        let shape = self.shape(x).to_vec();
        self.push_raw("scale", shape, out, Op::Scale(x, s))
    }

    pub fn scale_const(&mut self, x: Var, c: T) -> Result<Var, TensorError> {
        let out = self.data(x).iter().map(|&v| v * c).collect();
        let shape = self.shape(x).to_vec();
        self.push_raw("scale_const", shape, out, Op::ScaleConst(x, c))
    }

    /// `1 - x`, element-wise.
    pub fn one_minus(&mut self, x: Var) -> Result<Var, TensorError> {
        let out = self.data(x).iter().map(|&v| T::one() - v).collect();
        let shape = self.shape(x).to_vec();
        self.push_raw("one_minus", shape, out, Op::OneMinus(x))
    }

    /// Concatenates 2-d tensors along `axis` (0 = rows, 1 = columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, TensorError> {
        if parts.is_empty() || axis > 1 {
            return Err(dim_err("concat", format!("{} parts, axis {axis}", parts.len())));
        }
        let dims: Vec<(usize, usize)> = parts.iter().map(|&p| self.dims(p)).collect();
        let (r0, c0) = dims[0];
        let (shape, out) = if axis == 1 {
            if let Some(bad) = dims.iter().find(|d| d.0 != r0) {
                return Err(dim_err("concat", format!("row extents {r0} vs {}", bad.0)));
            }
            let cols: usize = dims.iter().map(|d| d.1).sum();
            let mut out = Vec::with_capacity(r0 * cols);
            for r in 0..r0 {
                for (&p, &(_, c)) in parts.iter().zip(&dims) {
                    out.extend_from_slice(&self.data(p)[r * c..(r + 1) * c]);
                }
            }
            (vec![r0, cols], out)
        } else {
            if let Some(bad) = dims.iter().find(|d| d.1 != c0) {
                return Err(dim_err("concat", format!("column extents {c0} vs {}", bad.1)));
            }
            let rows: usize = dims.iter().map(|d| d.0).sum();
            let mut out = Vec::with_capacity(rows * c0);
            for &p in parts {
                out.extend_from_slice(self.data(p));
            }
            (vec![rows, c0], out)
        };
        self.push_raw("concat", shape, out, Op::Concat { parts: parts.to_vec(), axis })
    }

    /// Columns `start..start+len` of a 2-d tensor.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let (m, n) = self.dims(x);
        if start + len > n {
            return Err(dim_err("slice_cols", format!("{start}+{len} > {n}")));
        }
        let out = self
            .data(x)
            .chunks(n)
            .flat_map(|r| r[start..start + len].iter().copied())
            .collect();
        self.push_raw("slice_cols", vec![m, len], out, Op::SliceCols { src: x, start })
    }

    /// Rows `start..start+len` of a 2-d tensor.
    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let (m, n) = self.dims(x);
        if start + len > m {
            return Err(dim_err("slice_rows", format!("{start}+{len} > {m}")));
        }
        let out = self.data(x)[start * n..(start + len) * n].to_vec();
        self.push_raw("slice_rows", vec![len, n], out, Op::SliceRows { src: x, start })
    }

    /// Looks up rows of an embedding table.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var, TensorError> {
        let (v, n) = self.dims(table);
        let mut out = Vec::with_capacity(ids.len() * n);
        for &id in ids {
            if id >= v {
                return Err(TensorError::OutOfRange { op: "gather_rows", index: id, extent: v });
            }
            out.extend_from_slice(&self.data(table)[id * n..(id + 1) * n]);
        }
        self.push_raw("gather_rows", vec![ids.len(), n], out, Op::GatherRows { table, ids: ids.to_vec() })
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var, TensorError> {
        let value = Tensor::new(shape, self.data(x).to_vec())?;
        self.push("reshape", value, Op::Reshape(x))
    }

    /// Sum of all entries as a 1-element tensor.
    pub fn sum(&mut self, x: Var) -> Result<Var, TensorError> {
        let s = self.data(x).iter().copied().sum::<T>();
        self.push("sum", Tensor::scalar(s), Op::Sum(x))
    }

    /// Mean of the rows flagged valid, as a `1×n` row.
    pub fn mean_rows_masked(&mut self, x: Var, mask: &[bool]) -> Result<Var, TensorError> {
        let (m, n) = self.dims(x);
        if mask.len() != m {
            return Err(dim_err("mean_rows_masked", format!("mask {} vs rows {m}", mask.len())));
        }
        let count = mask.iter().filter(|&&v| v).count();
        if count == 0 {
            return Err(TensorError::DegenerateMask { op: "mean_rows_masked" });
        }
        let inv = T::one() / T::from_usize(count).expect("count fits");
        let mut out = vec![T::zero(); n];
        for (r, row) in self.data(x).chunks(n).enumerate() {
            if mask[r] {
                for (o, &v) in out.iter_mut().zip(row) {
                    *o = *o + v;
                }
            }
        }
        out.iter_mut().for_each(|o| *o = *o * inv);
        self.push_raw("mean_rows_masked", vec![1, n], out, Op::MeanRows { src: x, mask: mask.to_vec() })
    }

    /// Softmax over all entries of `x`, restricted to positions where `mask` is set.
    /// Masked positions receive exactly zero probability.
    pub fn softmax_masked(&mut self, x: Var, mask: &[bool]) -> Result<Var, TensorError> {
        let probs = masked_softmax(self.data(x), mask)?;
        let shape = self.shape(x).to_vec();
        self.push_raw("softmax_masked", shape, probs, Op::Softmax(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var, TensorError> {
        let out = self.data(x).iter().map(|&v| sigmoid(v)).collect();
        let shape = self.shape(x).to_vec();
        self.push_raw("sigmoid", shape, out, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var, TensorError> {
        let out = self.data(x).iter().map(|&v| v.tanh()).collect();
        let shape = self.shape(x).to_vec();
        self.push_raw("tanh", shape, out, Op::Tanh(x))
    }

    /// `−Σ target · log softmax(logits)` over valid positions.
    pub fn cross_entropy_masked(&mut self, logits: Var, target: &[T], mask: &[bool]) -> Result<Var, TensorError> {
        let n = self.value(logits).len();
        if target.len() != n || mask.len() != n {
            return Err(dim_err(
                "cross_entropy",
                format!("logits {n}, target {}, mask {}", target.len(), mask.len()),
            ));
        }
        check_distribution(target)?;
        if target.iter().zip(mask).any(|(&t, &valid)| !valid && t > T::zero()) {
            return Err(TensorError::NotADistribution("target mass at a masked position".into()));
        }
        let probs = masked_softmax(self.data(logits), mask)?;
        let lse = masked_log_sum_exp(self.data(logits), mask);
        let mut loss = T::zero();
        for ((&t, &z), &valid) in target.iter().zip(self.data(logits)).zip(mask) {
            if valid && t > T::zero() {
                loss = loss - t * (z - lse);
            }
        }
        self.push(
            "cross_entropy",
            Tensor::scalar(loss),
            Op::CrossEntropy { logits, target: target.to_vec(), probs },
        )
    }

    pub fn cross_entropy(&mut self, logits: Var, target: &[T]) -> Result<Var, TensorError> {
        let mask = vec![true; target.len()];
        self.cross_entropy_masked(logits, target, &mask)
    }

    /// Reverse pass from a scalar loss. Returns the gradient of every parameter
    /// bound on this tape that the loss depends on.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>, TensorError> {
        let grads = self.backward_all(loss)?;
        let mut entries = Vec::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Op::Param(id) = node.op {
                let g = grads[idx].clone().unwrap_or_else(|| vec![T::zero(); node.value.len()]);
                entries.push((id, g));
            }
        }
        Ok(Gradients::from_entries(entries))
    }

    /// Reverse pass that also adds the parameter gradients into `store`.
    pub fn backward_into(&self, loss: Var, store: &mut ParamStore<T>) -> Result<(), TensorError> {
        let grads = self.backward(loss)?;
        store.accumulate(&grads);
        Ok(())
    }

    /// Gradient of the loss with respect to every node on the tape.
    pub fn backward_all(&self, loss: Var) -> Result<Vec<Option<Vec<T>>>, TensorError> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(TensorError::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![T::one()]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(grads)
    }

    fn propagate(&self, idx: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[idx];
        macro_rules! acc {
            ($v:expr, |$buf:ident| $body:block) => {{
                let n = self.nodes[$v.0].value.len();
                let $buf: &mut Vec<T> = grads[$v.0].get_or_insert_with(|| vec![T::zero(); n]);
                $body
            }};
        }
        match &node.op {
            Op::Constant | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.dims(*a);
                let (_, n) = self.dims(*b);
                let (ad, bd) = (self.data(*a), self.data(*b));
                acc!(*a, |ga| { gemm_nt_acc(g, bd, ga, m, k, n); });
                acc!(*b, |gb| { gemm_tn_acc(ad, g, gb, m, k, n); });
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    acc!(v, |gv| { add_into(gv, g); });
                }
            }
            Op::AddN(parts) => {
                for &v in parts {
                    acc!(v, |gv| { add_into(gv, g); });
                }
            }
            Op::AddRow(x, row) => {
                let (_, n) = self.dims(*x);
                acc!(*x, |gx| { add_into(gx, g); });
                acc!(*row, |gr| {
                    for chunk in g.chunks(n) {
                        add_into(gr, chunk);
                    }
                });
            }
            Op::Hadamard(a, b) => {
                let (ad, bd) = (self.data(*a), self.data(*b));
                acc!(*a, |ga| {
                    for ((o, &gv), &bv) in ga.iter_mut().zip(g).zip(bd) {
                        *o = *o + gv * bv;
                    }
                });
                acc!(*b, |gb| {
                    for ((o, &gv), &av) in gb.iter_mut().zip(g).zip(ad) {
                        *o = *o + gv * av;
                    }
                });
            }
            Op::MulRow(x, row) => {
                let (_, n) = self.dims(*x);
                let (xd, rd) = (self.data(*x), self.data(*row));
                acc!(*x, |gx| {
                    for (i, (o, &gv)) in gx.iter_mut().zip(g).enumerate() {
                        *o = *o + gv * rd[i % n];
                    }
                });
                acc!(*row, |gr| {
                    for (i, (&gv, &xv)) in g.iter().zip(xd).enumerate() {
                        gr[i % n] = gr[i % n] + gv * xv;
                    }
                });
            }
            Op::Scale(x, s) => {
                let sv = self.data(*s)[0];
                let xd = self.data(*x);
                acc!(*x, |gx| {
                    for (o, &gv) in gx.iter_mut().zip(g) {
                        *o = *o + gv * sv;
                    }
                });
                let ds = g.iter().zip(xd).fold(T::zero(), |acc, (&gv, &xv)| acc + gv * xv);
                acc!(*s, |gs| { gs[0] = gs[0] + ds; });
            }
            Op::ScaleConst(x, c) => {
                acc!(*x, |gx| {
                    for (o, &gv) in gx.iter_mut().zip(g) {
                        *o = *o + gv * *c;
                    }
                });
            }
            Op::OneMinus(x) => {
                acc!(*x, |gx| {
                    for (o, &gv) in gx.iter_mut().zip(g) {
                        *o = *o - gv;
                    }
                });
            }
            Op::Concat { parts, axis } => {
                let (rows, cols) = node.value.dims2();
                if *axis == 1 {
                    let mut offset = 0;
                    for &p in parts {
                        let (_, c) = self.dims(p);
                        acc!(p, |gp| {
                            for r in 0..rows {
                                add_into(&mut gp[r * c..(r + 1) * c], &g[r * cols + offset..r * cols + offset + c]);
                            }
                        });
                        offset += c;
                    }
                } else {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        acc!(p, |gp| { add_into(gp, &g[offset..offset + len]); });
                        offset += len;
                    }
                }
            }
            Op::SliceCols { src, start } => {
                let (_, n) = self.dims(*src);
                let (_, len) = node.value.dims2();
                acc!(*src, |gs| {
                    for (r, chunk) in g.chunks(len).enumerate() {
                        add_into(&mut gs[r * n + start..r * n + start + len], chunk);
                    }
                });
            }
            Op::SliceRows { src, start } => {
                let (_, n) = self.dims(*src);
                acc!(*src, |gs| { add_into(&mut gs[start * n..start * n + g.len()], g); });
            }
            Op::GatherRows { table, ids } => {
                let (_, n) = self.dims(*table);
                acc!(*table, |gt| {
                    for (chunk, &id) in g.chunks(n).zip(ids) {
                        add_into(&mut gt[id * n..(id + 1) * n], chunk);
                    }
                });
            }
            Op::Reshape(x) => {
                acc!(*x, |gx| { add_into(gx, g); });
            }
            Op::Sum(x) => {
                let gv = g[0];
                acc!(*x, |gx| {
                    gx.iter_mut().for_each(|o| *o = *o + gv);
                });
            }
            Op::MeanRows { src, mask } => {
                let (_, n) = self.dims(*src);
                let count = mask.iter().filter(|&&v| v).count();
                let inv = T::one() / T::from_usize(count).expect("count fits");
                acc!(*src, |gs| {
                    for (r, &valid) in mask.iter().enumerate() {
                        if valid {
                            for (o, &gv) in gs[r * n..(r + 1) * n].iter_mut().zip(g) {
                                *o = *o + gv * inv;
                            }
                        }
                    }
                });
            }
            Op::Softmax(x) => {
                let y = node.value.data();
                let dot = g.iter().zip(y).fold(T::zero(), |acc, (&gv, &yv)| acc + gv * yv);
                acc!(*x, |gx| {
                    for ((o, &gv), &yv) in gx.iter_mut().zip(g).zip(y) {
                        *o = *o + yv * (gv - dot);
                    }
                });
            }
            Op::Sigmoid(x) => {
                let y = node.value.data();
                acc!(*x, |gx| {
                    for ((o, &gv), &yv) in gx.iter_mut().zip(g).zip(y) {
                        *o = *o + gv * yv * (T::one() - yv);
                    }
                });
            }
            Op::Tanh(x) => {
                let y = node.value.data();
                acc!(*x, |gx| {
                    for ((o, &gv), &yv) in gx.iter_mut().zip(g).zip(y) {
                        *o = *o + gv * (T::one() - yv * yv);
                    }
                });
            }
            Op::CrossEntropy { logits, target, probs } => {
                let gv = g[0];
                acc!(*logits, |gl| {
                    for ((o, &p), &t) in gl.iter_mut().zip(probs).zip(target) {
                        *o = *o + gv * (p - t);
                    }
                });
            }
        }
    }
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

pub(crate) fn sigmoid<T: Real>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

fn check_distribution<T: Real>(target: &[T]) -> Result<(), TensorError> {
    if target.iter().any(|&t| t < T::zero() || !t.is_finite()) {
        return Err(TensorError::NotADistribution("negative or non-finite entry".into()));
    }
    let total = target.iter().copied().sum::<T>().to_f64().unwrap_or(f64::NAN);
    if (total - 1.0).abs() > 1e-5 {
        return Err(TensorError::NotADistribution(format!("entries sum to {total}")));
    }
    Ok(())
}

fn masked_log_sum_exp<T: Real>(x: &[T], mask: &[bool]) -> T {
    let max = x
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .fold(T::neg_infinity(), T::max);
    let s = x
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| (v - max).exp())
        .sum::<T>();
    max + s.ln()
}

/// Stabilised softmax over the valid entries of `x`; masked entries get exactly 0.
pub fn masked_softmax<T: Real>(x: &[T], mask: &[bool]) -> Result<Vec<T>, TensorError> {
    if mask.len() != x.len() {
        return Err(dim_err("softmax_masked", format!("mask {} vs logits {}", mask.len(), x.len())));
    }
    if !mask.iter().any(|&m| m) {
        return Err(TensorError::DegenerateMask { op: "softmax_masked" });
    }
    // Masked logits are replaced by a large negative sentinel before the max shift.
    let sentinel = T::from_f64_lossy(-1e30);
    let shifted: Vec<T> = x
        .iter()
        .zip(mask)
        .map(|(&v, &m)| if m { v } else { sentinel })
        .collect();
    let max = shifted.iter().copied().fold(T::neg_infinity(), T::max);
    let mut out: Vec<T> = shifted
        .iter()
        .zip(mask)
        .map(|(&v, &m)| if m { (v - max).exp() } else { T::zero() })
        .collect();
    let total = out.iter().copied().sum::<T>();
    out.iter_mut().for_each(|v| *v = *v / total);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn leaf(g: &mut Graph<f64>, shape: Vec<usize>, data: Vec<f64>) -> Var {
        g.constant(Tensor::new(shape, data).unwrap()).unwrap()
    }

    #[test]
    fn matmul_identity_and_small_product() {
        let mut g = Graph::<f64>::new();
        let eye = leaf(&mut g, vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let col = leaf(&mut g, vec![2, 1], vec![3.0, 4.0]);
        let y = g.matmul(eye, col).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, 4.0]);

        let a = leaf(&mut g, vec![1, 2], vec![1.0, 2.0]);
        let z = g.matmul(a, col).unwrap();
        assert_eq!(g.value(z).data(), &[11.0]);
        assert_eq!(g.shape(z), &[1, 1]);
    }

    #[test]
    fn matmul_rejects_inner_mismatch() {
        let mut g = Graph::<f64>::new();
        let a = leaf(&mut g, vec![2, 3], vec![0.0; 6]);
        let b = leaf(&mut g, vec![2, 3], vec![0.0; 6]);
        assert!(matches!(g.matmul(a, b), Err(TensorError::Dimension { .. })));
    }

    #[test]
    fn hadamard_values_and_mismatch() {
        let mut g = Graph::<f64>::new();
        let a = leaf(&mut g, vec![3], vec![1.0, 2.0, 3.0]);
        let ones = leaf(&mut g, vec![3], vec![1.0; 3]);
        let y = g.hadamard(a, ones).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, 2.0, 3.0]);
        let b = leaf(&mut g, vec![3], vec![2.0, 0.0, -1.0]);
        let c = leaf(&mut g, vec![3], vec![3.0, 5.0, 4.0]);
        let y = g.hadamard(b, c).unwrap();
        assert_eq!(g.value(y).data(), &[6.0, 0.0, -4.0]);
        let d = leaf(&mut g, vec![2], vec![1.0, 1.0]);
        assert!(g.hadamard(a, d).is_err());
    }

    #[test]
    fn concat_columns_and_extent_check() {
        let mut g = Graph::<f64>::new();
        let a = leaf(&mut g, vec![1, 2], vec![1.0, 2.0]);
        let b = leaf(&mut g, vec![1, 1], vec![3.0]);
        let y = g.concat(&[a, b], 1).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, 2.0, 3.0]);
        assert_eq!(g.shape(y), &[1, 3]);

        let s = leaf(&mut g, vec![1, 4], vec![0.5; 4]);
        let w = leaf(&mut g, vec![1, 2], vec![0.1; 2]);
        let y = g.concat(&[s, w], 1).unwrap();
        assert_eq!(g.shape(y), &[1, 6]);

        let tall = leaf(&mut g, vec![2, 1], vec![0.0; 2]);
        assert!(g.concat(&[a, tall], 1).is_err());
    }

    #[test]
    fn softmax_masked_contracts() {
        let mut g = Graph::<f64>::new();
        let x = leaf(&mut g, vec![2], vec![0.0, 0.0]);
        let y = g.softmax_masked(x, &[true, true]).unwrap();
        assert_eq!(g.value(y).data(), &[0.5, 0.5]);

        let x = leaf(&mut g, vec![3], vec![5.0, -3.0, 7.0]);
        let y = g.softmax_masked(x, &[true, false, true]).unwrap();
        let p = g.value(y).data();
        assert_eq!(p[1], 0.0);
        let e5 = (5.0f64 - 7.0).exp();
        assert_relative_eq!(p[0], e5 / (e5 + 1.0), epsilon = 1e-12);
        assert_relative_eq!(p[0] + p[2], 1.0, epsilon = 1e-12);

        let x = leaf(&mut g, vec![3], vec![1.0, 2.0, 3.0]);
        let y = g.softmax_masked(x, &[true; 3]).unwrap();
        let expected = [0.0900, 0.2447, 0.6652];
        for (p, e) in g.value(y).data().iter().zip(expected) {
            assert!((p - e).abs() < 1e-4);
        }
        assert!(matches!(
            g.softmax_masked(x, &[false; 3]),
            Err(TensorError::DegenerateMask { .. })
        ));
    }

    #[test]
    fn elementwise_nonlinearities() {
        let mut g = Graph::<f64>::new();
        let x = leaf(&mut g, vec![2], vec![0.0, 2.0]);
        let s = g.sigmoid(x).unwrap();
        let t = g.tanh(x).unwrap();
        assert_eq!(g.value(s).data()[0], 0.5);
        assert!((g.value(s).data()[1] - 0.8808).abs() < 1e-4);
        assert_eq!(g.value(t).data()[0], 0.0);
    }

    #[test]
    fn cross_entropy_values() {
        let mut g = Graph::<f64>::new();
        let x = leaf(&mut g, vec![3], vec![0.0; 3]);
        let l = g.cross_entropy(x, &[0.0, 1.0, 0.0]).unwrap();
        assert_relative_eq!(g.value(l).data()[0], 3f64.ln(), epsilon = 1e-12);

        let x = leaf(&mut g, vec![2], vec![10.0, -10.0]);
        let l = g.cross_entropy(x, &[1.0, 0.0]).unwrap();
        let v = g.value(l).data()[0];
        assert!((v - 2.06e-9).abs() < 1e-10, "{v}");

        assert!(matches!(
            g.cross_entropy(x, &[0.7, 0.7]),
            Err(TensorError::NotADistribution(_))
        ));
    }

    #[test]
    fn backward_sum_gives_ones_and_accumulates() {
        let mut store = ParamStore::<f64>::new();
        let id = store.insert("x", Tensor::new(vec![2, 2], vec![0.3, -1.0, 2.0, 4.0]).unwrap());
        let mut g = Graph::new();
        let x = g.param(&store, id);
        let s = g.sum(x).unwrap();
        g.backward_into(s, &mut store).unwrap();
        assert_eq!(store.get(id).grad().unwrap(), &[1.0; 4]);
        g.backward_into(s, &mut store).unwrap();
        assert_eq!(store.get(id).grad().unwrap(), &[2.0; 4]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::<f64>::new();
        let x = leaf(&mut g, vec![2], vec![1.0, 2.0]);
        assert!(matches!(g.backward(x), Err(TensorError::NonScalarLoss(_))));
    }

    #[test]
    fn non_finite_forward_is_an_error() {
        let mut g = Graph::<f64>::new();
        let x = leaf(&mut g, vec![1], vec![1e308]);
        assert!(matches!(
            g.scale_const(x, 10.0),
            Err(TensorError::NonFinite { .. })
        ));
    }

    #[test]
    fn shared_operand_gradient() {
        let mut store = ParamStore::<f64>::new();
        let id = store.insert("x", Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap());
        let mut g = Graph::new();
        let x = g.param(&store, id);
        let sq = g.hadamard(x, x).unwrap();
        let s = g.sum(sq).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(id).unwrap(), &[2.0, -4.0, 1.0]);
    }
}
