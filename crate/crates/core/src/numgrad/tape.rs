//! Define-by-run reverse-mode autodiff.
//!
//! Every operation on a [`Var`] appends a node to its [`Tape`]. Nodes are only
//! ever appended, so the node list is already in topological order and
//! [`Tape::backward`] is a single reverse sweep.

use std::cell::{Ref, RefCell};

use super::erf::{erf, erf_derivative};
use super::softrank::{soft_rank_backward, soft_rank_values};
use super::tensor::{strides, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Exp(usize),
    Sqrt(usize),
    Square(usize),
    Erf(usize),
    Tanh(usize),
    Relu(usize),
    Scale(usize, f64),
    Shift(usize),
    MatMul(usize, usize),
    Sum(usize, Option<usize>),
    Mean(usize, Option<usize>),
    Softmax(usize, usize),
    Reshape(usize),
    Gather(usize, Vec<Option<usize>>),
    Concat(Vec<usize>, usize),
    PairwiseDiff(usize),
    SoftRank(usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Operation recorder. Rebuild one per forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("value", &*self.value())
            .finish()
    }
}

/// Gradients produced by [`Tape::backward`], indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// dLoss/dVar. Zero when `var` is unreachable from the loss or does not
    /// require a gradient.
    pub fn wrt(&self, var: Var<'_>) -> Tensor {
        let shape = self.shapes[var.id].clone();
        match &self.grads[var.id] {
            Some(g) => Tensor::new(shape, g.clone()).expect("gradient shape"),
            None => Tensor::zeros(&shape),
        }
    }

    /// Whether any gradient reached `var`.
    pub fn reached(&self, var: Var<'_>) -> bool {
        self.grads[var.id].is_some()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Trainable leaf.
    pub fn param(&self, value: &Tensor) -> Var<'_> {
        self.push(value.clone(), Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&self, value: &Tensor) -> Var<'_> {
        self.push(value.clone(), Op::Leaf, false)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(&Tensor::scalar(value))
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn requires(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    /// Reverse sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if root.value.numel() != 1 {
            return Err(Error::NonScalarLoss(root.value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        if root.requires_grad {
            grads[loss.id] = Some(vec![1.0]);
        }
        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else {
                continue;
            };
            backprop(&nodes, node, &g, &mut grads);
            grads[id] = Some(g);
        }
        let shapes = nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        // Constants never hold a gradient.
        for (g, n) in grads.iter_mut().zip(nodes.iter()) {
            if !n.requires_grad {
                *g = None;
            }
        }
        Ok(Gradients { grads, shapes })
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], nodes: &[Node], id: usize, delta: Vec<f64>) {
    if !nodes[id].requires_grad {
        return;
    }
    match &mut grads[id] {
        Some(g) => {
            for (a, d) in g.iter_mut().zip(delta) {
                *a += d;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}

/// Reduce a gradient shaped like the broadcast result back onto an operand
/// that may have been a broadcast scalar.
fn unbroadcast(delta: Vec<f64>, operand_len: usize) -> Vec<f64> {
    if operand_len == delta.len() {
        delta
    } else {
        vec![delta.iter().sum()]
    }
}

fn broadcast_get(data: &[f64], i: usize) -> f64 {
    if data.len() == 1 {
        data[0]
    } else {
        data[i]
    }
}

fn backprop(nodes: &[Node], node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let val = |i: usize| nodes[i].value.data();
    match &node.op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            accumulate(grads, nodes, *a, unbroadcast(g.to_vec(), val(*a).len()));
            accumulate(grads, nodes, *b, unbroadcast(g.to_vec(), val(*b).len()));
        }
        Op::Sub(a, b) => {
            accumulate(grads, nodes, *a, unbroadcast(g.to_vec(), val(*a).len()));
            let neg = g.iter().map(|v| -v).collect();
            accumulate(grads, nodes, *b, unbroadcast(neg, val(*b).len()));
        }
        Op::Mul(a, b) => {
            let (x, y) = (val(*a), val(*b));
            let da = (0..g.len()).map(|i| g[i] * broadcast_get(y, i)).collect();
            let db = (0..g.len()).map(|i| g[i] * broadcast_get(x, i)).collect();
            accumulate(grads, nodes, *a, unbroadcast(da, x.len()));
            accumulate(grads, nodes, *b, unbroadcast(db, y.len()));
        }
        Op::Div(a, b) => {
            let (x, y) = (val(*a), val(*b));
            let da = (0..g.len()).map(|i| g[i] / broadcast_get(y, i)).collect();
            let db = (0..g.len())
                .map(|i| {
                    let d = broadcast_get(y, i);
                    -g[i] * broadcast_get(x, i) / (d * d)
                })
                .collect();
            accumulate(grads, nodes, *a, unbroadcast(da, x.len()));
            accumulate(grads, nodes, *b, unbroadcast(db, y.len()));
        }
        Op::Neg(a) => accumulate(grads, nodes, *a, g.iter().map(|v| -v).collect()),
        Op::Exp(a) => {
            let y = node.value.data();
            accumulate(grads, nodes, *a, zip_map(g, y, |g, y| g * y));
        }
        Op::Sqrt(a) => {
            let y = node.value.data();
            accumulate(grads, nodes, *a, zip_map(g, y, |g, y| g * 0.5 / y));
        }
        Op::Square(a) => {
            accumulate(grads, nodes, *a, zip_map(g, val(*a), |g, x| 2.0 * g * x));
        }
        Op::Erf(a) => {
            accumulate(
                grads,
                nodes,
                *a,
                zip_map(g, val(*a), |g, x| g * erf_derivative(x)),
            );
        }
        Op::Tanh(a) => {
            let y = node.value.data();
            accumulate(grads, nodes, *a, zip_map(g, y, |g, y| g * (1.0 - y * y)));
        }
        Op::Relu(a) => {
            accumulate(
                grads,
                nodes,
                *a,
                zip_map(g, val(*a), |g, x| if x > 0.0 { g } else { 0.0 }),
            );
        }
        Op::Scale(a, s) => accumulate(grads, nodes, *a, g.iter().map(|v| v * s).collect()),
        Op::Shift(a) | Op::Reshape(a) => accumulate(grads, nodes, *a, g.to_vec()),
        Op::MatMul(a, b) => {
            let (av, bv) = (&nodes[*a].value, &nodes[*b].value);
            let (m, k) = (av.shape()[0], av.shape()[1]);
            let n = bv.shape()[1];
            if nodes[*a].requires_grad {
                // dA = G · Bᵀ
                let mut da = vec![0.0; m * k];
                for i in 0..m {
                    for p in 0..k {
                        let mut s = 0.0;
                        for j in 0..n {
                            s += g[i * n + j] * bv.data()[p * n + j];
                        }
                        da[i * k + p] = s;
                    }
                }
                accumulate(grads, nodes, *a, da);
            }
            if nodes[*b].requires_grad {
                // dB = Aᵀ · G
                let mut db = vec![0.0; k * n];
                for i in 0..m {
                    for p in 0..k {
                        let aip = av.data()[i * k + p];
                        if aip == 0.0 {
                            continue;
                        }
                        for j in 0..n {
                            db[p * n + j] += aip * g[i * n + j];
                        }
                    }
                }
                accumulate(grads, nodes, *b, db);
            }
        }
        Op::Sum(a, axis) | Op::Mean(a, axis) => {
            let shape = nodes[*a].value.shape();
            let mean = matches!(node.op, Op::Mean(..));
            let total = nodes[*a].value.numel();
            let delta = match axis {
                None => {
                    let s = if mean { g[0] / total as f64 } else { g[0] };
                    vec![s; total]
                }
                Some(ax) => {
                    let (outer, len, inner) = split_axis(shape, *ax);
                    let f = if mean { 1.0 / len as f64 } else { 1.0 };
                    let mut d = vec![0.0; total];
                    for o in 0..outer {
                        for l in 0..len {
                            for i in 0..inner {
                                d[(o * len + l) * inner + i] = g[o * inner + i] * f;
                            }
                        }
                    }
                    d
                }
            };
            accumulate(grads, nodes, *a, delta);
        }
        Op::Softmax(a, ax) => {
            let y = node.value.data();
            let (outer, len, inner) = split_axis(node.value.shape(), *ax);
            let mut d = vec![0.0; y.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let idx = |l: usize| (o * len + l) * inner + i;
                    let dot: f64 = (0..len).map(|l| g[idx(l)] * y[idx(l)]).sum();
                    for l in 0..len {
                        d[idx(l)] = y[idx(l)] * (g[idx(l)] - dot);
                    }
                }
            }
            accumulate(grads, nodes, *a, d);
        }
        Op::Gather(a, index) => {
            let mut d = vec![0.0; nodes[*a].value.numel()];
            for (k, src) in index.iter().enumerate() {
                if let Some(s) = src {
                    d[*s] += g[k];
                }
            }
            accumulate(grads, nodes, *a, d);
        }
        Op::Concat(parts, ax) => {
            let out_shape = node.value.shape();
            let (outer, _, inner) = split_axis(out_shape, *ax);
            let out_row = out_shape[*ax] * inner;
            let mut offset = 0;
            for &p in parts {
                let block = nodes[p].value.shape()[*ax] * inner;
                if nodes[p].requires_grad {
                    let mut d = Vec::with_capacity(outer * block);
                    for o in 0..outer {
                        let start = o * out_row + offset;
                        d.extend_from_slice(&g[start..start + block]);
                    }
                    accumulate(grads, nodes, p, d);
                }
                offset += block;
            }
        }
        Op::PairwiseDiff(a) => {
            let n = nodes[*a].value.numel();
            let mut d = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    d[i] += g[i * n + j];
                    d[j] -= g[i * n + j];
                }
            }
            accumulate(grads, nodes, *a, d);
        }
        Op::SoftRank(a) => {
            let d = soft_rank_backward(val(*a), g);
            accumulate(grads, nodes, *a, d);
        }
    }
}

fn zip_map(g: &[f64], x: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    g.iter().zip(x).map(|(&g, &x)| f(g, x)).collect()
}

/// (product of dims before `axis`, dim at `axis`, product of dims after).
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}


impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Ref<'t, Tensor> {
        Ref::map(self.tape.nodes.borrow(), |n| &n[self.id].value)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn numel(&self) -> usize {
        self.value().numel()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    /// The scalar held by a one-element variable.
    pub fn item(&self) -> f64 {
        self.value().item().expect("item() on a multi-element Var")
    }

    /// Same value, cut from the graph.
    pub fn detach(&self) -> Var<'t> {
        let v = self.value().clone();
        self.tape.constant(&v)
    }

    fn unary(&self, op: Op, f: impl Fn(f64) -> f64) -> Var<'t> {
        let value = self.value().map(f);
        let rg = self.requires_grad();
        self.tape.push(value, op, rg)
    }

    fn binary(
        &self,
        other: Var<'t>,
        name: &'static str,
        make: fn(usize, usize) -> Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var<'t>> {
        let value = {
            let (a, b) = (self.value(), other.value());
            let shape = if a.shape() == b.shape() || b.numel() == 1 {
                a.shape().to_vec()
            } else if a.numel() == 1 {
                b.shape().to_vec()
            } else {
                return Err(Error::ShapeMismatch {
                    op: name,
                    lhs: a.shape().to_vec(),
                    rhs: b.shape().to_vec(),
                });
            };
            let n = shape.iter().product();
            let data = (0..n)
                .map(|i| f(broadcast_get(a.data(), i), broadcast_get(b.data(), i)))
                .collect();
            Tensor::new(shape, data)?
        };
        let rg = self.tape.requires(&[self.id, other.id]);
        Ok(self.tape.push(value, make(self.id, other.id), rg))
    }

    pub fn add(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "add", Op::Add, |a, b| a + b)
    }

    pub fn sub(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "sub", Op::Sub, |a, b| a - b)
    }

    pub fn mul(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "mul", Op::Mul, |a, b| a * b)
    }

    /// Elementwise division; any zero in the denominator is an error.
    pub fn div(&self, other: Var<'t>) -> Result<Var<'t>> {
        if other.value().data().iter().any(|&d| d == 0.0) {
            return Err(Error::DivisionByZero("div"));
        }
        self.binary(other, "div", Op::Div, |a, b| a / b)
    }

    pub fn neg(&self) -> Var<'t> {
        self.unary(Op::Neg(self.id), |x| -x)
    }

    pub fn exp(&self) -> Var<'t> {
        self.unary(Op::Exp(self.id), f64::exp)
    }

    /// Elementwise square root; negative inputs are an error.
    pub fn sqrt(&self) -> Result<Var<'t>> {
        if self.value().data().iter().any(|&x| x < 0.0 || x.is_nan()) {
            return Err(Error::NonFinite("sqrt of negative value".into()));
        }
        Ok(self.unary(Op::Sqrt(self.id), f64::sqrt))
    }

    pub fn square(&self) -> Var<'t> {
        self.unary(Op::Square(self.id), |x| x * x)
    }

    pub fn erf(&self) -> Result<Var<'t>> {
        if self.value().data().iter().any(|x| x.is_nan()) {
            return Err(Error::NanInput("erf"));
        }
        Ok(self.unary(Op::Erf(self.id), erf))
    }

    pub fn tanh(&self) -> Var<'t> {
        self.unary(Op::Tanh(self.id), f64::tanh)
    }

    pub fn relu(&self) -> Var<'t> {
        self.unary(Op::Relu(self.id), |x| x.max(0.0))
    }

    pub fn scale(&self, s: f64) -> Var<'t> {
        self.unary(Op::Scale(self.id, s), |x| x * s)
    }

    pub fn add_scalar(&self, c: f64) -> Var<'t> {
        self.unary(Op::Shift(self.id), |x| x + c)
    }

    /// 2-D matrix product.
    pub fn matmul(&self, other: Var<'t>) -> Result<Var<'t>> {
        let value = {
            let (a, b) = (self.value(), other.value());
            if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0] {
                return Err(Error::ShapeMismatch {
                    op: "matmul",
                    lhs: a.shape().to_vec(),
                    rhs: b.shape().to_vec(),
                });
            }
            let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
            let (ad, bd) = (a.data(), b.data());
            let mut out = vec![0.0; m * n];
            for i in 0..m {
                let row = &mut out[i * n..(i + 1) * n];
                for p in 0..k {
                    let aip = ad[i * k + p];
                    if aip == 0.0 {
                        continue;
                    }
                    let brow = &bd[p * n..(p + 1) * n];
                    for (o, &bv) in row.iter_mut().zip(brow) {
                        *o += aip * bv;
                    }
                }
            }
            Tensor::new(vec![m, n], out)?
        };
        let rg = self.tape.requires(&[self.id, other.id]);
        Ok(self.tape.push(value, Op::MatMul(self.id, other.id), rg))
    }

    fn reduce(&self, axis: Option<usize>, mean: bool) -> Result<Var<'t>> {
        let value = {
            let x = self.value();
            match axis {
                None => {
                    let s: f64 = x.data().iter().sum();
                    Tensor::scalar(if mean { s / x.numel() as f64 } else { s })
                }
                Some(ax) => {
                    if ax >= x.rank() {
                        return Err(Error::InvalidAxis {
                            axis: ax,
                            rank: x.rank(),
                        });
                    }
                    let (outer, len, inner) = split_axis(x.shape(), ax);
                    let mut out = vec![0.0; outer * inner];
                    for o in 0..outer {
                        for l in 0..len {
                            for i in 0..inner {
                                out[o * inner + i] += x.data()[(o * len + l) * inner + i];
                            }
                        }
                    }
                    if mean {
                        for v in &mut out {
                            *v /= len as f64;
                        }
                    }
                    let mut shape = x.shape().to_vec();
                    shape.remove(ax);
                    Tensor::new(shape, out)?
                }
            }
        };
        let op = if mean {
            Op::Mean(self.id, axis)
        } else {
            Op::Sum(self.id, axis)
        };
        Ok(self.tape.push(value, op, self.requires_grad()))
    }

    /// Sum over all elements.
    pub fn sum(&self) -> Var<'t> {
        self.reduce(None, false).expect("full reduction")
    }

    /// Mean over all elements.
    pub fn mean(&self) -> Var<'t> {
        self.reduce(None, true).expect("full reduction")
    }

    pub fn sum_axis(&self, axis: usize) -> Result<Var<'t>> {
        self.reduce(Some(axis), false)
    }

    pub fn mean_axis(&self, axis: usize) -> Result<Var<'t>> {
        self.reduce(Some(axis), true)
    }

    /// Max-subtracted softmax along `axis`.
    pub fn softmax(&self, axis: usize) -> Result<Var<'t>> {
        let value = {
            let x = self.value();
            if axis >= x.rank() {
                return Err(Error::InvalidAxis {
                    axis,
                    rank: x.rank(),
                });
            }
            let (outer, len, inner) = split_axis(x.shape(), axis);
            let mut out = vec![0.0; x.numel()];
            for o in 0..outer {
                for i in 0..inner {
                    let idx = |l: usize| (o * len + l) * inner + i;
                    let max = (0..len)
                        .map(|l| x.data()[idx(l)])
                        .fold(f64::NEG_INFINITY, f64::max);
                    let mut total = 0.0;
                    for l in 0..len {
                        let e = (x.data()[idx(l)] - max).exp();
                        out[idx(l)] = e;
                        total += e;
                    }
                    for l in 0..len {
                        out[idx(l)] /= total;
                    }
                }
            }
            Tensor::new(x.shape().to_vec(), out)?
        };
        Ok(self
            .tape
            .push(value, Op::Softmax(self.id, axis), self.requires_grad()))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<'t>> {
        let value = self.value().reshaped(shape)?;
        Ok(self
            .tape
            .push(value, Op::Reshape(self.id), self.requires_grad()))
    }

    /// Axis permutation: output axis `i` is input axis `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Var<'t>> {
        let in_shape = self.shape();
        let rank = in_shape.len();
        let mut seen = vec![false; rank];
        for &p in perm {
            if p >= rank || seen[p] {
                return Err(Error::InvalidArgument(format!(
                    "{perm:?} is not a permutation of {rank} axes"
                )));
            }
            seen[p] = true;
        }
        if perm.len() != rank {
            return Err(Error::InvalidArgument(format!(
                "{perm:?} is not a permutation of {rank} axes"
            )));
        }
        let out_shape: Vec<usize> = perm.iter().map(|&p| in_shape[p]).collect();
        let in_strides = strides(&in_shape);
        let total: usize = in_shape.iter().product();
        let mut index = Vec::with_capacity(total);
        let mut counter = vec![0usize; rank];
        for _ in 0..total {
            let src: usize = (0..rank).map(|d| counter[d] * in_strides[perm[d]]).sum();
            index.push(Some(src));
            for d in (0..rank).rev() {
                counter[d] += 1;
                if counter[d] < out_shape[d] {
                    break;
                }
                counter[d] = 0;
            }
        }
        self.gather(index, &out_shape)
    }

    /// 2-D transpose.
    pub fn t(&self) -> Result<Var<'t>> {
        self.permute(&[1, 0])
    }

    /// `out[k] = self[index[k]]` over flattened storage, zero for `None`.
    pub fn gather(&self, index: Vec<Option<usize>>, shape: &[usize]) -> Result<Var<'t>> {
        let value = {
            let x = self.value();
            if let Some(bad) = index.iter().flatten().find(|&&i| i >= x.numel()) {
                return Err(Error::InvalidArgument(format!(
                    "gather index {bad} out of range for {} elements",
                    x.numel()
                )));
            }
            let data = index
                .iter()
                .map(|s| s.map_or(0.0, |i| x.data()[i]))
                .collect();
            Tensor::new(shape.to_vec(), data)?
        };
        Ok(self
            .tape
            .push(value, Op::Gather(self.id, index), self.requires_grad()))
    }

    /// Contiguous range `[start, end)` of a 1-D variable.
    pub fn slice(&self, start: usize, end: usize) -> Result<Var<'t>> {
        if start > end || end > self.numel() {
            return Err(Error::InvalidArgument(format!(
                "slice {start}..{end} of {} elements",
                self.numel()
            )));
        }
        self.gather((start..end).map(Some).collect(), &[end - start])
    }

    /// `out[i][j] = x_i - x_j` for a 1-D input of length n.
    pub fn pairwise_diff(&self) -> Result<Var<'t>> {
        let value = {
            let x = self.value();
            if x.rank() != 1 {
                return Err(Error::InvalidArgument(format!(
                    "pairwise_diff expects a vector, got {:?}",
                    x.shape()
                )));
            }
            let n = x.numel();
            let d = x.data();
            let data = (0..n * n).map(|k| d[k / n] - d[k % n]).collect();
            Tensor::new(vec![n, n], data)?
        };
        Ok(self
            .tape
            .push(value, Op::PairwiseDiff(self.id), self.requires_grad()))
    }

    /// Fused `(1/n) * sum_k Phi(x_i - x_k)` with Phi the standard normal CDF.
    pub fn soft_rank(&self) -> Result<Var<'t>> {
        let value = {
            let x = self.value();
            if x.rank() != 1 || x.numel() == 0 {
                return Err(Error::InvalidArgument(format!(
                    "soft_rank expects a non-empty vector, got {:?}",
                    x.shape()
                )));
            }
            if x.data().iter().any(|v| v.is_nan()) {
                return Err(Error::NanInput("soft_rank"));
            }
            Tensor::vector(soft_rank_values(x.data()))
        };
        Ok(self
            .tape
            .push(value, Op::SoftRank(self.id), self.requires_grad()))
    }
}

/// Concatenate along `axis`; operands must agree on every other dimension.
pub fn concat<'t>(parts: &[Var<'t>], axis: usize) -> Result<Var<'t>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
    let tape = first.tape;
    let value = {
        let values: Vec<Ref<'_, Tensor>> = parts.iter().map(|p| p.value()).collect();
        let base = values[0].shape().to_vec();
        if axis >= base.len() {
            return Err(Error::InvalidAxis {
                axis,
                rank: base.len(),
            });
        }
        let mut out_shape = base.clone();
        out_shape[axis] = 0;
        for v in &values {
            let s = v.shape();
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    lhs: base.clone(),
                    rhs: s.to_vec(),
                });
            }
            out_shape[axis] += s[axis];
        }
        let (outer, _, inner) = split_axis(&base, axis);
        let mut data = Vec::with_capacity(out_shape.iter().product());
        for o in 0..outer {
            for v in &values {
                let block = v.shape()[axis] * inner;
                data.extend_from_slice(&v.data()[o * block..(o + 1) * block]);
            }
        }
        Tensor::new(out_shape, data)?
    };
    let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
    let rg = tape.requires(&ids);
    Ok(tape.push(value, Op::Concat(ids, axis), rg))
}
