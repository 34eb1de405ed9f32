//! Define-by-run tape: every forward op appends a node, `backward` walks the
//! nodes in reverse and accumulates gradient buffers.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::gemm::{gemm, View};
use super::{Parameter, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Padding, stride and dilation of a 1-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub stride: usize,
    pub pad_left: usize,
    pub pad_right: usize,
    pub dilation: usize,
}

impl ConvGeometry {
    pub fn symmetric(stride: usize, padding: usize, dilation: usize) -> Self {
        Self {
            stride,
            pad_left: padding,
            pad_right: padding,
            dilation,
        }
    }

    /// Left-only padding so output step `t` sees inputs `≤ t`, same length.
    pub fn causal(ksize: usize, dilation: usize) -> Self {
        Self {
            stride: 1,
            pad_left: dilation * (ksize.saturating_sub(1)),
            pad_right: 0,
            dilation,
        }
    }

    /// `floor((len + pads − dilation·(ksize−1) − 1)/stride) + 1`, or `None` when
    /// the dilated kernel does not fit in the padded input.
    pub fn output_len(&self, len: usize, ksize: usize) -> Option<usize> {
        let padded = len + self.pad_left + self.pad_right;
        let span = self.dilation * (ksize.checked_sub(1)?) + 1;
        if ksize == 0 || padded < span {
            return None;
        }
        Some((padded - span) / self.stride + 1)
    }
}

enum Op {
    Leaf,
    Linear {
        x: usize,
        w: usize,
        b: usize,
    },
    Conv1d {
        x: usize,
        k: usize,
        bias: Option<usize>,
        geom: ConvGeometry,
        cols: Vec<f64>,
    },
    Relu(usize),
    GlobalAvgPool(usize),
    CrossEntropy {
        logits: usize,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    GradReverse {
        x: usize,
        lambda: f64,
    },
    Identity(usize),
    Add(usize, usize),
    Mul(usize, usize),
    Scale {
        x: usize,
        factor: f64,
    },
    Sum(usize),
    SliceRows {
        x: usize,
        start: usize,
    },
}

impl Op {
    fn inputs(&self) -> Vec<usize> {
        match self {
            Op::Leaf => vec![],
            Op::Linear { x, w, b } => vec![*x, *w, *b],
            Op::Conv1d { x, k, bias, .. } => {
                let mut v = vec![*x, *k];
                v.extend(bias);
                v
            }
            Op::Relu(x) | Op::GlobalAvgPool(x) | Op::Identity(x) | Op::Sum(x) => vec![*x],
            Op::CrossEntropy { logits, .. } => vec![*logits],
            Op::GradReverse { x, .. } | Op::Scale { x, .. } | Op::SliceRows { x, .. } => vec![*x],
            Op::Add(a, b) | Op::Mul(a, b) => vec![*a, *b],
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only record of one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(String, usize)>,
}

/// Gradient buffers produced by [`Tape::backward`], indexed by node.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the root with respect to `var`, if `var` is reachable.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }

    /// Adds the gradient of every bound parameter into its `grad` buffer.
    /// Parameters bound more than once receive the sum over bindings.
    pub fn accumulate_into<'a>(
        &self,
        tape: &Tape,
        params: impl IntoIterator<Item = &'a mut Parameter>,
    ) {
        let mut by_name: HashMap<&str, Vec<usize>> = HashMap::new();
        for (name, id) in &tape.params {
            by_name.entry(name.as_str()).or_default().push(*id);
        }
        for p in params {
            if let Some(ids) = by_name.get(p.name.as_str()) {
                for &id in ids {
                    if let Some(g) = &self.grads[id] {
                        p.grad.add_assign(g);
                    }
                }
            }
        }
    }
}

fn shape_err(op: &'static str, lhs: &Tensor, rhs: &Tensor) -> Error {
    Error::Shape {
        op,
        lhs: lhs.shape().to_vec(),
        rhs: rhs.shape().to_vec(),
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: usize, contribution: Tensor) {
    match &mut grads[id] {
        Some(g) => g.add_assign(&contribution),
        slot @ None => *slot = Some(contribution),
    }
}

/// Shared im2col layout: `cols[b]` is `[c_in·ksize, out_len]`.
struct ConvDims {
    batch: usize,
    c_in: usize,
    len: usize,
    c_out: usize,
    ksize: usize,
    out_len: usize,
}

fn im2col(x: &[f64], d: &ConvDims, g: &ConvGeometry) -> Vec<f64> {
    let rows = d.c_in * d.ksize;
    let mut cols = vec![0.0; d.batch * rows * d.out_len];
    for b in 0..d.batch {
        for ci in 0..d.c_in {
            let src = &x[(b * d.c_in + ci) * d.len..][..d.len];
            for kk in 0..d.ksize {
                let row = &mut cols[(b * rows + ci * d.ksize + kk) * d.out_len..][..d.out_len];
                let offset = (kk * g.dilation) as isize - g.pad_left as isize;
                for (t, slot) in row.iter_mut().enumerate() {
                    let pos = (t * g.stride) as isize + offset;
                    if pos >= 0 && (pos as usize) < d.len {
                        *slot = src[pos as usize];
                    }
                }
            }
        }
    }
    cols
}

fn col2im_add(dcol: &[f64], dx: &mut [f64], b: usize, d: &ConvDims, g: &ConvGeometry) {
    for ci in 0..d.c_in {
        let dst = &mut dx[(b * d.c_in + ci) * d.len..][..d.len];
        for kk in 0..d.ksize {
            let row = &dcol[(ci * d.ksize + kk) * d.out_len..][..d.out_len];
            let offset = (kk * g.dilation) as isize - g.pad_left as isize;
            for (t, &v) in row.iter().enumerate() {
                let pos = (t * g.stride) as isize + offset;
                if pos >= 0 && (pos as usize) < d.len {
                    dst[pos as usize] += v;
                }
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Forward values of every recorded node, in recording order.
    pub fn values(&self) -> impl Iterator<Item = &Tensor> {
        self.nodes.iter().map(|n| &n.value)
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let inputs = op.inputs();
        debug_assert!(inputs.iter().all(|&i| i < self.nodes.len()));
        if cfg!(debug_assertions) && inputs.iter().all(|&i| self.nodes[i].value.is_finite()) {
            debug_assert!(
                value.is_finite(),
                "non-finite forward value from finite inputs"
            );
        }
        let requires_grad = inputs.iter().any(|&i| self.nodes[i].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a leaf. Gradients are only propagated towards leaves created
    /// with `requires_grad`.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Records a copy of a parameter's value as a differentiable leaf and
    /// remembers the binding for [`Gradients::accumulate_into`].
    pub fn param(&mut self, p: &Parameter) -> Var {
        let v = self.leaf(p.value.clone(), true);
        self.params.push((p.name.clone(), v.0));
        v
    }

    /// `out[i,j] = Σ_k x[i,k]·w[j,k] + b[j]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if xv.rank() != 2 || wv.rank() != 2 || xv.shape()[1] != wv.shape()[1] {
            return Err(shape_err("linear", xv, wv));
        }
        let (batch, inp, out) = (xv.shape()[0], xv.shape()[1], wv.shape()[0]);
        if bv.shape() != [out] {
            return Err(shape_err("linear bias", wv, bv));
        }
        let mut data = vec![0.0; batch * out];
        if batch > 0 {
            for row in data.chunks_mut(out) {
                row.copy_from_slice(bv.data());
            }
            gemm(
                View::row_major(xv.data(), batch, inp),
                View::row_major(wv.data(), out, inp).t(),
                1.0,
                &mut data,
            );
        }
        let value = Tensor::new(vec![batch, out], data)?;
        Ok(self.push(
            value,
            Op::Linear {
                x: x.0,
                w: w.0,
                b: b.0,
            },
        ))
    }

    /// Cross-correlation of `x: [batch, c_in, len]` with `k: [c_out, c_in, ksize]`.
    pub fn conv1d(
        &mut self,
        x: Var,
        k: Var,
        stride: usize,
        padding: usize,
        dilation: usize,
    ) -> Result<Var> {
        self.conv1d_with(
            x,
            k,
            None,
            ConvGeometry::symmetric(stride, padding, dilation),
        )
    }

    /// Convolution with optional per-output-channel bias and arbitrary padding.
    pub fn conv1d_with(
        &mut self,
        x: Var,
        k: Var,
        bias: Option<Var>,
        geom: ConvGeometry,
    ) -> Result<Var> {
        if geom.stride == 0 || geom.dilation == 0 {
            return Err(Error::Config(format!(
                "conv1d stride and dilation must be ≥ 1, got {geom:?}"
            )));
        }
        let (xv, kv) = (self.value(x), self.value(k));
        if xv.rank() != 3 || kv.rank() != 3 || xv.shape()[1] != kv.shape()[1] {
            return Err(shape_err("conv1d", xv, kv));
        }
        let mut dims = ConvDims {
            batch: xv.shape()[0],
            c_in: xv.shape()[1],
            len: xv.shape()[2],
            c_out: kv.shape()[0],
            ksize: kv.shape()[2],
            out_len: 0,
        };
        dims.out_len = geom
            .output_len(dims.len, dims.ksize)
            .filter(|&n| n >= 1)
            .ok_or(Error::DegenerateOutput {
                op: "conv1d",
                len: dims.len,
            })?;
        if let Some(b) = bias {
            let bv = self.value(b);
            if bv.shape() != [dims.c_out] {
                return Err(shape_err("conv1d bias", kv, bv));
            }
        }
        let cols = im2col(xv.data(), &dims, &geom);
        let rows = dims.c_in * dims.ksize;
        let plane = dims.c_out * dims.out_len;
        let mut out = vec![0.0; dims.batch * plane];
        let wview = View::row_major(kv.data(), dims.c_out, rows);
        for b in 0..dims.batch {
            let col = View::row_major(&cols[b * rows * dims.out_len..], rows, dims.out_len);
            gemm(wview, col, 0.0, &mut out[b * plane..][..plane]);
        }
        if let Some(bvar) = bias {
            let bv = self.value(bvar).data();
            for chunk in out.chunks_mut(dims.out_len).enumerate() {
                let (idx, row) = chunk;
                let c = idx % dims.c_out;
                row.iter_mut().for_each(|v| *v += bv[c]);
            }
        }
        let value = Tensor::new(vec![dims.batch, dims.c_out, dims.out_len], out)?;
        Ok(self.push(
            value,
            Op::Conv1d {
                x: x.0,
                k: k.0,
                bias: bias.map(|b| b.0),
                geom,
                cols,
            },
        ))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let data = xv
            .data()
            .iter()
            .map(|&v| if v > 0.0 { v } else { 0.0 })
            .collect();
        let value = Tensor::new(xv.shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Relu(x.0))
    }

    /// Mean over the trailing (time) axis of `[batch, ch, len]`.
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.rank() != 3 || xv.shape()[2] == 0 {
            return Err(Error::Shape {
                op: "global_avg_pool",
                lhs: xv.shape().to_vec(),
                rhs: vec![],
            });
        }
        let (b, c, len) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
        let data = xv
            .data()
            .chunks(len)
            .map(|row| row.iter().sum::<f64>() / len as f64)
            .collect();
        let value = Tensor::new(vec![b, c], data)?;
        Ok(self.push(value, Op::GlobalAvgPool(x.0)))
    }

    /// Mean negative log-softmax of the labelled entries.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        if lv.rank() != 2 || lv.shape()[0] != labels.len() || lv.shape()[0] == 0 {
            return Err(Error::Shape {
                op: "cross_entropy",
                lhs: lv.shape().to_vec(),
                rhs: vec![labels.len()],
            });
        }
        let classes = lv.shape()[1];
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::Index {
                what: "class label",
                index: bad,
                bound: classes,
            });
        }
        let mut probs = vec![0.0; lv.len()];
        let mut total = 0.0;
        for ((row, p), &y) in lv
            .data()
            .chunks(classes)
            .zip(probs.chunks_mut(classes))
            .zip(labels)
        {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (pi, &v) in p.iter_mut().zip(row) {
                *pi = (v - max).exp();
                z += *pi;
            }
            p.iter_mut().for_each(|pi| *pi /= z);
            total += -(row[y] - max - z.ln());
        }
        let value = Tensor::scalar(total / labels.len() as f64);
        Ok(self.push(
            value,
            Op::CrossEntropy {
                logits: logits.0,
                labels: labels.to_vec(),
                probs,
            },
        ))
    }

    /// Identity forward; backward multiplies the upstream gradient by `−lambda`.
    pub fn grad_reverse(&mut self, x: Var, lambda: f64) -> Result<Var> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::Contract(format!(
                "gradient reversal weight must be finite and ≥ 0, got {lambda}"
            )));
        }
        let value = self.value(x).clone();
        Ok(self.push(value, Op::GradReverse { x: x.0, lambda }))
    }

    /// Plain identity node; the unreversed counterpart of `grad_reverse`.
    pub fn identity(&mut self, x: Var) -> Var {
        let value = self.value(x).clone();
        self.push(value, Op::Identity(x.0))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("add", av, bv));
        }
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(x, y)| x + y)
            .collect();
        let value = Tensor::new(av.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Add(a.0, b.0)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("mul", av, bv));
        }
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(x, y)| x * y)
            .collect();
        let value = Tensor::new(av.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Mul(a.0, b.0)))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let value = self.value(x).scale(factor);
        self.push(value, Op::Scale { x: x.0, factor })
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).data().iter().sum());
        self.push(value, Op::Sum(x.0))
    }

    /// Rows `start..end` along the leading (batch) axis.
    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let value = self.value(x).slice_rows(start, end)?;
        Ok(self.push(value, Op::SliceRows { x: x.0, start }))
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let Some(node) = self.nodes.get(root.0) else {
            return Err(Error::Contract(format!(
                "node {} is not on this tape",
                root.0
            )));
        };
        if node.value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar root, got shape {:?}",
                node.value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::full(node.value.shape(), 1.0));

        for id in (0..=root.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, id: usize) -> bool {
        self.nodes[id].requires_grad
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match &node.op {
            Op::Leaf => {}
            Op::Linear { x, w, b } => {
                let (xv, wv) = (&self.nodes[*x].value, &self.nodes[*w].value);
                let (batch, inp, out) = (xv.shape()[0], xv.shape()[1], wv.shape()[0]);
                let gview = View::row_major(g.data(), batch, out);
                if self.wants(*x) {
                    let mut dx = vec![0.0; batch * inp];
                    gemm(gview, View::row_major(wv.data(), out, inp), 0.0, &mut dx);
                    accumulate(grads, *x, Tensor::new(vec![batch, inp], dx).unwrap());
                }
                if self.wants(*w) {
                    let mut dw = vec![0.0; out * inp];
                    gemm(
                        gview.t(),
                        View::row_major(xv.data(), batch, inp),
                        0.0,
                        &mut dw,
                    );
                    accumulate(grads, *w, Tensor::new(vec![out, inp], dw).unwrap());
                }
                if self.wants(*b) {
                    let mut db = vec![0.0; out];
                    for row in g.data().chunks(out) {
                        db.iter_mut().zip(row).for_each(|(d, v)| *d += v);
                    }
                    accumulate(grads, *b, Tensor::new(vec![out], db).unwrap());
                }
            }
            Op::Conv1d {
                x,
                k,
                bias,
                geom,
                cols,
            } => {
                let (xv, kv) = (&self.nodes[*x].value, &self.nodes[*k].value);
                let d = ConvDims {
                    batch: xv.shape()[0],
                    c_in: xv.shape()[1],
                    len: xv.shape()[2],
                    c_out: kv.shape()[0],
                    ksize: kv.shape()[2],
                    out_len: node.value.shape()[2],
                };
                let rows = d.c_in * d.ksize;
                let plane = d.c_out * d.out_len;
                if self.wants(*k) {
                    let mut dk = vec![0.0; d.c_out * rows];
                    for b in 0..d.batch {
                        let gb = View::row_major(&g.data()[b * plane..], d.c_out, d.out_len);
                        let col = View::row_major(&cols[b * rows * d.out_len..], rows, d.out_len);
                        gemm(gb, col.t(), if b == 0 { 0.0 } else { 1.0 }, &mut dk);
                    }
                    accumulate(grads, *k, Tensor::new(kv.shape().to_vec(), dk).unwrap());
                }
                if self.wants(*x) {
                    let mut dx = vec![0.0; xv.len()];
                    let mut dcol = vec![0.0; rows * d.out_len];
                    let wt = View::row_major(kv.data(), d.c_out, rows).t();
                    for b in 0..d.batch {
                        let gb = View::row_major(&g.data()[b * plane..], d.c_out, d.out_len);
                        gemm(wt, gb, 0.0, &mut dcol);
                        col2im_add(&dcol, &mut dx, b, &d, geom);
                    }
                    accumulate(grads, *x, Tensor::new(xv.shape().to_vec(), dx).unwrap());
                }
                if let Some(bias) = bias.filter(|&b| self.wants(b)) {
                    let mut db = vec![0.0; d.c_out];
                    for (idx, row) in g.data().chunks(d.out_len).enumerate() {
                        db[idx % d.c_out] += row.iter().sum::<f64>();
                    }
                    accumulate(grads, bias, Tensor::new(vec![d.c_out], db).unwrap());
                }
            }
            Op::Relu(x) => {
                let xv = &self.nodes[*x].value;
                let data = xv
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&v, &gv)| if v > 0.0 { gv } else { 0.0 })
                    .collect();
                accumulate(grads, *x, Tensor::new(xv.shape().to_vec(), data).unwrap());
            }
            Op::GlobalAvgPool(x) => {
                let xv = &self.nodes[*x].value;
                let len = xv.shape()[2];
                let mut data = vec![0.0; xv.len()];
                for (row, &gv) in data.chunks_mut(len).zip(g.data()) {
                    row.fill(gv / len as f64);
                }
                accumulate(grads, *x, Tensor::new(xv.shape().to_vec(), data).unwrap());
            }
            Op::CrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let lv = &self.nodes[*logits].value;
                let classes = lv.shape()[1];
                let scale = g.item() / labels.len() as f64;
                let mut data = probs.clone();
                for (row, &y) in data.chunks_mut(classes).zip(labels) {
                    row[y] -= 1.0;
                    row.iter_mut().for_each(|v| *v *= scale);
                }
                accumulate(
                    grads,
                    *logits,
                    Tensor::new(lv.shape().to_vec(), data).unwrap(),
                );
            }
            Op::GradReverse { x, lambda } => {
                if self.wants(*x) {
                    accumulate(grads, *x, g.scale(-*lambda));
                }
            }
            Op::Identity(x) => {
                if self.wants(*x) {
                    accumulate(grads, *x, g.clone());
                }
            }
            Op::Add(a, b) => {
                for &i in [a, b] {
                    if self.wants(i) {
                        accumulate(grads, i, g.clone());
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (&self.nodes[*a].value, &self.nodes[*b].value);
                if self.wants(*a) {
                    let data = g.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
                    accumulate(grads, *a, Tensor::new(av.shape().to_vec(), data).unwrap());
                }
                if self.wants(*b) {
                    let data = g.data().iter().zip(av.data()).map(|(x, y)| x * y).collect();
                    accumulate(grads, *b, Tensor::new(bv.shape().to_vec(), data).unwrap());
                }
            }
            Op::Scale { x, factor } => {
                if self.wants(*x) {
                    accumulate(grads, *x, g.scale(*factor));
                }
            }
            Op::Sum(x) => {
                let xv = &self.nodes[*x].value;
                accumulate(grads, *x, Tensor::full(xv.shape(), g.item()));
            }
            Op::SliceRows { x, start } => {
                if self.wants(*x) {
                    let xv = &self.nodes[*x].value;
                    let stride = xv.len() / xv.shape()[0].max(1);
                    let mut full = Tensor::zeros(xv.shape());
                    full.data_mut()[start * stride..][..g.len()].copy_from_slice(g.data());
                    accumulate(grads, *x, full);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn linear_examples() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[1, 2], &[1.0, 2.0]));
        let w = tape.constant(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let b = tape.constant(t(&[2], &[0.0, 0.0]));
        let y = tape.linear(x, w, b).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 2.0]);

        let w = tape.constant(t(&[1, 2], &[3.0, 4.0]));
        let b = tape.constant(t(&[1], &[1.0]));
        let y = tape.linear(x, w, b).unwrap();
        assert_eq!(tape.value(y).data(), &[12.0]);

        let w = tape.constant(Tensor::zeros(&[3, 2]));
        let b = tape.constant(Tensor::zeros(&[3]));
        let y = tape.linear(x, w, b).unwrap();
        assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[1, 3]));
        let w = tape.constant(Tensor::zeros(&[2, 2]));
        let b = tape.constant(Tensor::zeros(&[2]));
        let msg = tape.linear(x, w, b).unwrap_err().to_string();
        assert!(msg.contains("[1, 3]") && msg.contains("[2, 2]"), "{msg}");
    }

    #[test]
    fn conv_examples() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[1, 1, 4], &[1.0, 2.0, 3.0, 4.0]));
        let k = tape.constant(t(&[1, 1, 3], &[1.0, 0.0, -1.0]));
        let y = tape.conv1d(x, k, 1, 0, 1).unwrap();
        assert_eq!(tape.value(y).data(), &[-2.0, -2.0]);

        let x = tape.constant(t(&[1, 1, 5], &[1.0, 2.0, 3.0, 4.0, 5.0]));
        let k = tape.constant(t(&[1, 1, 2], &[1.0, 1.0]));
        let y = tape.conv1d(x, k, 1, 0, 2).unwrap();
        assert_eq!(tape.value(y).data(), &[4.0, 6.0, 8.0]);

        let x = tape.constant(t(&[1, 1, 5], &[0.5, -1.0, 2.0, 3.5, 7.0]));
        let k = tape.constant(t(&[1, 1, 5], &[0.0, 0.0, 1.0, 0.0, 0.0]));
        let y = tape.conv1d(x, k, 1, 2, 1).unwrap();
        assert_eq!(tape.value(y).data(), tape.value(x).data());
    }

    #[test]
    fn conv_degenerate_output_is_an_error() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[1, 1, 2]));
        let k = tape.constant(Tensor::zeros(&[1, 1, 3]));
        assert!(matches!(
            tape.conv1d(x, k, 1, 0, 1),
            Err(Error::DegenerateOutput { .. })
        ));
    }

    #[test]
    fn relu_and_pool() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[3], &[-1.0, 0.0, 2.0]));
        let y = tape.relu(x);
        assert_eq!(tape.value(y).data(), &[0.0, 0.0, 2.0]);

        let x = tape.constant(t(&[1, 1, 3], &[1.0, 2.0, 3.0]));
        let p = tape.global_avg_pool(x).unwrap();
        assert_eq!(tape.value(p).shape(), &[1, 1]);
        assert_eq!(tape.value(p).data(), &[2.0]);

        let x = tape.constant(t(&[2, 3, 1], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let p = tape.global_avg_pool(x).unwrap();
        assert_eq!(tape.value(p).shape(), &[2, 3]);
        assert_eq!(tape.value(p).data(), tape.value(x).data());
    }

    #[test]
    fn cross_entropy_examples() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::full(&[1, 9], 0.3));
        let l = tape.cross_entropy(z, &[4]).unwrap();
        assert!((tape.value(l).item() - 9f64.ln()).abs() < 1e-12);

        let z = tape.constant(t(&[1, 3], &[50.0, 0.0, 0.0]));
        let l = tape.cross_entropy(z, &[0]).unwrap();
        assert!(tape.value(l).item() < 1e-10);

        let rows = [[0.2, -1.0, 0.7], [1.5, 0.1, -0.4]];
        let z = tape.constant(t(&[2, 3], &[0.2, -1.0, 0.7, 1.5, 0.1, -0.4]));
        let both = tape.cross_entropy(z, &[2, 1]).unwrap();
        let z0 = tape.constant(t(&[1, 3], &rows[0]));
        let a = tape.cross_entropy(z0, &[2]).unwrap();
        let z1 = tape.constant(t(&[1, 3], &rows[1]));
        let b = tape.cross_entropy(z1, &[1]).unwrap();
        let mean = 0.5 * (tape.value(a).item() + tape.value(b).item());
        assert!((tape.value(both).item() - mean).abs() < 1e-12);

        assert!(matches!(
            tape.cross_entropy(z, &[0, 3]),
            Err(Error::Index { .. })
        ));
    }

    #[test]
    fn grl_forward_and_backward() {
        let x0 = t(&[2, 2], &[0.1, -2.0, 3.5, 0.0]);
        for lambda in [0.0, 1.0] {
            let mut tape = Tape::new();
            let x = tape.leaf(x0.clone(), true);
            let r = tape.grad_reverse(x, lambda).unwrap();
            assert_eq!(tape.value(r), &x0);
            let s = tape.sum(r);
            let g = tape.backward(s).unwrap();
            let gx = g.get(x).unwrap();
            let expected = if lambda == 0.0 { 0.0 } else { -1.0 };
            assert!(gx.data().iter().all(|&v| v == expected));
        }
        let mut tape = Tape::new();
        let x = tape.constant(x0);
        assert!(tape.grad_reverse(x, -0.5).is_err());
        assert!(tape.grad_reverse(x, f64::NAN).is_err());
    }

    #[test]
    fn backward_needs_scalar_root() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(&[2]), true);
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn sum_of_product_gives_constant_as_gradient() {
        let mut tape = Tape::new();
        let w = tape.leaf(t(&[3], &[0.5, 0.5, 0.5]), true);
        let x = tape.constant(t(&[3], &[1.0, -2.0, 4.0]));
        let p = tape.mul(w, x).unwrap();
        let s = tape.sum(p);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(w).unwrap().data(), &[1.0, -2.0, 4.0]);
        assert!(g.get(x).is_none());
    }

    #[test]
    fn repeated_parameter_bindings_sum() {
        let mut p = Parameter::new("w", t(&[2], &[1.0, 2.0]));
        let mut tape = Tape::new();
        let a = tape.param(&p);
        let b = tape.param(&p);
        let s = tape.mul(a, b).unwrap();
        let root = tape.sum(s);
        let g = tape.backward(root).unwrap();
        g.accumulate_into(&tape, [&mut p]);
        assert_eq!(p.grad.data(), &[2.0, 4.0]);
    }
}
