//! Tape-based reverse-mode differentiation.
//!
//! Every op appends a node holding its output and whatever it needs for the
//! backward pass. [`Graph::backward`] walks the tape from the loss node back
//! to the first node.

use super::{ParamId, ParameterSet, Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Backward rule for a single-input op defined outside this module.
pub trait UnaryBackward<T>: Send {
    fn name(&self) -> &'static str;

    /// Gradient with respect to the op's input given the upstream gradient.
    fn backward(&self, upstream: &[T]) -> Vec<T>;
}

#[derive(Debug, Clone, Copy)]
struct ConvGeometry {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    f: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
    ho: usize,
    wo: usize,
}

impl ConvGeometry {
    fn patch(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn out_plane(&self) -> usize {
        self.ho * self.wo
    }
}

enum Op<T> {
    Input,
    Param(ParamId),
    Conv2d {
        input: Var,
        kernels: Var,
        bias: Var,
        geom: ConvGeometry,
        // im2col buffers for the whole batch, kept for the kernel gradient.
        cols: Vec<T>,
    },
    MaxPool2 {
        input: Var,
        argmax: Vec<usize>,
    },
    Relu {
        input: Var,
    },
    Dense {
        input: Var,
        weights: Var,
        bias: Var,
    },
    Reshape {
        input: Var,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<T>,
    },
    SumSquares {
        input: Var,
    },
    Add {
        lhs: Var,
        rhs: Var,
    },
    Custom {
        input: Var,
        rule: Box<dyn UnaryBackward<T>>,
    },
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::Conv2d { .. } => "conv2d",
            Op::MaxPool2 { .. } => "maxpool2",
            Op::Relu { .. } => "relu",
            Op::Dense { .. } => "dense",
            Op::Reshape { .. } => "reshape",
            Op::SoftmaxCrossEntropy { .. } => "softmax_cross_entropy",
            Op::SumSquares { .. } => "sum_squares",
            Op::Add { .. } => "add",
            Op::Custom { rule, .. } => rule.name(),
        }
    }
}

struct Node<T> {
    value: Tensor<T>,
    grad: Option<Vec<T>>,
    requires_grad: bool,
    op: Op<T>,
}

/// A recorded computation.
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    record_grad: bool,
    visited: Vec<usize>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Graph::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            record_grad: true,
            visited: Vec::new(),
        }
    }

    /// A graph that keeps no backward state. Calling `backward` on it fails.
    pub fn inference() -> Self {
        Graph {
            record_grad: false,
            ..Graph::new()
        }
    }

    pub fn records_grad(&self) -> bool {
        self.record_grad
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

    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].grad.as_deref()
    }

    /// Op names in recording order.
    pub fn op_names(&self) -> Vec<&'static str> {
        self.nodes.iter().map(|n| n.op.name()).collect()
    }

    pub fn count_ops(&self, name: &str) -> usize {
        self.nodes.iter().filter(|n| n.op.name() == name).count()
    }

    /// Node indices in the order the last backward pass processed them.
    pub fn backward_trace(&self) -> &[usize] {
        &self.visited
    }

    fn push(&mut self, value: Tensor<T>, requires_grad: bool, op: Op<T>) -> Var {
        let requires_grad = requires_grad && self.record_grad;
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn input(&mut self, value: Tensor<T>) -> Var {
        self.push(value, false, Op::Input)
    }

    /// Places a parameter on the tape. Its gradient is delivered back with
    /// [`Graph::accumulate_param_grads`].
    pub fn param(&mut self, params: &ParameterSet<T>, id: ParamId) -> Var {
        let mut value = params.get(id).clone();
        value.set_grad(None).expect("clearing never fails");
        self.push(value, true, Op::Param(id))
    }

    /// Cross-correlation of `[N,C,H,W]` input with `[F,C,kH,kW]` kernels.
    pub fn conv2d(
        &mut self,
        input: Var,
        kernels: Var,
        bias: Var,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let is = self.shape(input).to_vec();
        let ks = self.shape(kernels).to_vec();
        let bs = self.shape(bias).to_vec();
        if is.len() != 4 || ks.len() != 4 {
            return Err(Error::Shape(format!(
                "conv2d expects 4-d input and kernels, got input {is:?} and kernels {ks:?}"
            )));
        }
        let (n, c, h, w) = (is[0], is[1], is[2], is[3]);
        let (f, kc, kh, kw) = (ks[0], ks[1], ks[2], ks[3]);
        if kc != c {
            return Err(Error::Shape(format!(
                "conv2d input channels {c} do not match kernel channels {kc}"
            )));
        }
        if bs != [f] {
            return Err(Error::Shape(format!(
                "conv2d bias shape {bs:?} does not match filter count {f}"
            )));
        }
        if stride == 0 {
            return Err(Error::Shape("conv2d stride must be positive".into()));
        }
        if kh > h + 2 * padding || kw > w + 2 * padding {
            return Err(Error::Shape(format!(
                "conv2d kernel {kh}x{kw} exceeds padded input {}x{}",
                h + 2 * padding,
                w + 2 * padding
            )));
        }
        let (span_h, span_w) = (h + 2 * padding - kh, w + 2 * padding - kw);
        if span_h % stride != 0 || span_w % stride != 0 {
            return Err(Error::Shape(format!(
                "conv2d stride {stride} does not divide padded spans {span_h} (height) and {span_w} (width)"
            )));
        }
        let geom = ConvGeometry {
            n,
            c,
            h,
            w,
            f,
            kh,
            kw,
            stride,
            padding,
            ho: span_h / stride + 1,
            wo: span_w / stride + 1,
        };
        let keep_cols = self.record_grad && self.needs(kernels);
        let (out, cols) = {
            let x = self.value(input).values();
            let k = self.value(kernels).values();
            let b = self.value(bias).values();
            conv_forward(&geom, x, k, b, keep_cols)
        };
        let value = Tensor::new(vec![n, f, geom.ho, geom.wo], out)?;
        let rg = self.needs(input) || self.needs(kernels) || self.needs(bias);
        Ok(self.push(
            value,
            rg,
            Op::Conv2d {
                input,
                kernels,
                bias,
                geom,
                cols,
            },
        ))
    }

    /// 2x2 max pooling with stride 2. Odd trailing rows/columns are padded
    /// with negative infinity.
    pub fn maxpool2(&mut self, input: Var) -> Result<Var> {
        let s = self.shape(input).to_vec();
        if s.len() != 4 {
            return Err(Error::Shape(format!("maxpool2 expects 4-d input, got {s:?}")));
        }
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        let (ho, wo) = (h.div_ceil(2), w.div_ceil(2));
        let x = self.value(input).values();
        let mut out = Vec::with_capacity(n * c * ho * wo);
        let mut argmax = Vec::with_capacity(n * c * ho * wo);
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut best_idx = base + 2 * oy * w + 2 * ox;
                    let mut best = x[best_idx];
                    for dy in 0..2 {
                        let iy = 2 * oy + dy;
                        if iy >= h {
                            continue;
                        }
                        for dx in 0..2 {
                            let ix = 2 * ox + dx;
                            if ix >= w {
                                continue;
                            }
                            let idx = base + iy * w + ix;
                            // strict comparison keeps the first maximum on ties
                            if x[idx] > best {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out.push(best);
                    argmax.push(best_idx);
                }
            }
        }
        let value = Tensor::new(vec![n, c, ho, wo], out)?;
        let rg = self.needs(input);
        if !(rg && self.record_grad) {
            argmax = Vec::new();
        }
        Ok(self.push(value, rg, Op::MaxPool2 { input, argmax }))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let src = self.value(input);
        let values = src.values().iter().map(|&v| v.max(T::zero())).collect();
        let value = Tensor::new(src.shape().to_vec(), values).expect("same shape");
        let rg = self.needs(input);
        self.push(value, rg, Op::Relu { input })
    }

    /// `input [N,D] x weights [D,K] + bias [K]`.
    pub fn dense(&mut self, input: Var, weights: Var, bias: Var) -> Result<Var> {
        let is = self.shape(input).to_vec();
        let ws = self.shape(weights).to_vec();
        let bs = self.shape(bias).to_vec();
        if is.len() != 2 || ws.len() != 2 || is[1] != ws[0] || bs != [ws[1]] {
            return Err(Error::Shape(format!(
                "dense: input {is:?}, weights {ws:?}, bias {bs:?} are incompatible"
            )));
        }
        let (n, d, k) = (is[0], is[1], ws[1]);
        let mut out = Vec::with_capacity(n * k);
        let b = self.value(bias).values();
        for _ in 0..n {
            out.extend_from_slice(b);
        }
        T::gemm(
            n,
            d,
            k,
            T::one(),
            self.value(input).values(),
            false,
            self.value(weights).values(),
            false,
            T::one(),
            &mut out,
        );
        let value = Tensor::new(vec![n, k], out)?;
        let rg = self.needs(input) || self.needs(weights) || self.needs(bias);
        Ok(self.push(
            value,
            rg,
            Op::Dense {
                input,
                weights,
                bias,
            },
        ))
    }

    pub fn reshape(&mut self, input: Var, shape: Vec<usize>) -> Result<Var> {
        let value = self.value(input).reshape(shape)?;
        let rg = self.needs(input);
        Ok(self.push(value, rg, Op::Reshape { input }))
    }

    /// Collapses everything after the leading axis.
    pub fn flatten(&mut self, input: Var) -> Result<Var> {
        let s = self.shape(input);
        let n = s[0];
        let d = s[1..].iter().product();
        self.reshape(input, vec![n, d])
    }

    /// Mean categorical cross-entropy over the batch. Returns the scalar loss
    /// node; [`Graph::probabilities`] exposes the softmax rows.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let s = self.shape(logits).to_vec();
        if s.len() != 2 || s[0] != labels.len() {
            return Err(Error::Shape(format!(
                "softmax_cross_entropy: logits {s:?} with {} labels",
                labels.len()
            )));
        }
        let (n, k) = (s[0], s[1]);
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} out of range for {k} classes"
            )));
        }
        let (loss, probs) = softmax_ce_forward(self.value(logits).values(), labels, n, k);
        let rg = self.needs(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            rg,
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
        ))
    }

    /// Softmax rows recorded by a cross-entropy node.
    pub fn probabilities(&self, loss: Var) -> Option<&[T]> {
        match &self.nodes[loss.0].op {
            Op::SoftmaxCrossEntropy { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Scalar sum of squared entries.
    pub fn sum_squares(&mut self, input: Var) -> Var {
        let s: T = self.value(input).values().iter().map(|&v| v * v).sum();
        let rg = self.needs(input);
        self.push(Tensor::scalar(s), rg, Op::SumSquares { input })
    }

    /// Element-wise sum of two same-shaped nodes.
    pub fn add(&mut self, lhs: Var, rhs: Var) -> Result<Var> {
        if self.shape(lhs) != self.shape(rhs) {
            return Err(Error::Shape(format!(
                "add: {:?} vs {:?}",
                self.shape(lhs),
                self.shape(rhs)
            )));
        }
        let values = self
            .value(lhs)
            .values()
            .iter()
            .zip(self.value(rhs).values())
            .map(|(&a, &b)| a + b)
            .collect();
        let value = Tensor::new(self.shape(lhs).to_vec(), values)?;
        let rg = self.needs(lhs) || self.needs(rhs);
        Ok(self.push(value, rg, Op::Add { lhs, rhs }))
    }

    /// Records an op computed elsewhere, with its own backward rule.
    pub fn custom(
        &mut self,
        input: Var,
        output: Tensor<T>,
        rule: Box<dyn UnaryBackward<T>>,
    ) -> Var {
        let rg = self.needs(input);
        self.push(output, rg, Op::Custom { input, rule })
    }

    /// Reverse pass from a scalar node. Clears any previous gradients first,
    /// so repeated calls on the same graph give identical results.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.record_grad {
            return Err(Error::InvalidParameter(
                "backward called on an inference graph".into(),
            ));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar, got shape {:?}",
                self.shape(loss)
            )));
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.visited.clear();
        self.nodes[loss.0].grad = Some(vec![T::one()]);
        for idx in (0..=loss.0).rev() {
            self.visited.push(idx);
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(upstream) = self.nodes[idx].grad.take() else {
                continue;
            };
            self.backprop_node(idx, &upstream)?;
            self.nodes[idx].grad = Some(upstream);
        }
        Ok(())
    }

    fn add_grad(&mut self, target: Var, grad: Vec<T>) {
        let node = &mut self.nodes[target.0];
        if !node.requires_grad {
            return;
        }
        match &mut node.grad {
            Some(g) => g.iter_mut().zip(grad).for_each(|(a, b)| *a += b),
            None => node.grad = Some(grad),
        }
    }

    fn backprop_node(&mut self, idx: usize, up: &[T]) -> Result<()> {
        // Each arm reads its inputs immutably, then deposits gradients.
        let mut deposits: Vec<(Var, Vec<T>)> = Vec::with_capacity(3);
        match &self.nodes[idx].op {
            Op::Input | Op::Param(_) => {}
            Op::Conv2d {
                input,
                kernels,
                bias,
                geom,
                cols,
            } => {
                let k = self.value(*kernels).values();
                let (dx, dk, db) = conv_backward(
                    geom,
                    up,
                    k,
                    cols,
                    self.needs(*input),
                    self.needs(*kernels),
                    self.needs(*bias),
                );
                if let Some(dx) = dx {
                    deposits.push((*input, dx));
                }
                if let Some(dk) = dk {
                    deposits.push((*kernels, dk));
                }
                if let Some(db) = db {
                    deposits.push((*bias, db));
                }
            }
            Op::MaxPool2 { input, argmax } => {
                let mut dx = vec![T::zero(); self.value(*input).len()];
                for (g, &src) in up.iter().zip(argmax) {
                    dx[src] += *g;
                }
                deposits.push((*input, dx));
            }
            Op::Relu { input } => {
                let x = self.value(*input).values();
                let dx = x
                    .iter()
                    .zip(up)
                    .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
                    .collect();
                deposits.push((*input, dx));
            }
            Op::Dense {
                input,
                weights,
                bias,
            } => {
                let xs = self.shape(*input);
                let (n, d) = (xs[0], xs[1]);
                let k = self.shape(*weights)[1];
                if self.needs(*input) {
                    let mut dx = vec![T::zero(); n * d];
                    T::gemm(
                        n,
                        k,
                        d,
                        T::one(),
                        up,
                        false,
                        self.value(*weights).values(),
                        true,
                        T::zero(),
                        &mut dx,
                    );
                    deposits.push((*input, dx));
                }
                if self.needs(*weights) {
                    let mut dw = vec![T::zero(); d * k];
                    T::gemm(
                        d,
                        n,
                        k,
                        T::one(),
                        self.value(*input).values(),
                        true,
                        up,
                        false,
                        T::zero(),
                        &mut dw,
                    );
                    deposits.push((*weights, dw));
                }
                if self.needs(*bias) {
                    let mut db = vec![T::zero(); k];
                    for row in up.chunks_exact(k) {
                        db.iter_mut().zip(row).for_each(|(a, &b)| *a += b);
                    }
                    deposits.push((*bias, db));
                }
            }
            Op::Reshape { input } => deposits.push((*input, up.to_vec())),
            Op::SoftmaxCrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let n = labels.len();
                let k = probs.len() / n;
                let scale = up[0] / T::from_usize(n).expect("batch size fits");
                let mut dl = probs.clone();
                for (i, &label) in labels.iter().enumerate() {
                    dl[i * k + label] -= T::one();
                }
                dl.iter_mut().for_each(|v| *v *= scale);
                deposits.push((*logits, dl));
            }
            Op::SumSquares { input } => {
                let two = T::from_f64_lossy(2.0);
                let dx = self
                    .value(*input)
                    .values()
                    .iter()
                    .map(|&v| two * v * up[0])
                    .collect();
                deposits.push((*input, dx));
            }
            Op::Add { lhs, rhs } => {
                deposits.push((*lhs, up.to_vec()));
                deposits.push((*rhs, up.to_vec()));
            }
            Op::Custom { input, rule } => deposits.push((*input, rule.backward(up))),
        }
        for (target, grad) in deposits {
            self.add_grad(target, grad);
        }
        Ok(())
    }

    /// Adds the gradients of every parameter node into `params`.
    pub fn accumulate_param_grads(&self, params: &mut ParameterSet<T>) -> Result<()> {
        for node in &self.nodes {
            if let Op::Param(id) = node.op {
                let g = match &node.grad {
                    Some(g) => g.clone(),
                    None => vec![T::zero(); node.value.len()],
                };
                params.accumulate_grad(id, &g)?;
            }
        }
        Ok(())
    }
}

fn conv_forward<T: Real>(
    g: &ConvGeometry,
    x: &[T],
    k: &[T],
    b: &[T],
    keep_cols: bool,
) -> (Vec<T>, Vec<T>) {
    let patch = g.patch();
    let plane = g.out_plane();
    let in_sample = g.c * g.h * g.w;
    let out_sample = g.f * plane;
    let mut out = vec![T::zero(); g.n * out_sample];
    let mut all_cols = if keep_cols {
        vec![T::zero(); g.n * patch * plane]
    } else {
        Vec::new()
    };
    let mut scratch = vec![T::zero(); patch * plane];
    for s in 0..g.n {
        let cols: &mut [T] = if keep_cols {
            &mut all_cols[s * patch * plane..(s + 1) * patch * plane]
        } else {
            &mut scratch
        };
        im2col(g, &x[s * in_sample..(s + 1) * in_sample], cols);
        let o = &mut out[s * out_sample..(s + 1) * out_sample];
        for (fi, row) in o.chunks_exact_mut(plane).enumerate() {
            row.iter_mut().for_each(|v| *v = b[fi]);
        }
        T::gemm(g.f, patch, plane, T::one(), k, false, cols, false, T::one(), o);
    }
    (out, all_cols)
}

fn im2col<T: Real>(g: &ConvGeometry, x: &[T], cols: &mut [T]) {
    let plane = g.out_plane();
    let pad = g.padding as isize;
    let mut row = 0;
    for ci in 0..g.c {
        let chan = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + ki) as isize - pad;
                    let line = &mut dst[oy * g.wo..(oy + 1) * g.wo];
                    if iy < 0 || iy >= g.h as isize {
                        line.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &chan[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - pad;
                        *v = if ix < 0 || ix >= g.w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
                row += 1;
            }
        }
    }
}

fn col2im_add<T: Real>(g: &ConvGeometry, cols: &[T], dx: &mut [T]) {
    let plane = g.out_plane();
    let pad = g.padding as isize;
    let mut row = 0;
    for ci in 0..g.c {
        let chan = &mut dx[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let src = &cols[row * plane..(row + 1) * plane];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + ki) as isize - pad;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    for ox in 0..g.wo {
                        let ix = (ox * g.stride + kj) as isize - pad;
                        if ix >= 0 && ix < g.w as isize {
                            chan[iy as usize * g.w + ix as usize] += src[oy * g.wo + ox];
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

type ConvGrads<T> = (Option<Vec<T>>, Option<Vec<T>>, Option<Vec<T>>);

fn conv_backward<T: Real>(
    g: &ConvGeometry,
    up: &[T],
    k: &[T],
    cols: &[T],
    want_x: bool,
    want_k: bool,
    want_b: bool,
) -> ConvGrads<T> {
    let patch = g.patch();
    let plane = g.out_plane();
    let out_sample = g.f * plane;
    let in_sample = g.c * g.h * g.w;

    let db = want_b.then(|| {
        let mut db = vec![T::zero(); g.f];
        for s in 0..g.n {
            for (fi, row) in up[s * out_sample..(s + 1) * out_sample]
                .chunks_exact(plane)
                .enumerate()
            {
                db[fi] += row.iter().copied().sum::<T>();
            }
        }
        db
    });

    let dk = want_k.then(|| {
        let mut dk = vec![T::zero(); g.f * patch];
        for s in 0..g.n {
            T::gemm(
                g.f,
                plane,
                patch,
                T::one(),
                &up[s * out_sample..(s + 1) * out_sample],
                false,
                &cols[s * patch * plane..(s + 1) * patch * plane],
                true,
                T::one(),
                &mut dk,
            );
        }
        dk
    });

    let dx = want_x.then(|| {
        let mut dx = vec![T::zero(); g.n * in_sample];
        let mut dcols = vec![T::zero(); patch * plane];
        for s in 0..g.n {
            T::gemm(
                patch,
                g.f,
                plane,
                T::one(),
                k,
                true,
                &up[s * out_sample..(s + 1) * out_sample],
                false,
                T::zero(),
                &mut dcols,
            );
            col2im_add(g, &dcols, &mut dx[s * in_sample..(s + 1) * in_sample]);
        }
        dx
    });

    (dx, dk, db)
}

/// Log-sum-exp formulation; returns the mean loss and the softmax rows.
fn softmax_ce_forward<T: Real>(logits: &[T], labels: &[usize], n: usize, k: usize) -> (T, Vec<T>) {
    let mut probs = vec![T::zero(); n * k];
    let mut total = 0.0f64;
    for i in 0..n {
        let row = &logits[i * k..(i + 1) * k];
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for (p, &z) in probs[i * k..(i + 1) * k].iter_mut().zip(row) {
            *p = (z - max).exp();
            sum += *p;
        }
        probs[i * k..(i + 1) * k].iter_mut().for_each(|p| *p /= sum);
        let log_z = max + sum.ln();
        total += (log_z - row[labels[i]]).to_f64_lossy();
    }
    (T::from_f64_lossy(total / n as f64), probs)
}
