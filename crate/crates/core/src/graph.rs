//! Reverse-mode autodiff on an explicit tape.
//!
//! A [`GraphBase`] is built fresh for every forward pass: leaves enter via
//! [`GraphBase::constant`] / [`GraphBase::param`], each operation records its
//! inputs plus whatever the backward sweep needs (argmax indices, conv
//! geometry), and [`GraphBase::backward`] walks the tape once in reverse.
//! A tape differentiates exactly once; a second call reports a stale tape
//! instead of returning silently wrong gradients. Independent tapes share no
//! state and may run on parallel workers.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::kernels;
use crate::scalar::Scalar;
use crate::tensor::TensorBase;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op<T> {
    Const,
    Param { slot: usize },
    Relu { x: NodeId },
    Sigmoid { x: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Div { a: NodeId, b: NodeId },
    Affine { x: NodeId, mul: T },
    SumAll { x: NodeId },
    Conv2d { x: NodeId, w: NodeId, b: NodeId, stride: usize, padding: usize },
    MaxPool2 { x: NodeId, argmax: Vec<u32> },
    AvgPool2 { x: NodeId },
    Upsample2 { x: NodeId },
    ConcatC { xs: Vec<NodeId> },
    GlobalMax { x: NodeId, argmax: Vec<u32> },
    GlobalAvg { x: NodeId },
    ChannelMax { x: NodeId, argmax: Vec<u32> },
    ChannelMean { x: NodeId },
    Linear { w: NodeId, x: NodeId },
    MulChannel { s: NodeId, x: NodeId },
    MulSpatial { m: NodeId, x: NodeId },
}

struct Node<T> {
    value: TensorBase<T>,
    op: Op<T>,
}

/// Gradients keyed by parameter name, as produced by one backward sweep.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    map: HashMap<String, TensorBase<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn empty() -> Self {
        Gradients { map: HashMap::new() }
    }

    pub fn get(&self, name: &str) -> Option<&TensorBase<T>> {
        self.map.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// self += k * other, elementwise per parameter. Missing entries appear.
    pub fn add_scaled(&mut self, other: &Gradients<T>, k: T) {
        for (name, g) in &other.map {
            match self.map.get_mut(name) {
                Some(acc) => {
                    for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                        *a = *a + k * *b;
                    }
                }
                None => {
                    self.map.insert(name.clone(), g.map(|v| k * v));
                }
            }
        }
    }
}

pub struct GraphBase<T> {
    nodes: Vec<Node<T>>,
    param_names: Vec<String>,
    bound: HashMap<String, NodeId>,
    consumed: bool,
}

impl<T: Scalar> Default for GraphBase<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> GraphBase<T> {
    pub fn new() -> Self {
        GraphBase { nodes: Vec::new(), param_names: Vec::new(), bound: HashMap::new(), consumed: false }
    }

    fn push(&mut self, value: TensorBase<T>, op: Op<T>) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &TensorBase<T> {
        &self.nodes[id.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, t: TensorBase<T>) -> NodeId {
        self.push(t, Op::Const)
    }

    /// Differentiable leaf. Each name may be bound once per tape.
    pub fn param(&mut self, name: &str, value: &TensorBase<T>) -> Result<NodeId> {
        if self.bound.contains_key(name) {
            return Err(Error::Config(format!("parameter {name} bound twice on one tape")));
        }
        let slot = self.param_names.len();
        self.param_names.push(name.to_string());
        let id = self.push(value.clone(), Op::Param { slot });
        self.bound.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = kernels::relu(self.value(x));
        self.push(v, Op::Relu { x })
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let v = kernels::sigmoid(self.value(x));
        self.push(v, Op::Sigmoid { x })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = kernels::ew_binary(self.value(a), self.value(b), |x, y| x + y)?;
        Ok(self.push(v, Op::Add { a, b }))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = kernels::ew_binary(self.value(a), self.value(b), |x, y| x - y)?;
        Ok(self.push(v, Op::Sub { a, b }))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = kernels::ew_binary(self.value(a), self.value(b), |x, y| x * y)?;
        Ok(self.push(v, Op::Mul { a, b }))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = kernels::ew_binary(self.value(a), self.value(b), |x, y| x / y)?;
        Ok(self.push(v, Op::Div { a, b }))
    }

    /// mul * x + add, elementwise with scalar coefficients.
    pub fn affine(&mut self, x: NodeId, mul: f64, add: f64) -> NodeId {
        let (m, a) = (T::from_f64(mul), T::from_f64(add));
        let v = self.value(x).map(|t| m * t + a);
        self.push(v, Op::Affine { x, mul: m })
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let v = kernels::sum_all(self.value(x));
        self.push(v, Op::SumAll { x })
    }

    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId, stride: usize, padding: usize) -> Result<NodeId> {
        let v = kernels::conv2d(self.value(x), self.value(w), self.value(b), stride, padding)?;
        Ok(self.push(v, Op::Conv2d { x, w, b, stride, padding }))
    }

    pub fn maxpool2(&mut self, x: NodeId) -> Result<NodeId> {
        let (v, argmax) = kernels::maxpool2(self.value(x))?;
        Ok(self.push(v, Op::MaxPool2 { x, argmax }))
    }

    pub fn avgpool2(&mut self, x: NodeId) -> Result<NodeId> {
        let v = kernels::avgpool2(self.value(x))?;
        Ok(self.push(v, Op::AvgPool2 { x }))
    }

    pub fn upsample2(&mut self, x: NodeId) -> Result<NodeId> {
        let v = kernels::upsample2(self.value(x))?;
        Ok(self.push(v, Op::Upsample2 { x }))
    }

    pub fn concat_channels(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        let parts: Vec<&TensorBase<T>> = xs.iter().map(|&id| self.value(id)).collect();
        let v = kernels::concat_channels(&parts)?;
        Ok(self.push(v, Op::ConcatC { xs: xs.to_vec() }))
    }

    pub fn global_max(&mut self, x: NodeId) -> Result<NodeId> {
        let (v, argmax) = kernels::global_max(self.value(x))?;
        Ok(self.push(v, Op::GlobalMax { x, argmax }))
    }

    pub fn global_avg(&mut self, x: NodeId) -> Result<NodeId> {
        let v = kernels::global_avg(self.value(x))?;
        Ok(self.push(v, Op::GlobalAvg { x }))
    }

    pub fn channel_max(&mut self, x: NodeId) -> Result<NodeId> {
        let (v, argmax) = kernels::channel_max(self.value(x))?;
        Ok(self.push(v, Op::ChannelMax { x, argmax }))
    }

    pub fn channel_mean(&mut self, x: NodeId) -> Result<NodeId> {
        let v = kernels::channel_mean(self.value(x))?;
        Ok(self.push(v, Op::ChannelMean { x }))
    }

    pub fn linear(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let v = kernels::linear(self.value(w), self.value(x))?;
        Ok(self.push(v, Op::Linear { w, x }))
    }

    pub fn mul_channel(&mut self, s: NodeId, x: NodeId) -> Result<NodeId> {
        let v = kernels::mul_channel(self.value(s), self.value(x))?;
        Ok(self.push(v, Op::MulChannel { s, x }))
    }

    pub fn mul_spatial(&mut self, m: NodeId, x: NodeId) -> Result<NodeId> {
        let v = kernels::mul_spatial(self.value(m), self.value(x))?;
        Ok(self.push(v, Op::MulSpatial { m, x }))
    }

    /// Shared two-layer perceptron w2 @ relu(w1 @ x), no biases.
    pub fn mlp_shared(&mut self, w1: NodeId, w2: NodeId, x: NodeId) -> Result<NodeId> {
        let h = self.linear(w1, x)?;
        let h = self.relu(h);
        self.linear(w2, h)
    }

    /// 1 - (sum(p*y)+eps) / (sum(p)+sum(y)-sum(p*y)+eps), a shape-[1] node.
    pub fn soft_iou(&mut self, pred: NodeId, target: NodeId, eps: f64) -> Result<NodeId> {
        let py = self.mul(pred, target)?;
        let inter = self.sum_all(py);
        let sp = self.sum_all(pred);
        let sy = self.sum_all(target);
        let tot = self.add(sp, sy)?;
        let union = self.sub(tot, inter)?;
        let num = self.affine(inter, 1.0, eps);
        let den = self.affine(union, 1.0, eps);
        let ratio = self.div(num, den)?;
        Ok(self.affine(ratio, -1.0, 1.0))
    }

    /// Reverse sweep from a single-element loss node. Gradients come back
    /// keyed by parameter name; parameters the loss never touched are absent.
    pub fn backward(&mut self, loss: NodeId) -> Result<Gradients<T>> {
        if self.consumed {
            return Err(Error::StaleTape);
        }
        self.consumed = true;
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<TensorBase<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(TensorBase::scalar(T::one()));

        for idx in (0..self.nodes.len()).rev() {
            let Some(dy) = grads[idx].take() else { continue };
            let out_val = &self.nodes[idx].value;
            match &self.nodes[idx].op {
                Op::Const | Op::Param { .. } => {
                    grads[idx] = Some(dy);
                }
                Op::Relu { x } => {
                    let xv = &self.nodes[x.0].value;
                    let g = TensorBase::from_fn(xv.shape(), |i| {
                        if xv.data()[i] > T::zero() { dy.data()[i] } else { T::zero() }
                    });
                    accumulate(&mut grads[x.0], g);
                }
                Op::Sigmoid { x } => {
                    let y = out_val;
                    let g = TensorBase::from_fn(y.shape(), |i| {
                        let s = y.data()[i];
                        dy.data()[i] * s * (T::one() - s)
                    });
                    accumulate(&mut grads[x.0], g);
                }
                Op::Add { a, b } => {
                    let (a, b) = (*a, *b);
                    accumulate(&mut grads[a.0], dy.clone());
                    accumulate(&mut grads[b.0], dy);
                }
                Op::Sub { a, b } => {
                    let (a, b) = (*a, *b);
                    accumulate(&mut grads[b.0], dy.map(|v| -v));
                    accumulate(&mut grads[a.0], dy);
                }
                Op::Mul { a, b } => {
                    let (a, b) = (*a, *b);
                    let av = self.nodes[a.0].value.clone();
                    let bv = &self.nodes[b.0].value;
                    let ga = kernels::ew_binary(&dy, bv, |g, v| g * v)?;
                    let gb = kernels::ew_binary(&dy, &av, |g, v| g * v)?;
                    accumulate(&mut grads[a.0], ga);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::Div { a, b } => {
                    let (a, b) = (*a, *b);
                    let av = self.nodes[a.0].value.clone();
                    let bv = self.nodes[b.0].value.clone();
                    let ga = kernels::ew_binary(&dy, &bv, |g, v| g / v)?;
                    let gb = TensorBase::from_fn(bv.shape(), |i| {
                        -dy.data()[i] * av.data()[i] / (bv.data()[i] * bv.data()[i])
                    });
                    accumulate(&mut grads[a.0], ga);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::Affine { x, mul } => {
                    let m = *mul;
                    accumulate(&mut grads[x.0], dy.map(|v| m * v));
                }
                Op::SumAll { x } => {
                    let g = TensorBase::full(self.nodes[x.0].value.shape(), dy.data()[0]);
                    accumulate(&mut grads[x.0], g);
                }
                Op::Conv2d { x, w, b, stride, padding } => {
                    let (x, w, b, stride, padding) = (*x, *w, *b, *stride, *padding);
                    let (dx, dw, db) = kernels::conv2d_backward(
                        &self.nodes[x.0].value,
                        &self.nodes[w.0].value,
                        &dy,
                        stride,
                        padding,
                    )?;
                    accumulate(&mut grads[x.0], dx);
                    accumulate(&mut grads[w.0], dw);
                    accumulate(&mut grads[b.0], db);
                }
                Op::MaxPool2 { x, argmax } => {
                    let g = kernels::maxpool2_backward(&dy, argmax, self.nodes[x.0].value.shape());
                    let x = *x;
                    accumulate(&mut grads[x.0], g);
                }
                Op::AvgPool2 { x } => {
                    let g = kernels::avgpool2_backward(&dy, self.nodes[x.0].value.shape());
                    let x = *x;
                    accumulate(&mut grads[x.0], g);
                }
                Op::Upsample2 { x } => {
                    let g = kernels::upsample2_backward(&dy, self.nodes[x.0].value.shape());
                    let x = *x;
                    accumulate(&mut grads[x.0], g);
                }
                Op::ConcatC { xs } => {
                    let xs = xs.clone();
                    let (_, h, w) = dy.dims3()?;
                    let mut offset = 0usize;
                    for part in xs {
                        let pc = self.nodes[part.0].value.shape()[0];
                        let slice = &dy.data()[offset * h * w..(offset + pc) * h * w];
                        let g = TensorBase::new(&[pc, h, w], slice.to_vec())?;
                        accumulate(&mut grads[part.0], g);
                        offset += pc;
                    }
                }
                Op::GlobalMax { x, argmax } => {
                    let mut g = TensorBase::zeros(self.nodes[x.0].value.shape());
                    for (ci, &src) in argmax.iter().enumerate() {
                        g.data_mut()[src as usize] = g.data_mut()[src as usize] + dy.data()[ci];
                    }
                    let x = *x;
                    accumulate(&mut grads[x.0], g);
                }
                Op::GlobalAvg { x } => {
                    let shape = self.nodes[x.0].value.shape().to_vec();
                    let inv = T::from_f64(1.0 / (shape[1] * shape[2]) as f64);
                    let g = TensorBase::from_fn(&shape, |i| {
                        let c = i / (shape[1] * shape[2]);
                        dy.data()[c] * inv
                    });
                    let x = *x;
                    accumulate(&mut grads[x.0], g);
                }
                Op::ChannelMax { x, argmax } => {
                    let shape = self.nodes[x.0].value.shape().to_vec();
                    let hw = shape[1] * shape[2];
                    let mut g = TensorBase::zeros(&shape);
                    for (pix, &c) in argmax.iter().enumerate() {
                        let at = c as usize * hw + pix;
                        g.data_mut()[at] = g.data_mut()[at] + dy.data()[pix];
                    }
                    let x = *x;
                    accumulate(&mut grads[x.0], g);
                }
                Op::ChannelMean { x } => {
                    let shape = self.nodes[x.0].value.shape().to_vec();
                    let hw = shape[1] * shape[2];
                    let inv = T::from_f64(1.0 / shape[0] as f64);
                    let g = TensorBase::from_fn(&shape, |i| dy.data()[i % hw] * inv);
                    let x = *x;
                    accumulate(&mut grads[x.0], g);
                }
                Op::Linear { w, x } => {
                    let (w, x) = (*w, *x);
                    let wv = self.nodes[w.0].value.clone();
                    let xv = self.nodes[x.0].value.clone();
                    let (o, i) = (wv.shape()[0], wv.shape()[1]);
                    let mut dx = TensorBase::zeros(xv.shape());
                    for r in 0..o {
                        let g = dy.data()[r];
                        for col in 0..i {
                            dx.data_mut()[col] = dx.data_mut()[col] + wv.data()[r * i + col] * g;
                        }
                    }
                    let dw = TensorBase::from_fn(wv.shape(), |flat| {
                        let (r, col) = (flat / i, flat % i);
                        dy.data()[r] * xv.data()[col]
                    });
                    accumulate(&mut grads[x.0], dx);
                    accumulate(&mut grads[w.0], dw);
                }
                Op::MulChannel { s, x } => {
                    let (s, x) = (*s, *x);
                    let sv = self.nodes[s.0].value.clone();
                    let xv = self.nodes[x.0].value.clone();
                    let (c, h, w) = xv.dims3()?;
                    let mut ds = TensorBase::zeros(&[c, 1, 1]);
                    for ci in 0..c {
                        let mut acc = T::zero();
                        for (g, v) in dy.data()[ci * h * w..(ci + 1) * h * w]
                            .iter()
                            .zip(&xv.data()[ci * h * w..(ci + 1) * h * w])
                        {
                            acc = acc + *g * *v;
                        }
                        ds.data_mut()[ci] = acc;
                    }
                    let dx = TensorBase::from_fn(xv.shape(), |idx| {
                        dy.data()[idx] * sv.data()[idx / (h * w)]
                    });
                    accumulate(&mut grads[s.0], ds);
                    accumulate(&mut grads[x.0], dx);
                }
                Op::MulSpatial { m, x } => {
                    let (m, x) = (*m, *x);
                    let mv = self.nodes[m.0].value.clone();
                    let xv = self.nodes[x.0].value.clone();
                    let (c, h, w) = xv.dims3()?;
                    let hw = h * w;
                    let mut dm = TensorBase::zeros(&[1, h, w]);
                    for ci in 0..c {
                        for pix in 0..hw {
                            dm.data_mut()[pix] =
                                dm.data_mut()[pix] + dy.data()[ci * hw + pix] * xv.data()[ci * hw + pix];
                        }
                    }
                    let dx = TensorBase::from_fn(xv.shape(), |idx| dy.data()[idx] * mv.data()[idx % hw]);
                    accumulate(&mut grads[m.0], dm);
                    accumulate(&mut grads[x.0], dx);
                }
            }
        }

        let mut out = Gradients::empty();
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Op::Param { slot } = node.op {
                if let Some(g) = grads[idx].take() {
                    out.map.insert(self.param_names[slot].clone(), g);
                }
            }
        }
        Ok(out)
    }
}

fn accumulate<T: Scalar>(slot: &mut Option<TensorBase<T>>, g: TensorBase<T>) {
    match slot {
        None => *slot = Some(g),
        Some(acc) => {
            for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                *a = *a + *b;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_twice_reports_stale_tape() {
        let mut g = GraphBase::<f64>::new();
        let p = g.param("w", &TensorBase::scalar(2.0)).unwrap();
        let loss = g.mul(p, p).unwrap();
        assert!(g.backward(loss).is_ok());
        match g.backward(loss) {
            Err(Error::StaleTape) => {}
            other => panic!("expected stale tape, got {other:?}"),
        }
    }

    #[test]
    fn quadratic_gradient() {
        // loss = sum(x^2)/2 -> dloss/dx = x
        let mut g = GraphBase::<f64>::new();
        let x = TensorBase::new(&[3], vec![1.0, -2.0, 3.0]).unwrap();
        let p = g.param("x", &x).unwrap();
        let sq = g.mul(p, p).unwrap();
        let s = g.sum_all(sq);
        let loss = g.affine(s, 0.5, 0.0);
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get("x").unwrap().data(), x.data());
    }

    #[test]
    fn unreached_param_gets_no_gradient() {
        let mut g = GraphBase::<f64>::new();
        let a = g.param("a", &TensorBase::scalar(1.0)).unwrap();
        let _b = g.param("b", &TensorBase::scalar(5.0)).unwrap();
        let loss = g.mul(a, a).unwrap();
        let grads = g.backward(loss).unwrap();
        assert!(grads.get("a").is_some());
        assert!(grads.get("b").is_none());
    }

    #[test]
    fn duplicate_param_name_rejected() {
        let mut g = GraphBase::<f64>::new();
        g.param("w", &TensorBase::scalar(1.0)).unwrap();
        assert!(g.param("w", &TensorBase::scalar(1.0)).is_err());
    }
}
